"""
Frozen-backbone evaluation protocols.

Embeddings come from whole windows with the projection head bypassed. Every
protocol standardises features with statistics of its training side only.
"""
import logging
from typing import Optional

import numpy as np

from ..core import autodiff as ad
from ..core.config import settings
from ..exceptions import ConfigError, ShapeError
from ..schemas.data import TimeSeriesBatch
from ..schemas.encoder import EncoderConfig, ModelParams
from ..schemas.eval import EmbeddingMatrix, EvalReport, ProbeConfig, Standardization
from ..schemas.trainer import OptimizerConfig, OptimizerState
from ..utils.numeric import round_half_away
from . import data_service, encoder_service, metrics_service, trainer_service

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-12


def embed_windows(
    dataset: TimeSeriesBatch,
    params: ModelParams,
    config: Optional[EncoderConfig] = None,
    chunk_size: Optional[int] = None,
) -> EmbeddingMatrix:
    """One F-vector per window, encoding the full T x D window."""
    config = config or encoder_service.config_from_params(params)
    if dataset.D != config.in_channels:
        raise ShapeError(f"dataset has D={dataset.D}, encoder expects {config.in_channels}")
    chunk = chunk_size or settings.EVAL_CHUNK_SIZE
    parts = [
        encoder_service.encode(dataset.values[start:start + chunk], params, config, projection=False)
        for start in range(0, dataset.n, chunk)
    ]
    return EmbeddingMatrix(values=np.concatenate(parts, axis=0), labels=dataset.labels)


def raw_features(dataset: TimeSeriesBatch) -> EmbeddingMatrix:
    """Flattened windows, the no-encoder baseline."""
    return EmbeddingMatrix(values=dataset.values.reshape(dataset.n, -1).copy(), labels=dataset.labels)


def standardize(train_emb: np.ndarray, apply_to: np.ndarray) -> tuple[np.ndarray, np.ndarray, Standardization]:
    """Per-feature (x - mean) / std with TRAIN statistics applied to both sides.

    Features whose train std is below 1e-12 map to 0.
    """
    train_emb = np.asarray(train_emb, dtype=np.float64)
    apply_to = np.asarray(apply_to, dtype=np.float64)
    if train_emb.ndim != 2 or apply_to.ndim != 2 or train_emb.shape[1] != apply_to.shape[1]:
        raise ShapeError(f"feature counts differ: {train_emb.shape} vs {apply_to.shape}")
    mean = train_emb.mean(axis=0)
    std = train_emb.std(axis=0)
    live = std >= STD_FLOOR
    safe = np.where(live, std, 1.0)

    def apply(x: np.ndarray) -> np.ndarray:
        return np.where(live, (x - mean) / safe, 0.0)

    return apply(train_emb), apply(apply_to), Standardization(mean=mean, std=std)


def knn1(train_emb: np.ndarray, train_labels: np.ndarray, test_emb: np.ndarray, test_labels: Optional[np.ndarray] = None, chunk_size: int = 256) -> tuple[np.ndarray, Optional[float]]:
    """Label of the Euclidean-nearest reference point; ties go to the lowest index.

    Returns:
        predictions and, when test labels are given, the accuracy
    """
    train_emb = np.asarray(train_emb, dtype=np.float64)
    test_emb = np.asarray(test_emb, dtype=np.float64)
    if train_emb.shape[0] == 0:
        raise ConfigError("1NN needs a non-empty reference set")
    if train_emb.shape[1] != test_emb.shape[1]:
        raise ShapeError(f"feature counts differ: {train_emb.shape[1]} vs {test_emb.shape[1]}")
    train_labels = np.asarray(train_labels)
    nearest = np.empty(test_emb.shape[0], dtype=np.int64)
    for start in range(0, test_emb.shape[0], chunk_size):
        diff = test_emb[start:start + chunk_size, None, :] - train_emb[None, :, :]
        nearest[start:start + chunk_size] = np.argmin((diff * diff).sum(axis=2), axis=1)
    predictions = train_labels[nearest]
    accuracy = None if test_labels is None else float(np.mean(predictions == np.asarray(test_labels)))
    return predictions, accuracy


def subsample_per_class(labels: np.ndarray, m_per_class: int, seed: int) -> np.ndarray:
    """Up to m indices per class drawn without replacement, sorted."""
    if m_per_class < 1:
        raise ConfigError(f"per-class budget must be >= 1, got {m_per_class}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    chosen = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size <= m_per_class:
            chosen.append(members)
        else:
            chosen.append(rng.choice(members, size=m_per_class, replace=False))
    return np.sort(np.concatenate(chosen))


def subsample_fraction(labels: np.ndarray, frac: float, seed: int) -> np.ndarray:
    """Stratified sample of round(frac * N) indices, at least one per present class.

    Per-class counts follow largest-remainder proportional allocation.
    """
    if not 0 < frac <= 1:
        raise ConfigError(f"fraction must lie in (0, 1], got {frac}")
    labels = np.asarray(labels)
    n = labels.size
    classes, counts = np.unique(labels, return_counts=True)
    total = round_half_away(frac * n)
    quotas = counts * total / n
    alloc = np.floor(quotas).astype(np.int64)
    remainder = total - int(alloc.sum())
    if remainder > 0:
        # stable sort keeps class order for equal remainders
        order = np.argsort(-(quotas - alloc), kind="stable")
        alloc[order[:remainder]] += 1
    alloc = np.clip(alloc, 1, counts)

    rng = np.random.default_rng(seed)
    chosen = [
        rng.choice(np.flatnonzero(labels == cls), size=int(take), replace=False)
        for cls, take in zip(classes, alloc)
    ]
    return np.sort(np.concatenate(chosen))


def linear_probe(
    train_emb: np.ndarray,
    train_labels: np.ndarray,
    test_emb: np.ndarray,
    test_labels: np.ndarray,
    config: Optional[ProbeConfig] = None,
    seed: int = 1,
) -> float:
    """Multinomial logistic regression on standardised embeddings; returns test accuracy.

    Full-batch softmax cross-entropy plus an L2 penalty on the weights,
    minimised with the trainer's AdamW step (no decoupled decay).
    """
    config = config or ProbeConfig()
    train_labels = np.asarray(train_labels, dtype=np.int64)
    test_labels = np.asarray(test_labels, dtype=np.int64)
    if np.unique(train_labels).size < 2:
        raise ConfigError("linear probe needs at least two classes in the training labels")
    x_train, x_test, _ = standardize(train_emb, test_emb)
    n_classes = int(max(train_labels.max(), test_labels.max(initial=0))) + 1
    F = x_train.shape[1]

    rng = np.random.default_rng(seed)
    params = {"weight": rng.normal(0.0, 0.01, size=(F, n_classes)), "bias": np.zeros(n_classes)}
    opt = OptimizerConfig(base_lr=config.lr, weight_decay=0.0, total_iters=config.iters, batch_size=1)
    state = OptimizerState()
    x = ad.Tensor(x_train)
    for _ in range(config.iters):
        weight = ad.Tensor(params["weight"], requires_grad=True)
        bias = ad.Tensor(params["bias"], requires_grad=True)
        loss = ad.softmax_cross_entropy(ad.bias_add(ad.dense(x, weight), bias), train_labels)
        ad.backward(loss)
        grads = {"weight": weight.grad + 2.0 * config.l2 * params["weight"], "bias": bias.grad}
        params, state = trainer_service.adamw_step(params, grads, state, config.lr, opt)

    logits = x_test @ params["weight"] + params["bias"]
    return float(np.mean(np.argmax(logits, axis=1) == test_labels))


def kmeans(emb: np.ndarray, n_clusters: int, seed: int, max_iter: int = 100) -> np.ndarray:
    """k-means++ seeding then Lloyd iterations until the assignment stops changing.

    An emptied cluster is re-seeded at the point farthest from its centroid.
    """
    emb = np.asarray(emb, dtype=np.float64)
    n = emb.shape[0]
    if not 1 <= n_clusters <= n:
        raise ConfigError(f"n_clusters must lie in [1, {n}], got {n_clusters}")
    rng = np.random.default_rng(seed)

    first = int(rng.integers(n))
    chosen = {first}
    centers = [emb[first]]
    closest = ((emb - emb[first]) ** 2).sum(axis=1)
    for _ in range(1, n_clusters):
        weights = closest.copy()
        weights[list(chosen)] = 0.0
        if weights.sum() > 0:
            idx = int(rng.choice(n, p=weights / weights.sum()))
        else:
            # only duplicates of chosen centers remain
            idx = int(rng.choice(np.setdiff1d(np.arange(n), list(chosen))))
        chosen.add(idx)
        centers.append(emb[idx])
        closest = np.minimum(closest, ((emb - emb[idx]) ** 2).sum(axis=1))
    centers = np.array(centers)

    assignments = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        dist = ((emb[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        if np.array_equal(new, assignments):
            break
        assignments = new
        _update_centers(emb, assignments, dist, centers)
    return assignments


def _update_centers(emb: np.ndarray, assignments: np.ndarray, dist: np.ndarray, centers: np.ndarray) -> None:
    """Move each centroid to its members' mean, in place.

    An empty cluster takes the point farthest from its assigned centroid
    (``dist`` holds distances to the previous centroids); the cluster that
    gave the point up is re-averaged without it.
    """
    n = emb.shape[0]
    for c in range(centers.shape[0]):
        members = assignments == c
        if members.any():
            centers[c] = emb[members].mean(axis=0)
            continue
        far = int(np.argmax(dist[np.arange(n), assignments]))
        donor = int(assignments[far])
        centers[c] = emb[far]
        assignments[far] = c
        dist[far] = 0.0
        remaining = assignments == donor
        if remaining.any():
            centers[donor] = emb[remaining].mean(axis=0)


def inertia(emb: np.ndarray, assignments: np.ndarray) -> float:
    """Sum of squared distances to each cluster's mean."""
    emb = np.asarray(emb, dtype=np.float64)
    total = 0.0
    for c in np.unique(assignments):
        members = emb[assignments == c]
        total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


# ---------------------------------------------------------------- protocols


def _labelled(emb: EmbeddingMatrix, role: str) -> np.ndarray:
    if emb.labels is None:
        raise ConfigError(f"{role} embeddings carry no labels")
    return emb.labels


def _complement(n: int, indices: np.ndarray) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[indices] = False
    return np.flatnonzero(mask)


def knn_report(
    train: EmbeddingMatrix,
    test: Optional[EmbeddingMatrix],
    budgets: list[int],
    seeds: list[int],
) -> EvalReport:
    """1NN accuracy for each labels-per-class budget and seed.

    Without a test set the references are drawn from ``train`` and every
    remaining row is classified.
    """
    labels = _labelled(train, "reference")
    report = EvalReport(task="knn", config={"budgets": budgets, "seeds": seeds})
    for budget in budgets:
        for seed in seeds:
            ref_idx = subsample_per_class(labels, budget, seed)
            if test is None:
                held_out = _complement(train.n, ref_idx)
                if held_out.size == 0:
                    raise ConfigError(f"budget {budget} leaves no rows to classify; pass --test-emb")
                query, query_labels = train.values[held_out], labels[held_out]
            else:
                query, query_labels = test.values, _labelled(test, "test")
            ref_std, query_std, _ = standardize(train.values[ref_idx], query)
            _, accuracy = knn1(ref_std, labels[ref_idx], query_std, query_labels)
            logger.info("knn budget=%d seed=%d accuracy=%.4f", budget, seed, accuracy)
            report.add(f"accuracy@{budget}", accuracy, seed)
    report.add_means()
    return report


def _holdout_split(labels: np.ndarray, train_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    train_idx = subsample_fraction(labels, train_frac, seed)
    return train_idx, _complement(labels.size, train_idx)


def linear_report(
    train: EmbeddingMatrix,
    test: Optional[EmbeddingMatrix],
    probe: ProbeConfig,
    seeds: list[int],
    train_frac: float = 0.8,
    task: str = "linear",
) -> EvalReport:
    """Linear-probe accuracy per seed (seed drives the probe init and, without a test set, the split)."""
    labels = _labelled(train, "train")
    report = EvalReport(task=task, config={"seeds": seeds, **probe.model_dump()})
    for seed in seeds:
        if test is None:
            train_idx, test_idx = _holdout_split(labels, train_frac, seed)
            x_tr, y_tr = train.values[train_idx], labels[train_idx]
            x_te, y_te = train.values[test_idx], labels[test_idx]
        else:
            x_tr, y_tr = train.values, labels
            x_te, y_te = test.values, _labelled(test, "test")
        accuracy = linear_probe(x_tr, y_tr, x_te, y_te, probe, seed)
        logger.info("%s seed=%d accuracy=%.4f", task, seed, accuracy)
        report.add("accuracy", accuracy, seed)
    report.add_means()
    return report


def lowlabel_report(
    train: EmbeddingMatrix,
    test: EmbeddingMatrix,
    frac: float,
    probe: ProbeConfig,
    seeds: list[int],
) -> EvalReport:
    """Linear probe trained on a stratified ``frac`` of the labelled training rows."""
    labels = _labelled(train, "train")
    test_labels = _labelled(test, "test")
    report = EvalReport(task="lowlabel", config={"frac": frac, "seeds": seeds, **probe.model_dump()})
    for seed in seeds:
        idx = subsample_fraction(labels, frac, seed)
        accuracy = linear_probe(train.values[idx], labels[idx], test.values, test_labels, probe, seed)
        logger.info("lowlabel frac=%g seed=%d n=%d accuracy=%.4f", frac, seed, idx.size, accuracy)
        report.add("accuracy", accuracy, seed)
    report.add_means()
    return report


def cluster_report(
    emb: EmbeddingMatrix,
    seeds: list[int],
    n_clusters: Optional[int] = None,
    max_iter: int = 100,
) -> EvalReport:
    """k-means on standardised embeddings scored against the labels by NMI and ARI."""
    labels = _labelled(emb, "clustering")
    n_clusters = n_clusters or int(np.unique(labels).size)
    values, _, _ = standardize(emb.values, emb.values)
    report = EvalReport(task="cluster", config={"n_clusters": n_clusters, "seeds": seeds, "max_iter": max_iter})
    for seed in seeds:
        assignments = kmeans(values, n_clusters, seed, max_iter)
        scores = {
            "nmi": metrics_service.nmi(labels, assignments),
            "ari": metrics_service.ari(labels, assignments),
            "inertia": inertia(values, assignments),
        }
        logger.info("cluster seed=%d nmi=%.4f ari=%.4f", seed, scores["nmi"], scores["ari"])
        for metric, value in scores.items():
            report.add(metric, value, seed)
    report.add_means()
    return report


def transfer_report(
    params: ModelParams,
    target_train: TimeSeriesBatch,
    target_test: TimeSeriesBatch,
    channels: Optional[list[int]],
    probe: ProbeConfig,
    seeds: list[int],
) -> EvalReport:
    """Frozen source encoder applied to a target dataset restricted to shared channels."""
    if channels:
        target_train = data_service.select_channels(target_train, channels)
        target_test = data_service.select_channels(target_test, channels)
    config = encoder_service.config_from_params(params)
    train = embed_windows(target_train, params, config)
    test = embed_windows(target_test, params, config)
    report = linear_report(train, test, probe, seeds, task="transfer")
    report.config["channels"] = channels or list(range(target_train.D))
    return report
