"""
Temporal-contrastive objective over sub-block embeddings.

Each sub-block embedding is an anchor; its logits are the temperature-scaled
dot products with every sub-block of the same window, and the positive is
the temporally preceding sub-block (the first block targets itself).
"""
from typing import Optional

import numpy as np

from ..core import autodiff as ad
from ..exceptions import ConfigError, NumericsError, ShapeError
from ..schemas.objective import LossConfig, PositiveMode, TargetVector


def similarity(Z: np.ndarray, tau: float) -> np.ndarray:
    """S[i, j, p] = <z_ij, z_ip> / tau for Z of shape B x k x F (no normalisation)."""
    if not tau > 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    Z = np.asarray(Z)
    if Z.ndim != 3:
        raise ShapeError(f"expected B x k x F embeddings, got shape {Z.shape}")
    return np.matmul(Z, Z.transpose(0, 2, 1)) / tau


def _preceding(k: int) -> tuple[int, ...]:
    return (0,) + tuple(range(k - 1))


def _next(k: int) -> tuple[int, ...]:
    return tuple(range(1, k)) + (k - 1,)


def targets(k: int, positive_mode: PositiveMode, rng: Optional[np.random.Generator] = None) -> TargetVector:
    """Positive index of every anchor for the given selection mode.

    Args:
        k: number of sub-blocks
        positive_mode: preceding, next, bidirectional or shuffled
        rng: required for shuffled mode

    Returns:
        TargetVector with one row per loss term
    """
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    mode = PositiveMode(positive_mode)
    if mode == PositiveMode.preceding:
        rows = (_preceding(k),)
    elif mode == PositiveMode.next:
        rows = (_next(k),)
    elif mode == PositiveMode.bidirectional:
        rows = (_preceding(k), _next(k))
    else:
        if rng is None:
            raise ConfigError("shuffled targets need an rng")
        # predecessor in a random order; the first of that order targets itself
        order = rng.permutation(k)
        row = [0] * k
        row[order[0]] = int(order[0])
        for q in range(1, k):
            row[order[q]] = int(order[q - 1])
        rows = (tuple(row),)
    return TargetVector(mode=mode, rows=rows)


def _check_inputs(S: np.ndarray, target: TargetVector) -> np.ndarray:
    S = np.asarray(S)
    if S.ndim != 3 or S.shape[1] != S.shape[2]:
        raise ShapeError(f"expected B x k x k logits, got shape {S.shape}")
    if S.shape[1] != target.k:
        raise ShapeError(f"targets are for k={target.k}, logits have k={S.shape[1]}")
    if not np.isfinite(S).all():
        raise NumericsError("similarity logits contain non-finite values")
    return S


def dicot_loss(S: np.ndarray, target: TargetVector) -> float:
    """Mean over all B*k anchors of -log softmax(S[i, j, :])[target[j]].

    With two target rows (bidirectional) the two loss terms are averaged.
    """
    S = _check_inputs(S, target)
    logp = ad.log_softmax(S)
    anchors = np.arange(target.k)
    terms = [-logp[:, anchors, np.asarray(row)].mean() for row in target.rows]
    return float(np.mean(terms))


def dicot_loss_grad(S: np.ndarray, target: TargetVector) -> np.ndarray:
    """Analytic dLoss/dS: (softmax - onehot(target)) / (B*k), averaged over terms."""
    S = _check_inputs(S, target)
    B, k, _ = S.shape
    probs = np.exp(ad.log_softmax(S))
    anchors = np.arange(k)
    grad = np.zeros_like(S)
    for row in target.rows:
        term = probs.copy()
        term[:, anchors, np.asarray(row)] -= 1.0
        grad += term
    return grad / (B * k * len(target.rows))


def dicot_loss_node(Z: ad.Tensor, target: TargetVector, tau: float) -> ad.Tensor:
    """Differentiable loss from a B x k x F embedding tensor."""
    if not tau > 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    B, k, _ = Z.shape
    if k != target.k:
        raise ShapeError(f"targets are for k={target.k}, embeddings have k={k}")
    S = ad.contract(Z, Z, scale=1.0 / tau)
    if not np.isfinite(S.data).all():
        raise NumericsError("similarity logits contain non-finite values")
    flat = ad.reshape(S, (B * k, k))
    terms = [ad.softmax_cross_entropy(flat, np.tile(np.asarray(row), B)) for row in target.rows]
    if len(terms) == 1:
        return terms[0]
    return ad.scale(ad.add(terms[0], terms[1]), 0.5)


def loss_from_config(Z: ad.Tensor, config: LossConfig, rng: Optional[np.random.Generator] = None) -> ad.Tensor:
    target = targets(Z.shape[1], config.positive_mode, rng)
    return dicot_loss_node(Z, target, config.tau)
