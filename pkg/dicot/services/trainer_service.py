"""
Self-supervised pretraining loop.

Per iteration: draw B windows with replacement, draw k, plan and cut the
sub-blocks, encode the (B*k) blocks, score the temporal-contrastive loss,
backpropagate and take one AdamW step under a warmup + cosine schedule.
All randomness comes from one generator seeded by ``OptimizerConfig.seed``.
"""
import logging
import math
import time
from typing import Optional

import numpy as np

from ..core import autodiff as ad
from ..exceptions import ContractError, InvalidPartition, NumericsError, ShapeError
from ..schemas.data import TimeSeriesBatch
from ..schemas.encoder import EncoderConfig, ModelParams
from ..schemas.objective import LossConfig
from ..schemas.partition import PartitionParams
from ..schemas.trainer import OptimizerConfig, OptimizerState, TrainLog, TrainRecord
from ..utils.numeric import round_half_away
from . import encoder_service, objective_service, partition_service

logger = logging.getLogger(__name__)

MAX_PARTITION_RETRIES = 10
LOG_EVERY = 50
# first-batch loss must sit within this many nats of ln k_eff
INITIAL_LOSS_TOLERANCE = 0.3


def warmup_iters(cfg: OptimizerConfig) -> int:
    return round_half_away(cfg.warmup_frac * cfg.total_iters)


def lr_at(t: int, cfg: OptimizerConfig) -> float:
    """Linear warmup to base_lr, then cosine decay to exactly 0 at total_iters."""
    W = warmup_iters(cfg)
    if t < W:
        return cfg.base_lr * t / W
    span = max(1, cfg.total_iters - W)
    progress = min(1.0, (t - W) / span)
    return cfg.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    cfg: OptimizerConfig,
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """One decoupled-weight-decay Adam update; inputs are left untouched."""
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {params[name].shape}")
        if not np.isfinite(g).all():
            raise NumericsError(f"non-finite gradient for {name}")

    t = state.t + 1
    b1, b2 = cfg.beta1, cfg.beta2
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        m = b1 * state.m.get(name, np.zeros_like(p)) + (1 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(p)) + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params[name] = p - lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p)
        new_m[name] = m
        new_v[name] = v
    return new_params, OptimizerState(m=new_m, v=new_v, t=t)


def _draw_plan(T: int, partition: PartitionParams, rng: np.random.Generator):
    for attempt in range(MAX_PARTITION_RETRIES):
        k = partition_service.sample_k(partition, rng)
        try:
            return k, partition_service.plan_partition(T, k, partition.rho), attempt
        except InvalidPartition as exc:
            logger.warning("resampling k after invalid partition (k=%d): %s", k, exc.message)
    raise InvalidPartition(f"no valid partition for T={T} after {MAX_PARTITION_RETRIES} draws")


def loss_and_grads(
    windows: np.ndarray,
    params: ModelParams,
    encoder: EncoderConfig,
    plan,
    loss_config: LossConfig,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss value and parameter gradients for one batch of B x T x D windows."""
    blocks = partition_service.extract_subblocks(windows, plan)
    B, k = blocks.values.shape[:2]
    weights = encoder_service.as_tensors(params, requires_grad=True)
    z = encoder_service.forward(ad.Tensor(blocks.flatten()), weights, encoder, projection=True)
    Z = ad.reshape(z, (B, k, z.shape[1]))
    loss = objective_service.loss_from_config(Z, loss_config, rng)
    ad.backward(loss)
    grads = {
        name: (w.grad if w.grad is not None else np.zeros_like(w.data))
        for name, w in weights.items()
    }
    return loss.item(), grads


def pretrain(
    dataset: TimeSeriesBatch,
    encoder: EncoderConfig,
    partition: PartitionParams,
    loss_config: LossConfig,
    optimizer: OptimizerConfig,
    initial: Optional[ModelParams] = None,
) -> tuple[ModelParams, TrainLog]:
    """Pretrain the encoder on unlabeled windows.

    Args:
        dataset: windows sharing a common T (labels ignored)
        encoder: architecture; in_channels must equal the dataset's D
        partition: overlap ratio and sub-block count rule
        loss_config: temperature and positive selection mode
        optimizer: AdamW, schedule, batch size, iteration count and seed
        initial: starting weights (defaults to init_params with the optimizer seed)

    Returns:
        Final parameters and the per-iteration log
    """
    if dataset.n == 0:
        raise ContractError("cannot pretrain on an empty dataset")
    if dataset.D != encoder.in_channels:
        raise ShapeError(f"dataset has D={dataset.D}, encoder expects {encoder.in_channels}")

    params = initial.copy() if initial is not None else encoder_service.init_params(encoder, optimizer.seed)
    log = TrainLog()
    if optimizer.total_iters == 0:
        return params, log

    rng = np.random.default_rng(optimizer.seed)
    state = OptimizerState()
    started = time.perf_counter()
    logger.info(
        "pretraining: n=%d T=%d D=%d iters=%d batch=%d tau=%g mode=%s",
        dataset.n, dataset.T, dataset.D, optimizer.total_iters, optimizer.batch_size,
        loss_config.tau, loss_config.positive_mode.value,
    )

    for it in range(optimizer.total_iters):
        idx = rng.integers(0, dataset.n, size=optimizer.batch_size)
        k, plan, retries = _draw_plan(dataset.T, partition, rng)
        log.resamples += retries
        lr = lr_at(it, optimizer)
        try:
            loss, grads = loss_and_grads(dataset.values[idx], params, encoder, plan, loss_config, rng)
            tensors, state = adamw_step(params.tensors, grads, state, lr, optimizer)
        except NumericsError as exc:
            logger.error("aborting at iteration %d: %s", it, exc.message)
            raise
        params = ModelParams(tensors=tensors)

        if it == 0:
            chance = math.log(plan.k)
            if abs(loss - chance) > INITIAL_LOSS_TOLERANCE:
                logger.warning("initial loss %.4f is far from ln k=%.4f", loss, chance)
        log.records.append(TrainRecord(iter=it, k=k, k_eff=plan.k, lr=lr, loss=loss))
        if it % LOG_EVERY == 0 or it == optimizer.total_iters - 1:
            logger.info("iter=%d k=%d lr=%.3g loss=%.4f", it, k, lr, loss)

    log.wall_seconds = time.perf_counter() - started
    logger.info("pretraining finished in %.1f s (%d k resamples)", log.wall_seconds, log.resamples)
    return params, log
