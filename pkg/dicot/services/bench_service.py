"""
Loss-kernel scaling sweep.

Times the sub-block objective against a timestep-level contrast on
pregenerated random embeddings, so encoder cost never enters the numbers.
"""
import logging
import statistics
import timeit
from typing import Callable, Optional

import numpy as np

from ..core import autodiff as ad
from ..core.config import settings
from ..exceptions import BudgetError, ConfigError, ShapeError
from ..schemas.bench import BenchMethod, BenchPoint, ScalingResult, SkippedCell, SweepConfig
from ..schemas.objective import PositiveMode
from . import objective_service

logger = logging.getLogger(__name__)

STABILITY_GATE = 0.25
MAX_TIMING_ATTEMPTS = 3


def score_matrix_bytes(method: BenchMethod, B: int, T: int, k: int, itemsize: int = 8) -> int:
    """Bytes of the logit matrix each kernel materialises."""
    if method == BenchMethod.dicot:
        return B * k * k * itemsize
    return (B * T) ** 2 * itemsize


def timestep_contrast_loss(Z: np.ndarray, tau: float, budget_bytes: Optional[int] = None) -> float:
    """Softmax-CE over the full (BT) x (BT) similarity matrix of per-timestep embeddings.

    Every anchor's positive is the preceding timestep of the same window; the
    first timestep targets itself. All other B*T timesteps are negatives.
    """
    if not tau > 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    Z = np.asarray(Z)
    if Z.ndim != 3:
        raise ShapeError(f"expected B x T x F embeddings, got shape {Z.shape}")
    B, T, F = Z.shape
    budget = settings.BENCH_BUDGET_BYTES if budget_bytes is None else budget_bytes
    needed = (B * T) ** 2 * Z.dtype.itemsize
    if needed > budget:
        raise BudgetError(f"B={B} T={T} needs {needed} bytes of scores, budget is {budget}")

    flat = Z.reshape(B * T, F)
    logp = ad.log_softmax(flat @ flat.T / tau)
    steps = np.arange(T)
    positive = (np.arange(B)[:, None] * T + np.maximum(steps - 1, 0)[None, :]).reshape(-1)
    return float(-logp[np.arange(B * T), positive].mean())


def _dicot_kernel(Z: np.ndarray, tau: float) -> Callable[[], float]:
    target = objective_service.targets(Z.shape[1], PositiveMode.preceding)
    return lambda: objective_service.dicot_loss(objective_service.similarity(Z, tau), target)


def _relative_spread(runs: list[float]) -> float:
    middle = statistics.median(runs)
    return (max(runs) - min(runs)) / middle if middle > 0 else 0.0


def _median_seconds(kernel: Callable[[], float], repeats: int) -> tuple[float, float]:
    """Median per-call time over ``repeats`` runs, after one discarded warmup run.

    The repeats are retaken, up to MAX_TIMING_ATTEMPTS times, while their
    spread (max - min) / median reaches STABILITY_GATE. Returns the median and
    the spread of the last attempt.
    """
    timer = timeit.Timer(kernel)
    number, _ = timer.autorange()
    for attempt in range(1, MAX_TIMING_ATTEMPTS + 1):
        runs = timer.repeat(repeat=repeats + 1, number=number)[1:]
        spread = _relative_spread(runs)
        if spread < STABILITY_GATE:
            break
        logger.debug("timing attempt %d spread %.2f, retrying", attempt, spread)
    return statistics.median(runs) / number, spread


def loglog_slope(xs: list[float], ys: list[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    if len(xs) < 2:
        raise ConfigError("a slope needs at least two points")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def _time_cell(method: BenchMethod, B: int, T: int, config: SweepConfig, rng: np.random.Generator) -> BenchPoint:
    dtype = np.float32 if config.float32 else np.float64
    if method == BenchMethod.dicot:
        # only the k sub-block embeddings reach the loss; T never does
        Z = rng.standard_normal((B, config.k, config.F)).astype(dtype)
        kernel = _dicot_kernel(Z, config.tau)
    else:
        Z = rng.standard_normal((B, T, config.F)).astype(dtype)
        kernel = lambda: timestep_contrast_loss(Z, config.tau, config.budget_bytes)  # noqa: E731
    value = kernel()
    if not np.isfinite(value):
        raise ConfigError(f"{method.value} kernel returned a non-finite loss at B={B} T={T}")
    seconds, spread = _median_seconds(kernel, config.repeats)
    return BenchPoint(
        method=method,
        B=B,
        T=T,
        k=config.k,
        F=config.F,
        median_seconds=max(seconds, 1e-12),
        spread=spread,
        bytes=score_matrix_bytes(method, B, T, config.k, np.dtype(dtype).itemsize),
    )


def run_scaling(config: Optional[SweepConfig] = None) -> ScalingResult:
    """Time both kernels over the T x B grid and fit log-log slopes.

    Cells whose score matrix exceeds the budget are skipped and recorded;
    cells whose repeats never settled under the stability gate are kept and
    listed in ``unstable``.
    """
    config = config or SweepConfig()
    rng = np.random.default_rng(config.seed)
    result = ScalingResult()

    for method in BenchMethod:
        for B in config.B_values:
            for T in config.T_values:
                needed = score_matrix_bytes(method, B, T, config.k, 4 if config.float32 else 8)
                if needed > config.budget_bytes:
                    reason = f"needs {needed} bytes, budget {config.budget_bytes}"
                    logger.warning("skipping %s B=%d T=%d: %s", method.value, B, T, reason)
                    result.skipped.append(SkippedCell(method=method, B=B, T=T, reason=reason))
                    continue
                point = _time_cell(method, B, T, config, rng)
                logger.info("%s B=%d T=%d median=%.3e s", method.value, B, T, point.median_seconds)
                result.points.append(point)
                if point.spread >= STABILITY_GATE:
                    logger.warning(
                        "%s B=%d T=%d stayed unstable (spread %.2f)", method.value, B, T, point.spread
                    )
                    result.unstable.append(point)

    for method in BenchMethod:
        per_B: dict[int, float] = {}
        for B in config.B_values:
            cells = [p for p in result.points if p.method == method and p.B == B]
            if len(cells) >= 2:
                per_B[B] = loglog_slope([p.T for p in cells], [p.median_seconds for p in cells])
        result.slope_vs_T[method.value] = per_B

    for T in config.T_values:
        cells = [p for p in result.points if p.method == BenchMethod.dicot and p.T == T]
        if len(cells) >= 2:
            result.dicot_slope_vs_B[T] = loglog_slope([p.B for p in cells], [p.median_seconds for p in cells])
    return result
