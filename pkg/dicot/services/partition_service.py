"""
Sub-block planning and extraction.

A window of T timesteps is cut into k overlapping sub-blocks of even
length L, consecutive blocks starting s timesteps apart. Trailing
timesteps past L + (k-1)*s are not covered by any block.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..exceptions import ConfigError, InvalidPartition, ShapeError
from ..schemas.data import TimeSeriesBatch
from ..schemas.partition import PartitionParams, PartitionPlan, SplitMode, SubBlockSet
from ..utils.numeric import round_half_away


def sample_k(params: PartitionParams, rng: np.random.Generator) -> int:
    """Draw the sub-block count for one iteration.

    Fixed mode returns the configured k without touching the rng; uniform
    mode draws from the inclusive range {k_min, ..., k_max}.
    """
    if params.split_mode == SplitMode.fixed:
        return params.k
    return int(rng.integers(params.k_min, params.k_max + 1))


def plan_partition(T: int, k_requested: int, rho: float) -> PartitionPlan:
    """Resolve (L, s, k_eff) for a window of length T.

    Args:
        T: window length in timesteps
        k_requested: requested number of sub-blocks
        rho: overlap ratio in [0, 1)

    Returns:
        PartitionPlan with even L, stride s and effective block count k
    """
    if k_requested < 2:
        raise ConfigError(f"k must be >= 2, got {k_requested}")
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"rho must lie in [0, 1), got {rho}")
    if T < 4:
        raise InvalidPartition(f"window too short for requested k (T={T}, k={k_requested})")

    raw_L = T / (1 + (k_requested - 1) * (1 - rho))
    L = 2 * round_half_away(raw_L / 2)
    if L < 2 or L > T:
        raise InvalidPartition(f"window too short for requested k (T={T}, k={k_requested}, L={L})")
    s = round_half_away(L * (1 - rho))
    if s < 1:
        raise InvalidPartition(f"overlap too large (rho={rho}, L={L})")
    k_eff = (T - L) // s + 1
    if k_eff < 2:
        raise InvalidPartition(f"only {k_eff} sub-block fits (T={T}, L={L}, s={s})")
    return PartitionPlan(T=T, k=k_eff, L=L, s=s)


def extract_subblocks(batch: TimeSeriesBatch | np.ndarray, plan: PartitionPlan, source_id: int | None = None) -> SubBlockSet:
    """Cut every window into the plan's sub-blocks with a strided view.

    out[i, j, t, d] == batch[i, j*s + t, d]; the result is a contiguous copy.
    """
    values = batch.values if isinstance(batch, TimeSeriesBatch) else np.asarray(batch)
    if values.ndim != 3:
        raise ShapeError(f"expected B x T x D windows, got shape {values.shape}")
    B, T, D = values.shape
    if T != plan.T:
        raise ShapeError(f"plan was made for T={plan.T}, batch has T={T}")

    sb, st, sd = values.strides
    view = as_strided(
        values,
        shape=(B, plan.k, plan.L, D),
        strides=(sb, plan.s * st, st, sd),
        writeable=False,
    )
    return SubBlockSet(values=view.copy(), plan=plan, source_id=source_id)
