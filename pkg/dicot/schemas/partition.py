from dicot.utils.compat import StrEnum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class SplitMode(StrEnum):
    fixed = "fixed"
    uniform = "uniform"


class PartitionParams(BaseModel):
    """Overlap ratio and the rule for choosing the sub-block count k."""
    rho: float = 0.5
    split_mode: SplitMode = SplitMode.uniform
    k: int = 10  # used in fixed mode
    k_min: int = 2
    k_max: int = 10
    seed: int = 1

    @model_validator(mode="after")
    def _check(self) -> "PartitionParams":
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.split_mode == SplitMode.fixed and self.k < 2:
            raise ValueError(f"fixed k must be >= 2, got {self.k}")
        if self.split_mode == SplitMode.uniform and not 2 <= self.k_min <= self.k_max:
            raise ValueError(f"need 2 <= k_min <= k_max, got k_min={self.k_min} k_max={self.k_max}")
        return self


class PartitionPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    T: int
    k: int  # effective count
    L: int
    s: int

    @property
    def covered(self) -> int:
        """Number of leading timesteps touched by at least one block."""
        return self.L + (self.k - 1) * self.s

    def block_ranges(self) -> list[tuple[int, int]]:
        return [(j * self.s, j * self.s + self.L) for j in range(self.k)]


class SubBlockSet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray  # B x k x L x D
    plan: PartitionPlan
    source_id: Optional[int] = None

    def flatten(self) -> np.ndarray:
        """(B*k) x L x D view, instance-major."""
        B, k, L, D = self.values.shape
        return self.values.reshape(B * k, L, D)
