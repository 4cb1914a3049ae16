from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class TimeSeriesBatch(BaseModel):
    """B windows of T timesteps and D channels, optionally labelled."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray  # B x T x D, float64
    labels: Optional[np.ndarray] = None  # length B, dense in [0, C)
    class_names: Optional[list[str]] = None

    @model_validator(mode="after")
    def _check(self) -> "TimeSeriesBatch":
        if self.values.ndim != 3:
            raise ValueError(f"values must be B x T x D, got shape {self.values.shape}")
        if self.labels is not None:
            if self.labels.shape != (self.values.shape[0],):
                raise ValueError("labels must have one entry per window")
            if self.labels.size and self.labels.min() < 0:
                raise ValueError("labels must be non-negative")
        return self

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @property
    def D(self) -> int:
        return self.values.shape[2]

    @property
    def num_classes(self) -> int:
        if self.labels is None or self.labels.size == 0:
            return 0
        return int(self.labels.max()) + 1

    def take(self, indices: np.ndarray) -> "TimeSeriesBatch":
        return TimeSeriesBatch(
            values=self.values[indices],
            labels=None if self.labels is None else self.labels[indices],
            class_names=self.class_names,
        )


class SyntheticSpec(BaseModel):
    n_per_class: int = 500
    T: int = 128
    D: int = 3
    C: int = 4
    noise_sigma: float = 0.3
    cycles_base: float = 1.0
    seed: int = 1

    @model_validator(mode="after")
    def _check(self) -> "SyntheticSpec":
        if min(self.n_per_class, self.T, self.D) < 1:
            raise ValueError("n_per_class, T and D must be positive")
        if self.C < 2:
            raise ValueError("need at least 2 classes")
        if self.noise_sigma < 0 or self.cycles_base <= 0:
            raise ValueError("noise_sigma must be >= 0 and cycles_base > 0")
        return self
