import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class OptimizerConfig(BaseModel):
    base_lr: float = 3e-4
    weight_decay: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    warmup_frac: float = 0.10
    total_iters: int = 1500
    batch_size: int = 128
    seed: int = 1

    @model_validator(mode="after")
    def _check(self) -> "OptimizerConfig":
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if not self.base_lr > 0:
            raise ValueError(f"base_lr must be > 0, got {self.base_lr}")
        if not 0 <= self.warmup_frac < 1:
            raise ValueError(f"warmup_frac must lie in [0, 1), got {self.warmup_frac}")
        if self.total_iters < 0 or self.batch_size < 1:
            raise ValueError("total_iters must be >= 0 and batch_size >= 1")
        if self.weight_decay < 0 or self.eps <= 0:
            raise ValueError("weight_decay must be >= 0 and eps > 0")
        return self


class OptimizerState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    m: dict[str, np.ndarray] = Field(default_factory=dict)
    v: dict[str, np.ndarray] = Field(default_factory=dict)
    t: int = 0


class TrainRecord(BaseModel):
    iter: int
    k: int  # sampled
    k_eff: int
    lr: float
    loss: float


class TrainLog(BaseModel):
    records: list[TrainRecord] = Field(default_factory=list)
    wall_seconds: float = 0.0
    resamples: int = 0

    def losses(self) -> list[float]:
        return [r.loss for r in self.records]
