from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class EmbeddingMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray  # N x F
    labels: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def _check(self) -> "EmbeddingMatrix":
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError(f"embeddings must be N x F with N >= 1, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("embeddings contain non-finite entries")
        if self.labels is not None and self.labels.shape != (self.values.shape[0],):
            raise ValueError("labels must have one entry per row")
        return self

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def take(self, indices: np.ndarray) -> "EmbeddingMatrix":
        return EmbeddingMatrix(
            values=self.values[indices],
            labels=None if self.labels is None else self.labels[indices],
        )


class Standardization(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mean: np.ndarray
    std: np.ndarray


class ProbeConfig(BaseModel):
    lr: float = 1e-2
    iters: int = 500
    l2: float = 1e-4


class EvalRow(BaseModel):
    task: str
    metric: str
    value: float
    seed: str  # seed number or "mean"


class EvalReport(BaseModel):
    """Rows of one evaluation run plus the config it was run with."""
    task: str
    rows: list[EvalRow] = []
    config: dict = {}

    def add(self, metric: str, value: float, seed: int | str) -> None:
        self.rows.append(EvalRow(task=self.task, metric=metric, value=float(value), seed=str(seed)))

    def add_means(self) -> None:
        """Append one ``mean`` row per metric, averaging over the seeded rows."""
        metrics: dict[str, list[float]] = {}
        for row in self.rows:
            if row.seed != "mean":
                metrics.setdefault(row.metric, []).append(row.value)
        for metric, values in metrics.items():
            self.add(metric, float(np.mean(values)), "mean")
