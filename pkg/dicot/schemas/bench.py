from dicot.utils.compat import StrEnum

from pydantic import BaseModel, Field


class BenchMethod(StrEnum):
    dicot = "dicot"
    timestep = "timestep"


class BenchPoint(BaseModel):
    method: BenchMethod
    B: int
    T: int
    k: int
    F: int
    median_seconds: float = Field(gt=0)
    bytes: int
    # (max - min) / median of the timed repeats
    spread: float = 0.0


class SkippedCell(BaseModel):
    method: BenchMethod
    B: int
    T: int
    reason: str


class SweepConfig(BaseModel):
    T_values: list[int] = [64, 128, 256, 512]
    B_values: list[int] = [8, 16, 32, 64]
    k: int = 10
    F: int = 64
    tau: float = 0.07
    repeats: int = Field(default=5, ge=5)
    float32: bool = False
    seed: int = 1
    budget_bytes: int = 512 * 1024 * 1024


class ScalingResult(BaseModel):
    points: list[BenchPoint] = []
    skipped: list[SkippedCell] = []
    # method -> B -> slope of log(time) vs log(T)
    slope_vs_T: dict[str, dict[int, float]] = {}
    # T -> slope of log(dicot time) vs log(B)
    dicot_slope_vs_B: dict[int, float] = {}
    unstable: list[BenchPoint] = []
