from dicot.utils.compat import StrEnum

from pydantic import BaseModel, ConfigDict, field_validator


class PositiveMode(StrEnum):
    preceding = "preceding"
    next = "next"
    bidirectional = "bidirectional"
    shuffled = "shuffled"


class LossConfig(BaseModel):
    tau: float = 0.07
    positive_mode: PositiveMode = PositiveMode.preceding

    @field_validator("tau")
    @classmethod
    def _positive_tau(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"tau must be > 0, got {value}")
        return value


class TargetVector(BaseModel):
    """Positive index per anchor, one row per loss term.

    Bidirectional mode carries two rows (preceding, next); every other mode one.
    """
    model_config = ConfigDict(frozen=True)

    mode: PositiveMode
    rows: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.rows[0])
