from pathlib import Path
from typing import Any, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..exceptions import ConfigError
from ..schemas import (
    EncoderConfig,
    LossConfig,
    OptimizerConfig,
    PartitionParams,
    PositiveMode,
    ProbeConfig,
    SplitMode,
)


class Settings(BaseSettings):
    app_name: str = "dicot"
    LOG_LEVEL: str = "INFO"
    # Largest (BT)^2 score matrix the timestep-level kernel may allocate
    BENCH_BUDGET_BYTES: int = 512 * 1024 * 1024
    # Windows per encoder call when embedding a dataset
    EVAL_CHUNK_SIZE: int = 256

    model_config = SettingsConfigDict(
        env_prefix="DICOT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


settings = Settings()


PRESETS: dict[str, dict[str, Any]] = {
    "large": {},
    "ucr": {"tau": 1.0, "seeds": [1]},
}


class RunConfig(BaseModel):
    """Flat run document shared by every subcommand."""
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = Field(None, description="ucr (tau=1, seed 1) or large")

    # partition
    rho: float = Field(0.5, description="overlap ratio between consecutive sub-blocks")
    split_mode: SplitMode = Field(SplitMode.uniform, description="uniform or fixed")
    k_min: int = Field(2, description="smallest sub-block count (uniform)")
    k_max: int = Field(10, description="largest sub-block count (uniform)")
    k_fixed: int = Field(10, description="sub-block count (fixed)")

    # objective
    tau: float = Field(0.07, description="contrastive temperature")
    positive_mode: PositiveMode = Field(
        PositiveMode.preceding, description="preceding, next, bidirectional or shuffled"
    )

    # encoder
    channels: list[int] = Field([32, 64, 128], description="conv output channels per layer")
    kernel_sizes: list[int] = Field([8, 5, 3], description="conv kernel size per layer")
    embed_dim: int = Field(64, description="embedding dimension F")
    embed_init_gain: float = Field(0.01, description="scale on the init bound of the output dense map")
    projection_hidden: int = Field(0, description="hidden width of the projection head, 0 = none")

    # optimizer
    base_lr: float = Field(3e-4, description="peak learning rate")
    weight_decay: float = Field(3e-4, description="decoupled weight decay")
    beta1: float = Field(0.9, description="AdamW first-moment decay")
    beta2: float = Field(0.99, description="AdamW second-moment decay")
    eps: float = Field(1e-8, description="AdamW epsilon")
    warmup_frac: float = Field(0.1, description="fraction of iterations with linear warmup")
    total_iters: int = Field(1500, description="pretraining iterations")
    batch_size: int = Field(128, description="windows per iteration")
    seed: int = Field(1, description="pretraining seed")

    # evaluation
    seeds: list[int] = Field([1, 2, 3, 4, 5], description="evaluation seeds")
    probe_lr: float = Field(1e-2, description="linear probe learning rate")
    probe_iters: int = Field(500, description="linear probe iterations")
    probe_l2: float = Field(1e-4, description="linear probe L2 penalty")
    kmeans_max_iter: int = Field(100, description="Lloyd iterations cap")

    @field_validator("channels", "kernel_sizes", "seeds", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(part) for part in value.split(",") if part.strip()]
        if isinstance(value, int):
            return [value]
        return value

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in PRESETS:
            raise ValueError(f"unknown preset {value!r}; choose from {sorted(PRESETS)}")
        return value

    def encoder_config(self, in_channels: int) -> EncoderConfig:
        return EncoderConfig(
            in_channels=in_channels,
            channels=self.channels,
            kernel_sizes=self.kernel_sizes,
            embed_dim=self.embed_dim,
            embed_init_gain=self.embed_init_gain,
            projection_hidden=self.projection_hidden or None,
        )

    def partition_params(self) -> PartitionParams:
        return PartitionParams(
            rho=self.rho,
            split_mode=self.split_mode,
            k=self.k_fixed,
            k_min=self.k_min,
            k_max=self.k_max,
            seed=self.seed,
        )

    def loss_config(self) -> LossConfig:
        return LossConfig(tau=self.tau, positive_mode=self.positive_mode)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            base_lr=self.base_lr,
            weight_decay=self.weight_decay,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            warmup_frac=self.warmup_frac,
            total_iters=self.total_iters,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def probe_config(self) -> ProbeConfig:
        return ProbeConfig(lr=self.probe_lr, iters=self.probe_iters, l2=self.probe_l2)


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a ``key = value`` file (``#`` comments) into lower-cased keys."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = dotenv_values(path)
    values: dict[str, Any] = {}
    for key, value in raw.items():
        if value is None:
            raise ConfigError(f"{path}: key {key!r} has no value")
        values[key.strip().lower()] = value.strip()
    return values


def load_run_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Build a RunConfig from preset < file < overrides.

    Overrides with a value of None are ignored so unset CLI flags never
    clobber file values.
    """
    values: dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key.lower()] = value

    preset = values.get("preset")
    merged = dict(PRESETS.get(str(preset), {})) if preset is not None else {}
    merged.update(values)
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        raise ConfigError(flatten_validation_error(exc)) from exc


def parse_assignments(assignments: list[str] | None) -> dict[str, str]:
    """Turn repeated ``--set key=value`` flags into a dict."""
    values: dict[str, str] = {}
    for item in assignments or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip().lower()] = value.strip()
    return values


def describe_config_keys() -> str:
    lines = ["Config keys (key = value, # comments; flags override the file):"]
    for name, field in RunConfig.model_fields.items():
        default = field.default
        if isinstance(default, list):
            default = ",".join(str(v) for v in default)
        elif hasattr(default, "value"):
            default = default.value
        lines.append(f"  {name:<18} default={default!s:<12} {field.description or ''}")
    return "\n".join(lines)


def flatten_validation_error(exc: ValidationError) -> str:
    # Same flattening as an API validation handler: "loc: msg; loc: msg"
    return "; ".join(
        f"{'.'.join(str(p) for p in e['loc']) or 'config'}: {e['msg']}" for e in exc.errors()
    ) or "Validation error"
