from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class EncoderConfig(BaseModel):
    in_channels: int = 1
    channels: list[int] = [32, 64, 128]
    kernel_sizes: list[int] = [8, 5, 3]
    embed_dim: int = 64
    # scale on the Kaiming bound of dense.weight; keeps initial logits near-uniform at small tau
    embed_init_gain: float = 0.01
    projection_hidden: Optional[int] = None  # None = no projection head

    @model_validator(mode="after")
    def _check(self) -> "EncoderConfig":
        if len(self.channels) != len(self.kernel_sizes):
            raise ValueError("channels and kernel_sizes must have the same length")
        if not self.channels:
            raise ValueError("encoder needs at least one conv layer")
        if self.embed_dim < 1 or self.in_channels < 1:
            raise ValueError("embed_dim and in_channels must be >= 1")
        if any(c < 1 for c in self.channels) or any(k < 1 for k in self.kernel_sizes):
            raise ValueError("channel counts and kernel sizes must be >= 1")
        if self.embed_init_gain <= 0.0:
            raise ValueError(f"embed_init_gain must be > 0, got {self.embed_init_gain}")
        if self.projection_hidden is not None and self.projection_hidden < 1:
            raise ValueError("projection_hidden must be >= 1 when set")
        return self

    @property
    def num_layers(self) -> int:
        return len(self.channels)


class ModelParams(BaseModel):
    """Named float64 arrays of the encoder, in a stable insertion order."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(tensors={name: value.copy() for name, value in self.tensors.items()})

    def names(self) -> list[str]:
        return list(self.tensors)

    @property
    def has_head(self) -> bool:
        return "head.0.weight" in self.tensors

    def equals(self, other: "ModelParams") -> bool:
        """Bit-exact comparison."""
        if self.names() != other.names():
            return False
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.tensors.values(), other.tensors.values())
        )
