"""
Named-tensor container used for model files and binary embedding exports.

Layout (all little-endian):
    magic     8 bytes  b"DICOTM1\\0"
    count     u32      number of tensors
    per tensor:
        name_len  u16, name (UTF-8)
        rank      u8, extents u32 * rank
        values    float64 * prod(extents), row-major
"""
import struct
from pathlib import Path

import numpy as np

from ..exceptions import FormatError
from ..schemas.encoder import ModelParams

MODEL_MAGIC = b"DICOTM1\0"


def encode_tensors(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MODEL_MAGIC, struct.pack("<I", len(tensors))]
    for name, value in tensors.items():
        raw_name = name.encode("utf-8")
        value = np.asarray(value, dtype="<f8")
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<B", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(np.ascontiguousarray(value).tobytes())
    return b"".join(parts)


def decode_tensors(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:8] != MODEL_MAGIC:
        raise FormatError("bad magic: not a dicot model file")
    offset = 8

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise FormatError(f"truncated model file at byte {offset}")
        chunk = blob[offset:offset + n]
        offset += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        try:
            name = take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("tensor name is not valid UTF-8") from exc
        (rank,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(shape, dtype=np.int64)) if rank else 1
        values = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
        tensors[name] = values
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes after the last tensor")
    return tensors


def save_tensors(tensors: dict[str, np.ndarray], path: str | Path) -> None:
    Path(path).write_bytes(encode_tensors(tensors))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    return decode_tensors(path.read_bytes())


def save_model(params: ModelParams, path: str | Path) -> None:
    save_tensors(params.tensors, path)


def load_model(path: str | Path) -> ModelParams:
    return ModelParams(tensors=load_tensors(path))
