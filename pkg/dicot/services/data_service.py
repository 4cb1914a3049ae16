"""
Dataset ingestion, conversion and the synthetic phase-randomised corpus.

Loaders never rescale values; standardisation is an explicit evaluation step.
"""
import logging
import struct
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from ..exceptions import ConfigError, FormatError
from ..schemas.data import SyntheticSpec, TimeSeriesBatch

logger = logging.getLogger(__name__)

DATA_MAGIC = b"DICOTD1\0"
_HEADER = struct.Struct("<IIII")


# ---------------------------------------------------------------- UCR text


def _parse_ucr_lines(lines: Iterable[str], source: str) -> tuple[list[str], list[np.ndarray]]:
    raw_labels: list[str] = []
    rows: list[np.ndarray] = []
    width: Optional[int] = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        tokens = [tok.strip() for tok in (line.split("\t") if "\t" in line else line.split(","))]
        if len(tokens) < 2:
            raise FormatError(f"{source}:{lineno}: expected a label followed by values")
        try:
            values = np.array([float(tok) for tok in tokens[1:]], dtype=np.float64)
            float(tokens[0])
        except ValueError as exc:
            raise FormatError(f"{source}:{lineno}: unparsable token ({exc})") from exc
        if not np.isfinite(values).all():
            raise FormatError(f"{source}:{lineno}: missing or non-finite value")
        if width is None:
            width = values.size
        elif values.size != width:
            raise FormatError(f"{source}:{lineno}: row has {values.size} values, expected {width}")
        raw_labels.append(tokens[0])
        rows.append(values)
    if not rows:
        raise FormatError(f"{source}: no data rows")
    return raw_labels, rows


def _label_map(raw_labels: Iterable[str]) -> dict[str, int]:
    """Dense ids in sorted numeric order of the original labels."""
    unique = sorted(set(raw_labels), key=lambda tok: (float(tok), tok))
    mapping: dict[str, int] = {}
    seen: dict[float, int] = {}
    for tok in unique:
        value = float(tok)  # "1" and "1.0" are the same class
        if value not in seen:
            seen[value] = len(seen)
        mapping[tok] = seen[value]
    return mapping


def _class_names(mapping: dict[str, int]) -> list[str]:
    names: dict[int, str] = {}
    for tok, idx in mapping.items():
        names.setdefault(idx, tok)
    return [names[i] for i in range(len(names))]


def load_ucr_tsv(path: str | Path) -> TimeSeriesBatch:
    """Read a UCR archive file: one window per line, label first, tab or comma separated."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    raw_labels, rows = _parse_ucr_lines(path.read_text().splitlines(), str(path))
    mapping = _label_map(raw_labels)
    labels = np.array([mapping[tok] for tok in raw_labels], dtype=np.int64)
    values = np.stack(rows)[:, :, None]
    logger.info("loaded %s: N=%d T=%d C=%d", path.name, values.shape[0], values.shape[1], len(set(labels)))
    return TimeSeriesBatch(values=values, labels=labels, class_names=_class_names(mapping))


def load_ucr_pair(train_path: str | Path, test_path: str | Path) -> tuple[TimeSeriesBatch, TimeSeriesBatch]:
    """Load the archive's provided train/test split with one shared label mapping."""
    parsed = []
    for path in (Path(train_path), Path(test_path)):
        if not path.is_file():
            raise FormatError(f"file not found: {path}")
        parsed.append(_parse_ucr_lines(path.read_text().splitlines(), str(path)))
    if parsed[0][1][0].size != parsed[1][1][0].size:
        raise FormatError("train and test windows differ in length")
    mapping = _label_map(parsed[0][0] + parsed[1][0])
    names = _class_names(mapping)
    return tuple(
        TimeSeriesBatch(
            values=np.stack(rows)[:, :, None],
            labels=np.array([mapping[tok] for tok in raw], dtype=np.int64),
            class_names=names,
        )
        for raw, rows in parsed
    )


def save_ucr_tsv(batch: TimeSeriesBatch, path: str | Path) -> None:
    """Write a univariate batch in the UCR tab-separated layout."""
    if batch.D != 1:
        raise ConfigError(f"UCR text output is univariate, batch has D={batch.D}")
    labels = batch.labels if batch.labels is not None else np.zeros(batch.n, dtype=np.int64)
    lines = [
        "\t".join([str(int(label))] + [repr(float(v)) for v in row[:, 0]])
        for label, row in zip(labels, batch.values)
    ]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- binary


def encode_binary(batch: TimeSeriesBatch) -> bytes:
    labels = batch.labels if batch.labels is not None else np.full(batch.n, -1, dtype=np.int64)
    header = DATA_MAGIC + _HEADER.pack(batch.n, batch.T, batch.D, batch.num_classes)
    return (
        header
        + np.ascontiguousarray(batch.values, dtype="<f4").tobytes()
        + np.ascontiguousarray(labels, dtype="<i4").tobytes()
    )


def decode_binary(blob: bytes, source: str = "<bytes>") -> TimeSeriesBatch:
    if len(blob) < 8 or blob[:8] != DATA_MAGIC:
        raise FormatError(f"{source}: bad magic, not a dicot dataset")
    if len(blob) < 8 + _HEADER.size:
        raise FormatError(f"{source}: truncated header")
    n, T, D, C = _HEADER.unpack_from(blob, 8)
    n_values = n * T * D
    expected = 8 + _HEADER.size + 4 * n_values + 4 * n
    if len(blob) != expected:
        raise FormatError(f"{source}: expected {expected} bytes, found {len(blob)}")
    offset = 8 + _HEADER.size
    values = np.frombuffer(blob, dtype="<f4", count=n_values, offset=offset).astype(np.float64)
    labels = np.frombuffer(blob, dtype="<i4", count=n, offset=offset + 4 * n_values).astype(np.int64)
    if not np.isfinite(values).all():
        raise FormatError(f"{source}: dataset contains non-finite values")
    if (labels < 0).all():
        labels_out = None
    elif (labels < 0).any():
        raise FormatError(f"{source}: mix of labelled and unlabelled windows")
    else:
        if C and labels.max() >= C:
            raise FormatError(f"{source}: label {labels.max()} outside [0, {C})")
        labels_out = labels
    return TimeSeriesBatch(values=values.reshape(n, T, D), labels=labels_out)


def save_binary(batch: TimeSeriesBatch, path: str | Path) -> None:
    Path(path).write_bytes(encode_binary(batch))


def load_binary(path: str | Path) -> TimeSeriesBatch:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    return decode_binary(path.read_bytes(), str(path))


def load_dataset(path: str | Path) -> TimeSeriesBatch:
    """Dispatch on file content: binary magic, otherwise UCR text."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    with path.open("rb") as fh:
        head = fh.read(8)
    return load_binary(path) if head == DATA_MAGIC else load_ucr_tsv(path)


def select_channels(batch: TimeSeriesBatch, channels: list[int]) -> TimeSeriesBatch:
    """Keep the given channels in the given order (e.g. a shared accelerometer subspace)."""
    if not channels:
        raise ConfigError("channel selection is empty")
    bad = [c for c in channels if not 0 <= c < batch.D]
    if bad:
        raise ConfigError(f"channel indices {bad} outside [0, {batch.D})")
    return TimeSeriesBatch(
        values=np.ascontiguousarray(batch.values[:, :, channels]),
        labels=batch.labels,
        class_names=batch.class_names,
    )


# ---------------------------------------------------------------- synthetic


def gen_synthetic(spec: SyntheticSpec) -> TimeSeriesBatch:
    """Class c oscillates at (c+1) * cycles_base cycles per window, with a random phase per window.

    Windows are ordered class by class; all channels share the window's phase
    and receive independent Gaussian noise.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_per_class * spec.C
    t = np.arange(spec.T, dtype=np.float64)
    labels = np.repeat(np.arange(spec.C, dtype=np.int64), spec.n_per_class)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    freq = (labels + 1) * spec.cycles_base
    clean = np.sin(2.0 * np.pi * freq[:, None] * t[None, :] / spec.T + phases[:, None])
    values = np.repeat(clean[:, :, None], spec.D, axis=2)
    if spec.noise_sigma > 0:
        values = values + rng.normal(0.0, spec.noise_sigma, size=values.shape)
    return TimeSeriesBatch(values=values, labels=labels, class_names=[str(c) for c in range(spec.C)])
