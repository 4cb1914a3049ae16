"""
CSV artifacts: embeddings, evaluation reports, training logs and bench tables.

Floats are written with ``repr`` so a read-back is exact.
"""
import csv
import sys
from pathlib import Path
from typing import Iterable, Optional, TextIO

import numpy as np

from ..exceptions import FormatError
from ..schemas.bench import BenchPoint
from ..schemas.eval import EmbeddingMatrix, EvalReport
from ..schemas.trainer import TrainLog
from . import tensor_io

REPORT_HEADER = ["task", "metric", "value", "seed"]
TRAIN_LOG_HEADER = ["iter", "k", "lr", "loss", "k_eff"]
BENCH_HEADER = ["method", "B", "T", "k", "F", "median_seconds", "bytes"]


def _write_rows(path: Optional[str | Path], header: list[str], rows: Iterable[list], stream: Optional[TextIO] = None) -> None:
    """Write to ``path`` or, when it is None, to ``stream`` (stdout by default)."""
    if path is None:
        writer = csv.writer(stream or sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------- embeddings


def save_embeddings(emb: EmbeddingMatrix, path: str | Path) -> None:
    """Header ``f0..f{F-1},label``; the label cell is empty for unlabelled rows.

    A ``.bin`` suffix writes the named-tensor container instead.
    """
    path = Path(path)
    if path.suffix == ".bin":
        tensors = {"values": emb.values}
        if emb.labels is not None:
            tensors["labels"] = emb.labels.astype(np.float64)
        tensor_io.save_tensors(tensors, path)
        return
    header = [f"f{i}" for i in range(emb.values.shape[1])] + ["label"]
    labels = emb.labels if emb.labels is not None else [None] * emb.n
    rows = (
        [repr(float(v)) for v in row] + ["" if label is None else str(int(label))]
        for row, label in zip(emb.values, labels)
    )
    _write_rows(path, header, rows)


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    with path.open("rb") as fh:
        head = fh.read(8)
    if head == tensor_io.MODEL_MAGIC:
        tensors = tensor_io.load_tensors(path)
        if "values" not in tensors:
            raise FormatError(f"{path}: no 'values' tensor")
        labels = tensors.get("labels")
        return EmbeddingMatrix(
            values=tensors["values"],
            labels=None if labels is None else labels.astype(np.int64),
        )

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label" or any(h != f"f{i}" for i, h in enumerate(header[:-1])):
            raise FormatError(f"{path}: expected header f0..f{{F-1}},label")
        values, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} cells, found {len(row)}")
            try:
                values.append([float(cell) for cell in row[:-1]])
                labels.append(int(row[-1]) if row[-1] else None)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not values:
        raise FormatError(f"{path}: no embedding rows")
    if all(label is None for label in labels):
        label_array = None
    elif any(label is None for label in labels):
        raise FormatError(f"{path}: mix of labelled and unlabelled rows")
    else:
        label_array = np.array(labels, dtype=np.int64)
    matrix = np.array(values, dtype=np.float64)
    if not np.isfinite(matrix).all():
        raise FormatError(f"{path}: non-finite embedding values")
    return EmbeddingMatrix(values=matrix, labels=label_array)


# ---------------------------------------------------------------- tables


def report_rows(report: EvalReport) -> list[list[str]]:
    return [[row.task, row.metric, repr(row.value), row.seed] for row in report.rows]


def write_report(report: EvalReport, path: Optional[str | Path] = None, stream: Optional[TextIO] = None) -> None:
    _write_rows(path, REPORT_HEADER, report_rows(report), stream)


def write_train_log(log: TrainLog, path: str | Path) -> None:
    rows = ([r.iter, r.k, repr(r.lr), repr(r.loss), r.k_eff] for r in log.records)
    _write_rows(path, TRAIN_LOG_HEADER, rows)


def write_bench(points: list[BenchPoint], path: str | Path) -> None:
    rows = (
        [p.method.value, p.B, p.T, p.k, p.F, repr(p.median_seconds), p.bytes]
        for p in points
    )
    _write_rows(path, BENCH_HEADER, rows)
