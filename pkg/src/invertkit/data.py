"""Dataset tables: CSV I/O, synthetic sampling with uniform noise, decimation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expr import ExprVector, eval_array, parse_model, var_name
from .interval import Box


class TableError(ValueError):
    pass


@dataclass
class SignalTable:
    """Rectangular numeric table; the first ``n_inputs`` columns are inputs."""

    columns: list[str]
    rows: np.ndarray
    n_inputs: int

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.columns):
            raise TableError("row width does not match the header")
        if len(self.rows) < 2:
            raise TableError("a table needs at least 2 rows")
        if not np.all(np.isfinite(self.rows)):
            raise TableError("table contains non-finite values")
        if not 1 <= self.n_inputs < len(self.columns):
            raise TableError("need at least one input and one output column")

    @property
    def inputs(self) -> np.ndarray:
        return self.rows[:, : self.n_inputs]

    @property
    def outputs(self) -> np.ndarray:
        return self.rows[:, self.n_inputs :]

    def __len__(self) -> int:
        return len(self.rows)

    def dataset(self, output: int = 0):
        from .gp import Dataset

        return Dataset(self.inputs, self.outputs[:, output])


def _parse_rows(reader, n_inputs: int | None) -> SignalTable:
    try:
        header = next(reader)
    except StopIteration:
        raise TableError("missing header row") from None
    header = [h.strip() for h in header]
    if not header or any(h == "" for h in header):
        raise TableError("missing header row")
    for h in header:
        try:
            float(h)
        except ValueError:
            continue
        raise TableError("missing header row (first row is numeric)")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise TableError(f"row {lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise TableError(f"row {lineno}: non-numeric cell in {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise TableError(f"row {lineno}: non-finite cell in {row!r}")
        rows.append(vals)
    if len(rows) < 2:
        raise TableError(f"need at least 2 data rows, got {len(rows)}")
    n = len(header) - 1 if n_inputs is None else n_inputs
    return SignalTable(header, np.array(rows), n)


def load_csv(path, n_inputs: int | None = None) -> SignalTable:
    """Read a headed CSV; by default every column but the last is an input."""
    with open(path, newline="", encoding="utf-8") as fh:
        return _parse_rows(csv.reader(fh), n_inputs)


def dumps_csv(table: SignalTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def save_csv(table: SignalTable, path) -> None:
    Path(path).write_text(dumps_csv(table), encoding="utf-8")


def grid_points(box: Box, m: int) -> np.ndarray:
    """``m`` evenly spaced samples per axis, lexicographic with the last axis fastest."""
    axes = [np.linspace(lo, hi, m) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.reshape(-1) for g in mesh])


def synth(expr_text: str, box, m: int, noise_half_width: float = 0.0, seed: int = 0, mode: str = "grid") -> SignalTable:
    """Sample a model over ``box`` and add ``Uniform[-h, h]`` noise to each output.

    ``mode="grid"`` takes ``m`` points per axis; ``mode="random"`` draws the
    same number of points uniformly from the box.
    """
    box = Box(box)
    if m < 2:
        raise ValueError("m must be >= 2")
    if noise_half_width < 0:
        raise ValueError("noise half-width must be >= 0")
    model: ExprVector = parse_model(expr_text, box.dim)
    rng = np.random.default_rng(seed)
    if mode == "grid":
        X = grid_points(box, m)
    elif mode == "random":
        lo = np.array([iv.lo for iv in box])
        hi = np.array([iv.hi for iv in box])
        X = lo + (hi - lo) * rng.random((m**box.dim, box.dim))
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    Y = eval_array(model, X)
    bad = ~np.all(np.isfinite(Y), axis=1)
    if bad.any():
        pts = ", ".join(str(tuple(float(v) for v in p)) for p in X[bad][:5])
        raise ValueError(f"model is invalid at {int(bad.sum())} sample point(s): {pts}")
    if noise_half_width > 0:
        Y = Y + rng.uniform(-noise_half_width, noise_half_width, size=Y.shape)
    names = [var_name(k, box.dim) for k in range(box.dim)]
    outs = ["f"] if model.outputs == 1 else [f"f{k}" for k in range(model.outputs)]
    return SignalTable(names + outs, np.column_stack([X, Y]), box.dim)


def decimate(table: SignalTable, k: int) -> SignalTable:
    """Keep every ``k``-th row, always including the first and last."""
    if k < 1:
        raise ValueError("k must be >= 1")
    idx = list(range(0, len(table), k))
    if len(idx) < 2:
        raise TableError(f"decimation by {k} leaves fewer than 2 rows of {len(table)}")
    if idx[-1] != len(table) - 1:
        idx.append(len(table) - 1)
    return SignalTable(list(table.columns), table.rows[idx], table.n_inputs)
