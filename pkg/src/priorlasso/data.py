"""Datasets and CSV input/output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

INTERCEPT_NAME = "(intercept)"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response ``y`` (n) and design ``X`` (n x p) with column metadata.

    When ``has_intercept_column`` is true, column 0 of ``X`` is the constant
    column and is left out of the L1 budget.
    """

    y: np.ndarray
    X: np.ndarray
    column_names: tuple = None
    has_intercept_column: bool = False
    response_name: str = "y"

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        X = np.array(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise DataError(f"design has shape {X.shape} but response has {y.size} entries")
        if y.size < 1 or X.shape[1] < 1:
            raise DataError("dataset needs at least one row and one column")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("dataset contains non-finite values")
        names = self.column_names
        if names is None:
            names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
        names = tuple(str(n) for n in names)
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} column names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        if self.has_intercept_column and not np.all(X[:, 0] == 1.0):
            raise DataError("has_intercept_column is set but column 0 is not constant 1")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.y[rows], self.X[rows], self.column_names,
                       self.has_intercept_column, self.response_name)

    def with_intercept_column(self):
        if self.has_intercept_column:
            return self
        X = np.hstack([np.ones((self.n, 1)), self.X])
        return Dataset(self.y, X, (INTERCEPT_NAME,) + self.column_names, True, self.response_name)


def read_csv(path, response_column: str) -> Dataset:
    """Read a headed numeric CSV; ``response_column`` becomes ``y``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if response_column not in header:
            raise DataError(f"{path}: response column {response_column!r} not found; columns are {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not cell.strip() for cell in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: line {lineno} has {len(rec)} fields, expected {len(header)}")
            vals = []
            for name, cell in zip(header, rec):
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise DataError(f"{path}: line {lineno}, column {name!r}: non-numeric or non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    M = np.array(rows)
    ri = header.index(response_column)
    keep = [j for j in range(len(header)) if j != ri]
    if not keep:
        raise DataError(f"{path}: no predictor columns besides {response_column!r}")
    return Dataset(M[:, ri], M[:, keep], tuple(header[j] for j in keep), response_name=response_column)


def write_csv(dataset: Dataset, path) -> None:
    names = [n for n in dataset.column_names if n != INTERCEPT_NAME]
    cols = [j for j, n in enumerate(dataset.column_names) if n != INTERCEPT_NAME]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([dataset.response_name] + names)
        for i in range(dataset.n):
            w.writerow([repr(float(dataset.y[i]))] + [repr(float(dataset.X[i, j])) for j in cols])
