"""Descriptive statistics: Pearson correlations over metric columns."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


class StatsError(Exception):
    pass


class LengthMismatch(StatsError):
    pass


class DegenerateInput(StatsError):
    def __init__(self, column: Optional[str] = None):
        self.column = column
        name = f" {column!r}" if column else ""
        super().__init__(f"constant column{name}: correlation undefined")


class MetricFrame:
    """Column-oriented table of real-valued metrics, plus optional factor columns.

    Real columns admit no NaN/inf.  Factor columns (string labels) are only
    consumed by model fitting, never by correlations.
    """

    def __init__(self, columns: Sequence[tuple], factors: Sequence[tuple] = ()):
        if not columns and not factors:
            raise ValueError("frame needs at least one column")
        self._cols = {}
        self._factors = {}
        self.names = []
        n_rows = None
        for name, values in columns:
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"column {name!r} must be 1-d")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"column {name!r} contains NaN or infinite values")
            if n_rows is None:
                n_rows = arr.shape[0]
            elif arr.shape[0] != n_rows:
                raise LengthMismatch(f"column {name!r} has {arr.shape[0]} rows, expected {n_rows}")
            if name in self._cols:
                raise ValueError(f"duplicate column {name!r}")
            self._cols[name] = arr
            self.names.append(name)
        for name, labels in factors:
            labels = [str(v) for v in labels]
            if n_rows is None:
                n_rows = len(labels)
            elif len(labels) != n_rows:
                raise LengthMismatch(f"factor {name!r} has {len(labels)} rows, expected {n_rows}")
            if name in self._cols or name in self._factors:
                raise ValueError(f"duplicate column {name!r}")
            self._factors[name] = labels
        if n_rows is None or n_rows < 1:
            raise ValueError("frame must have at least one row")
        self.n_rows = n_rows

    def column(self, name: str) -> np.ndarray:
        return self._cols[name]

    def has_column(self, name: str) -> bool:
        return name in self._cols

    def factor(self, name: str) -> list:
        return self._factors[name]

    def has_factor(self, name: str) -> bool:
        return name in self._factors

    @property
    def factor_names(self) -> list:
        return list(self._factors)


class CorrelationMatrix:
    """Symmetric Pearson correlation matrix with unit diagonal."""

    def __init__(self, names: Sequence[str], r: np.ndarray):
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (len(names), len(names)):
            raise ValueError("matrix shape disagrees with name count")
        if np.max(np.abs(r - r.T), initial=0.0) > 1e-15:
            raise ValueError("matrix is not symmetric")
        if np.max(np.abs(np.diag(r) - 1.0), initial=0.0) > 1e-12:
            raise ValueError("diagonal is not 1")
        self.names = list(names)
        self.r = r


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length samples."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"lengths differ: {a.shape} vs {b.shape}")
    if a.shape[0] < 2:
        raise DegenerateInput()
    da = a - np.sum(a) / a.shape[0]
    db = b - np.sum(b) / b.shape[0]
    sa = float(np.sum(da * da))
    sb = float(np.sum(db * db))
    if sa == 0.0 or sb == 0.0:
        raise DegenerateInput()
    r = float(np.sum(da * db)) / np.sqrt(sa * sb)
    return min(1.0, max(-1.0, r))


def correlation_matrix(frame: MetricFrame) -> CorrelationMatrix:
    """Pairwise Pearson correlations of every real column in the frame."""
    names = frame.names
    p = len(names)
    r = np.eye(p)
    for i in range(p):
        for j in range(i + 1, p):
            try:
                rij = pearson(frame.column(names[i]), frame.column(names[j]))
            except DegenerateInput:
                # re-raise with the offending column named
                ci = frame.column(names[i])
                bad = names[i] if float(np.ptp(ci)) == 0.0 else names[j]
                raise DegenerateInput(bad) from None
            r[i, j] = rij
            r[j, i] = rij
    return CorrelationMatrix(names, r)


def listwise_frame(columns: Sequence[tuple], factors: Sequence[tuple] = ()) -> tuple:
    """Build a MetricFrame after listwise deletion of incomplete rows.

    A row is dropped when any real column holds None or a non-finite value.
    Returns (frame, n_dropped); the effective n is frame.n_rows.
    """
    arrays = []
    for name, values in columns:
        arr = np.array([np.nan if v is None else float(v) for v in values], dtype=np.float64)
        arrays.append((name, arr))
    n = arrays[0][1].shape[0] if arrays else len(factors[0][1])
    keep = np.ones(n, dtype=bool)
    for _, arr in arrays:
        if arr.shape[0] != n:
            raise LengthMismatch("columns have unequal lengths")
        keep &= np.isfinite(arr)
    kept_cols = [(name, arr[keep]) for name, arr in arrays]
    kept_factors = [(name, [lab for lab, k in zip(labels, keep) if k])
                    for name, labels in factors]
    frame = MetricFrame(kept_cols, kept_factors)
    return frame, int(n - keep.sum())


def matrix_to_tsv(cm: CorrelationMatrix) -> str:
    """Names header plus one row per variable, floats at 17 significant digits."""
    lines = ["\t".join([""] + cm.names)]
    for i, name in enumerate(cm.names):
        lines.append("\t".join([name] + [format(v, ".17g") for v in cm.r[i]]))
    return "\n".join(lines) + "\n"


def matrix_to_long_csv(cm: CorrelationMatrix, n: int) -> str:
    """Long-form (name_i, name_j, r, n) rows for plotting tools."""
    lines = ["name_i,name_j,r,n"]
    for i, ni in enumerate(cm.names):
        for j, nj in enumerate(cm.names):
            lines.append(f"{ni},{nj},{format(cm.r[i, j], '.17g')},{n}")
    return "\n".join(lines) + "\n"
