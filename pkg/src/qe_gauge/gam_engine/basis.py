"""Design-block construction: cubic B-spline smooths and random-effect factors.

Smooths use k cubic B-splines on a knot vector whose boundary knots sit at
the covariate min/max, interior knots at the i/(k-3) quantiles, and three
extension knots continuing beyond each boundary (so the basis is not clamped
and sums to one across the whole data range).  The curvature penalty is the
second difference of the raw coefficient vector, which vanishes on linear
coefficient sequences; with (near-)uniform knot spacing its null space is
the affine functions, so heavy smoothing collapses a term to a straight line.

Every smooth carries a sum-to-zero constraint over the observed covariate
values, absorbed by projecting the raw k coefficients onto the (k-1)-dim
orthogonal complement of the constraint vector.  The intercept then remains
identifiable with any number of smooth terms in the model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import qr

DEGREE = 3


class BasisError(Exception):
    pass


class DegenerateRange(BasisError):
    def __init__(self, var: str = ""):
        super().__init__(f"covariate {var or '<unnamed>'} is constant: no usable range")


class TooFewDistinctValues(BasisError):
    def __init__(self, var: str, distinct: int, k: int):
        super().__init__(
            f"covariate {var or '<unnamed>'} has {distinct} distinct values, "
            f"basis size k={k} needs at least k"
        )


@dataclass
class SmoothBasis:
    """Centered spline design block for one covariate.

    ``B`` is n x (k-1) after the centering constraint; ``S`` the matching
    (k-1) x (k-1) penalty; ``penalty_sqrt`` a matrix E with E'E = S, used to
    augment the least-squares system.  ``knots`` is the full knot vector
    (k+4 entries), ``constraint_transform`` the k x (k-1) projection Z.
    """

    var: str
    knots: np.ndarray
    B: np.ndarray
    S: np.ndarray
    k: int
    penalty_sqrt: np.ndarray
    constraint_transform: np.ndarray
    x_min: float
    x_max: float
    diff_op: np.ndarray = field(repr=False, default=None)

    @property
    def n_coef(self) -> int:
        return self.B.shape[1]

    def evaluate(self, x, max_extrapolation: float = 0.0) -> np.ndarray:
        """Constrained design rows at new covariate values.

        Outside the training range the basis is continued linearly from the
        boundary (value and first derivative).  ``max_extrapolation`` is the
        allowed overshoot as a fraction of the training range.
        """
        x = np.asarray(x, dtype=np.float64)
        rng = self.x_max - self.x_min
        lo = self.x_min - max_extrapolation * rng
        hi = self.x_max + max_extrapolation * rng
        if np.any(x < lo) or np.any(x > hi):
            raise ValueError(
                f"covariate {self.var!r}: values outside the supported range "
                f"[{lo}, {hi}] (training range {self.x_min}..{self.x_max})"
            )
        raw = np.empty((x.shape[0], self.k))
        inside = (x >= self.x_min) & (x <= self.x_max)
        if np.any(inside):
            raw[inside] = BSpline.design_matrix(x[inside], self.knots, DEGREE).toarray()
        for bound, mask in ((self.x_min, x < self.x_min), (self.x_max, x > self.x_max)):
            if not np.any(mask):
                continue
            b0 = BSpline.design_matrix(np.array([bound]), self.knots, DEGREE).toarray()[0]
            d0 = np.array([
                BSpline(self.knots, np.eye(self.k)[j], DEGREE).derivative()(bound)
                for j in range(self.k)
            ])
            raw[mask] = b0[None, :] + (x[mask, None] - bound) * d0[None, :]
        return raw @ self.constraint_transform


def _quantile_knots(x: np.ndarray, k: int, var: str) -> tuple:
    """Full knot vector for k cubic basis functions; collapses tied quantiles."""
    lo = float(np.min(x))
    hi = float(np.max(x))
    probs = [i / (k - 3) for i in range(1, k - 3)]
    interior = np.quantile(x, probs) if probs else np.empty(0)
    interior = np.unique(interior)
    interior = interior[(interior > lo) & (interior < hi)]
    if interior.size < k - 4:
        warnings.warn(
            f"smooth {var!r}: tied quantiles collapsed {k - 4 - interior.size} knot(s); "
            f"effective basis size reduced from k={k} to k={interior.size + 4}",
            stacklevel=3,
        )
        k = interior.size + 4
    seq = np.concatenate([[lo], interior, [hi]])
    left = seq[1] - seq[0]
    right = seq[-1] - seq[-2]
    t = np.concatenate([lo - left * np.arange(3, 0, -1), seq, hi + right * np.arange(1, 4)])
    return t, k


def build_spline_basis(x, k: int, var: str = "") -> SmoothBasis:
    """Build the centered cubic spline block for covariate x with basis size k."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise ValueError("x must be a non-empty 1-d array")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"covariate {var!r} contains non-finite values")
    if k < 4:
        raise BasisError(f"cubic spline basis needs k >= 4, got k={k}")
    if np.min(x) == np.max(x):
        raise DegenerateRange(var)
    distinct = np.unique(x).size
    if distinct < k:
        raise TooFewDistinctValues(var, distinct, k)

    t, k = _quantile_knots(x, k, var)
    B_raw = BSpline.design_matrix(x, t, DEGREE).toarray()
    D = np.diff(np.eye(k), 2, axis=0)

    # absorb the sum-to-zero constraint: coefficients live in null(c'), c = B'1
    c = B_raw.sum(axis=0).reshape(-1, 1)
    Q, _ = qr(c, mode="full")
    Z = Q[:, 1:]
    E = D @ Z
    return SmoothBasis(
        var=var,
        knots=t,
        B=B_raw @ Z,
        S=E.T @ E,
        k=k,
        penalty_sqrt=E,
        constraint_transform=Z,
        x_min=float(np.min(x)),
        x_max=float(np.max(x)),
        diff_op=D,
    )


@dataclass
class RandomEffectBlock:
    """Indicator design for a factor with an identity (ridge) penalty.

    Level order is first-appearance order; each row of Z has exactly one 1.
    """

    factor: str
    levels: list
    Z: np.ndarray

    @property
    def n_coef(self) -> int:
        return len(self.levels)

    @property
    def penalty_sqrt(self) -> np.ndarray:
        return np.eye(self.n_coef)

    def rows_for(self, labels) -> np.ndarray:
        """Indicator rows for new observations; raises KeyError on unseen levels."""
        index = {lab: i for i, lab in enumerate(self.levels)}
        Z = np.zeros((len(labels), self.n_coef))
        for r, lab in enumerate(labels):
            Z[r, index[lab]] = 1.0
        return Z


def build_random_block(labels, factor: str = "") -> RandomEffectBlock:
    """One-hot design over the factor's levels in first-appearance order."""
    labels = [str(lab) for lab in labels]
    if not labels:
        raise ValueError("random-effect factor needs at least one observation")
    levels = []
    for lab in labels:
        if lab not in levels:
            levels.append(lab)
    block = RandomEffectBlock(factor=factor, levels=levels, Z=np.zeros((len(labels), len(levels))))
    index = {lab: i for i, lab in enumerate(levels)}
    for r, lab in enumerate(labels):
        block.Z[r, index[lab]] = 1.0
    return block
