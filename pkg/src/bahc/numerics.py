"""Linear-algebra and special-function kernels.

Symmetric matrices are plain 2-D :class:`numpy.ndarray` objects; index sets
are sorted tuples of ints.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence

import numpy as np
from scipy.linalg import lapack
from scipy.special import gammaln

from .errors import (
    DegenerateVarianceError,
    InvalidArgumentError,
    InvalidDegreesOfFreedomError,
    NotPositiveDefiniteError,
)

__all__ = [
    "ScatterInput",
    "as_symmetric",
    "cov_to_corr",
    "index_set",
    "log_det_pd",
    "log_z",
    "restrict",
    "scatter_from_data",
]

ScatterKind = Literal["cov", "corr"]

# relative pivot threshold for declaring a matrix non positive definite
PIVOT_RTOL = 1e-12
_SYM_RTOL = 1e-10


def as_symmetric(m, *, rtol: float = _SYM_RTOL) -> np.ndarray:
    """Return `m` as a float array with bitwise-equal mirrored entries.

    Small asymmetries (relative to the largest entry) are averaged out; larger
    ones raise :class:`InvalidArgumentError`.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidArgumentError(f"expected a non-empty square matrix, got shape {a.shape}")
    scale = max(float(np.max(np.abs(a))), 1.0)
    if np.max(np.abs(a - a.T)) > rtol * scale:
        raise InvalidArgumentError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def index_set(indices: Iterable[int], dim: Optional[int] = None) -> tuple[int, ...]:
    """Validate and normalize a collection of variable indices."""
    idx = tuple(sorted(int(i) for i in indices))
    if not idx:
        raise InvalidArgumentError("index set must be non-empty")
    if len(set(idx)) != len(idx):
        raise InvalidArgumentError(f"duplicate indices in {idx}")
    if idx[0] < 0 or (dim is not None and idx[-1] >= dim):
        raise InvalidArgumentError(f"indices {idx} out of range for dimension {dim}")
    return idx


def restrict(m: np.ndarray, idx: Sequence[int]) -> np.ndarray:
    """Principal submatrix of `m` on the rows/columns listed in `idx`."""
    m = np.asarray(m)
    sel = index_set(idx, m.shape[0])
    return m[np.ix_(sel, sel)]


def log_det_pd(m: np.ndarray) -> float:
    """Log-determinant of a symmetric positive definite matrix via Cholesky.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is non-positive or below ``1e-12 * max(diag(m))``; the
        exception's ``pivot`` attribute holds the zero-based failing index.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 1:
        v = float(a[0, 0])
        if not v > 0.0:
            raise NotPositiveDefiniteError(f"non-positive pivot {v!r} at index 0", 0)
        return math.log(v)
    chol, info = lapack.dpotrf(a, lower=1, clean=0, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(f"Cholesky failed at pivot {info - 1}", info - 1)
    if info < 0:
        raise InvalidArgumentError(f"LAPACK dpotrf rejected argument {-info}")
    pivots = np.diagonal(chol) ** 2
    floor = PIVOT_RTOL * float(np.max(np.diagonal(a)))
    bad = np.flatnonzero(pivots < floor)
    if bad.size:
        k = int(bad[0])
        raise NotPositiveDefiniteError(
            f"pivot {pivots[k]:.3e} at index {k} below tolerance {floor:.3e}", k
        )
    return 2.0 * float(np.sum(np.log(np.diagonal(chol))))


def log_z(d: int, n: float) -> float:
    """Log of the Wishart normalizer ``Z(d, n)``.

    ``ln Z = (n d / 2) ln 2 + d (d - 1) / 4 ln(pi) + sum_{k=1..d} lnGamma((n + 1 - k) / 2)``.
    """
    d = int(d)
    if d < 1:
        raise InvalidArgumentError(f"dimension must be positive, got {d}")
    if not n > d - 1:
        raise InvalidDegreesOfFreedomError(f"need n > d - 1, got n={n}, d={d}")
    k = np.arange(1, d + 1)
    return (
        0.5 * n * d * math.log(2.0)
        + 0.25 * d * (d - 1) * math.log(math.pi)
        + float(np.sum(gammaln(0.5 * (n + 1 - k))))
    )


def cov_to_corr(m: np.ndarray) -> np.ndarray:
    """Rescale a covariance (or scatter) matrix to unit diagonal."""
    a = as_symmetric(m)
    diag = np.diagonal(a)
    if np.any(~(diag > 0.0)):
        bad = int(np.flatnonzero(~(diag > 0.0))[0])
        raise DegenerateVarianceError(f"non-positive variance at index {bad}")
    sd = np.sqrt(diag)
    r = a / np.outer(sd, sd)
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


@dataclass(frozen=True)
class ScatterInput:
    """Sum-of-squares matrix together with its sample count.

    Parameters
    ----------
    s : ndarray
        Symmetric positive semidefinite scatter matrix ``S``.
    n_samples : int
        Number of observations ``N`` behind ``S``.
    mean_known : bool
        If False, ``S`` was centered on the sample mean and every downstream
        formula uses ``N - 1`` degrees of freedom.
    kind : {"cov", "corr"}
        ``"corr"`` means ``s == n_eff * R`` with ``R`` unit-diagonal.
    """

    s: np.ndarray
    n_samples: int
    mean_known: bool = False
    kind: ScatterKind = "cov"

    def __post_init__(self):
        s = as_symmetric(self.s)
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise InvalidArgumentError(f"n_samples must be a positive integer, got {self.n_samples}")
        if self.kind not in ("cov", "corr"):
            raise InvalidArgumentError(f"unknown scatter kind {self.kind!r}")
        n_eff = self.n_samples if self.mean_known else self.n_samples - 1
        if n_eff < 1:
            raise InvalidArgumentError("mean-unknown scatter needs at least 2 samples")
        if np.any(np.diagonal(s) < 0.0):
            raise InvalidArgumentError("scatter matrix has a negative diagonal entry")
        scale = max(float(np.max(np.diagonal(s))), 1e-300)
        if float(np.linalg.eigvalsh(s)[0]) < -1e-10 * scale:
            raise InvalidArgumentError("scatter matrix is not positive semidefinite")
        if self.kind == "corr" and np.max(np.abs(np.diagonal(s) / n_eff - 1.0)) > 1e-12:
            raise InvalidArgumentError("correlation-scale scatter must equal n_eff times a unit-diagonal matrix")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def dim(self) -> int:
        return self.s.shape[0]

    @property
    def n_eff(self) -> int:
        return self.n_samples if self.mean_known else self.n_samples - 1

    @property
    def sample_cov(self) -> np.ndarray:
        return self.s / self.n_eff

    @classmethod
    def from_covariance(cls, cov, n_samples: int, mean_known: bool = False) -> "ScatterInput":
        n_eff = n_samples if mean_known else n_samples - 1
        return cls(n_eff * as_symmetric(cov), n_samples, mean_known, "cov")

    @classmethod
    def from_correlation(cls, corr, n_samples: int, mean_known: bool = False) -> "ScatterInput":
        n_eff = n_samples if mean_known else n_samples - 1
        r = as_symmetric(corr)
        if np.max(np.abs(np.diagonal(r) - 1.0)) > 1e-12:
            raise InvalidArgumentError("correlation matrix must have unit diagonal")
        np.fill_diagonal(r, 1.0)
        return cls(n_eff * r, n_samples, mean_known, "corr")

    def to_correlation(self) -> "ScatterInput":
        """Correlation-scale version ``n_eff * R_hat`` of this scatter."""
        if self.kind == "corr":
            return self
        return ScatterInput.from_correlation(cov_to_corr(self.s), self.n_samples, self.mean_known)

    def correlation(self) -> np.ndarray:
        return cov_to_corr(self.s)


def scatter_from_data(rows, mean_known: bool = False, mu=None) -> ScatterInput:
    """Build the scatter matrix of a data set (observations in rows).

    With ``mean_known`` the rows are centered on `mu`; otherwise on the sample
    mean, and the result carries ``N - 1`` effective degrees of freedom.
    """
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D array of observations, got shape {x.shape}")
    n, d = x.shape
    if mean_known:
        if mu is None:
            raise InvalidArgumentError("mu is required when mean_known is set")
        center = np.asarray(mu, dtype=float)
        if center.shape != (d,):
            raise InvalidArgumentError(f"mu has shape {center.shape}, expected ({d},)")
        if n < 1:
            raise InvalidArgumentError("need at least one observation")
    else:
        if mu is not None:
            raise InvalidArgumentError("mu must not be given when the mean is unknown")
        if n < 2:
            raise InvalidArgumentError("need at least two observations when the mean is unknown")
        center = x.mean(axis=0)
    xc = x - center
    return ScatterInput(xc.T @ xc, n, bool(mean_known), "cov")
