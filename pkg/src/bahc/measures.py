"""Pairwise cluster-similarity measures.

The Bayesian measures compare, for two disjoint clusters ``i`` and ``j``, the
marginal likelihood of the joint scatter ``S_{i u j}`` under a model with an
unrestricted covariance (dependence) against a block-diagonal one
(independence), with conjugate inverse-Wishart priors derived from a single
global prior ``IW(nu, Lambda)``.  The log Bayes factor is written through

    phi(n, A) = -n/2 ln|A| + sum_{d=1..dim A} lnGamma((n + 1 - d) / 2)
    dphi_k    = phi(n + nu_k, Lambda_k + S_k) - phi(nu_k, Lambda_k)
    s(i, j)   = dphi_{i u j} - dphi_i - dphi_j

with ``nu_k = nu - D + D_k``.  Mutual-information and correlation-linkage
measures are provided as baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import (
    ConfigurationError,
    DegenerateNormalizerError,
    DegenerateVarianceError,
    InvalidArgumentError,
    InvalidDegreesOfFreedomError,
    NotPositiveDefiniteError,
    SmallSampleError,
    UnsupportedMeasureError,
)
from .numerics import ScatterInput, cov_to_corr, index_set, log_det_pd, log_z, restrict
from .partition import Partition

__all__ = [
    "Hyperparams",
    "Measure",
    "SimilaritySpec",
    "SimilarityValue",
    "bayes_similarity",
    "bic_similarity",
    "evaluate",
    "linkage_similarity",
    "make_hyper_bayescorr",
    "make_hyper_bayescov",
    "make_hyper_precision",
    "mutual_info_plugin",
    "normalized_mutual_info",
    "partition_log_marginal",
    "phi",
    "precision_similarity",
]

Variant = Literal["cov", "corr", "precision"]


class Measure(str, Enum):
    BAYES_COV = "BayesCov"
    BAYES_CORR = "BayesCorr"
    BIC = "Bic"
    BAYES_PREC = "BayesPrec"
    INFOMUT = "Infomut"
    INFOMUT_NORM = "InfomutNorm"
    LINK_SINGLE = "LinkSingle"
    LINK_AVERAGE = "LinkAverage"
    LINK_COMPLETE = "LinkComplete"
    LINK_WARD = "LinkWard"

    @property
    def is_bayesian(self) -> bool:
        return self in (Measure.BAYES_COV, Measure.BAYES_CORR, Measure.BAYES_PREC)

    @property
    def is_linkage(self) -> bool:
        return self.value.startswith("Link")

    @property
    def has_log_bf(self) -> bool:
        """True when step similarities are (approximate) log Bayes factors."""
        return self.is_bayesian or self is Measure.BIC


@dataclass(frozen=True)
class Hyperparams:
    """Global inverse-Wishart prior ``IW(nu, diag(lambda_diag))``.

    For the precision variant the Wishart prior on the concentration matrix
    uses scale ``Omega = omega_scale * Lambda^{-1}``.
    """

    nu: float
    lambda_diag: tuple[float, ...]
    variant: Variant = "cov"
    omega_scale: Optional[float] = None

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambda_diag)
        object.__setattr__(self, "lambda_diag", lam)
        if not lam:
            raise InvalidArgumentError("lambda_diag must be non-empty")
        if not all(x > 0.0 and math.isfinite(x) for x in lam):
            raise InvalidArgumentError("all lambda_diag entries must be positive and finite")
        if not self.nu > len(lam) - 1:
            raise InvalidDegreesOfFreedomError(f"nu={self.nu} must exceed D - 1 = {len(lam) - 1}")
        if self.variant not in ("cov", "corr", "precision"):
            raise InvalidArgumentError(f"unknown variant {self.variant!r}")
        if self.omega_scale is not None and not self.omega_scale > 0.0:
            raise InvalidArgumentError("omega_scale must be positive")

    @property
    def dim(self) -> int:
        return len(self.lambda_diag)

    def nu_k(self, dk: int) -> float:
        """Degrees of freedom of the marginal prior on a ``dk``-variable block."""
        return self.nu - self.dim + dk

    def lam(self, idx: Sequence[int]) -> np.ndarray:
        return np.diag([self.lambda_diag[i] for i in idx])

    def omega_inv(self, idx: Sequence[int]) -> np.ndarray:
        c = 1.0 if self.omega_scale is None else self.omega_scale
        return np.diag([self.lambda_diag[i] / c for i in idx])

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "lambda_diag": list(self.lambda_diag),
            "variant": self.variant,
            "omega_scale": self.omega_scale,
        }


@dataclass(frozen=True)
class SimilaritySpec:
    """Which similarity to use, and with what parameters."""

    measure: Measure
    use_abs: bool = False
    hyper: Optional[Hyperparams] = None

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure(self.measure))

    def validate(self) -> None:
        if self.measure.is_bayesian and self.hyper is None:
            raise ConfigurationError(f"{self.measure.value} needs hyperparameters")
        if not self.measure.is_bayesian and self.hyper is not None:
            raise ConfigurationError(f"{self.measure.value} takes no hyperparameters")
        if self.use_abs and not self.measure.is_linkage:
            raise ConfigurationError("use_abs only applies to linkage measures")
        expected = {Measure.BAYES_COV: "cov", Measure.BAYES_CORR: "corr", Measure.BAYES_PREC: "precision"}
        if self.hyper is not None and self.hyper.variant != expected[self.measure]:
            raise ConfigurationError(
                f"{self.measure.value} expects a {expected[self.measure]!r} prior, got {self.hyper.variant!r}"
            )

    def with_hyper(self, hyper: Hyperparams) -> "SimilaritySpec":
        return replace(self, hyper=hyper)


@dataclass(frozen=True)
class SimilarityValue:
    """A similarity, optionally with its ``(dphi_union, dphi_i, dphi_j)`` terms."""

    value: float
    decomposition: Optional[tuple[float, float, float]] = None

    def __float__(self) -> float:
        return self.value


def phi(n: float, a: np.ndarray) -> float:
    """``-n/2 ln|a| + sum_{d=1..dim a} lnGamma((n + 1 - d) / 2)``."""
    a = np.asarray(a, dtype=float)
    dim = a.shape[0]
    if not n + 1 - dim > 0:
        raise InvalidDegreesOfFreedomError(f"phi needs n + 1 - dim > 0, got n={n}, dim={dim}")
    k = np.arange(1, dim + 1)
    return -0.5 * n * log_det_pd(a) + float(np.sum(gammaln(0.5 * (n + 1 - k))))


def _pair(scatter: ScatterInput, i, j) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    i = index_set(i, scatter.dim)
    j = index_set(j, scatter.dim)
    if set(i) & set(j):
        raise InvalidArgumentError(f"clusters {i} and {j} overlap")
    return i, j, tuple(sorted(i + j))


def _check_hyper(scatter: ScatterInput, hyper: Hyperparams, variants: tuple[str, ...]) -> None:
    if hyper.dim != scatter.dim:
        raise ConfigurationError(f"hyperparameters are {hyper.dim}-dimensional, scatter is {scatter.dim}")
    if hyper.variant not in variants:
        raise ConfigurationError(f"prior variant {hyper.variant!r} not usable here (expected one of {variants})")
    if hyper.variant == "corr" and scatter.kind != "corr":
        raise ConfigurationError("the correlation prior needs correlation-scale scatter")


def delta_phi(scatter: ScatterInput, idx: Sequence[int], hyper: Hyperparams) -> float:
    """Evidence term of one cluster: ``phi(n + nu_k, Lambda_k + S_k) - phi(nu_k, Lambda_k)``."""
    nk = hyper.nu_k(len(idx))
    lam = hyper.lam(idx)
    return phi(scatter.n_eff + nk, lam + restrict(scatter.s, idx)) - phi(nk, lam)


def bayes_similarity(scatter: ScatterInput, i, j, hyper: Hyperparams) -> SimilarityValue:
    """Exact log Bayes factor of dependence versus independence of two clusters.

    Well defined for any ``n_eff >= 1`` since ``Lambda_k + S_k`` is positive
    definite whenever ``Lambda`` is, even for a singular ``S``.
    """
    _check_hyper(scatter, hyper, ("cov", "corr"))
    i, j, ij = _pair(scatter, i, j)
    d_ij = delta_phi(scatter, ij, hyper)
    d_i = delta_phi(scatter, i, hyper)
    d_j = delta_phi(scatter, j, hyper)
    return SimilarityValue(d_ij - (d_i + d_j), (d_ij, d_i, d_j))


def precision_similarity(scatter: ScatterInput, i, j, hyper: Hyperparams) -> SimilarityValue:
    """Log Bayes factor with a Wishart prior on the concentration matrix.

    Both blocks keep the joint cluster's prior degrees of freedom
    ``nu_{i u j}`` (sub-blocks of a Wishart matrix are Wishart with unchanged
    degrees of freedom), unlike the covariance version.
    """
    _check_hyper(scatter, hyper, ("precision",))
    i, j, ij = _pair(scatter, i, j)
    n = scatter.n_eff
    nu_ij = hyper.nu_k(len(ij))

    def term(idx):
        w = hyper.omega_inv(idx)
        # |Omega_k|^{-nu/2} == |Omega_k^{-1}|^{+nu/2}
        return (
            log_z(len(idx), n + nu_ij)
            - log_z(len(idx), nu_ij)
            - 0.5 * (n + nu_ij) * log_det_pd(restrict(scatter.s, idx) + w)
            + 0.5 * nu_ij * log_det_pd(w)
        )

    t_ij, t_i, t_j = term(ij), term(i), term(j)
    return SimilarityValue(t_ij - (t_i + t_j), (t_ij, t_i, t_j))


def mutual_info_plugin(scatter: ScatterInput, i, j) -> float:
    """Gaussian mutual information evaluated at the sample covariance.

    ``0.5 * ln(|S_i| |S_j| / |S_{i u j}|)``; the ``1/n`` scaling cancels.
    """
    i, j, ij = _pair(scatter, i, j)
    try:
        return 0.5 * (
            log_det_pd(restrict(scatter.s, i))
            + log_det_pd(restrict(scatter.s, j))
            - log_det_pd(restrict(scatter.s, ij))
        )
    except NotPositiveDefiniteError as exc:
        raise SmallSampleError(
            f"sample covariance of {ij} is singular (n_eff={scatter.n_eff}, size {len(ij)})", exc.pivot
        ) from exc


def bic_similarity(scatter: ScatterInput, i, j) -> SimilarityValue:
    """Large-sample form ``N * I_hat - (D_i D_j / 2) ln N`` with ``N = n_eff``."""
    i, j, _ = _pair(scatter, i, j)
    n = scatter.n_eff
    if n < len(i) + len(j):
        raise SmallSampleError(f"need n_eff >= {len(i) + len(j)}, got {n}", min(n, len(i) + len(j) - 1))
    mi = mutual_info_plugin(scatter, i, j)
    return SimilarityValue(n * mi - 0.5 * len(i) * len(j) * math.log(n))


def joint_entropy_normalizer(scatter: ScatterInput, idx: Sequence[int]) -> float:
    """Differential entropy of the standardized Gaussian on `idx`."""
    r = cov_to_corr(restrict(scatter.s, idx))
    try:
        ld = log_det_pd(r)
    except NotPositiveDefiniteError as exc:
        raise SmallSampleError(f"sample correlation of {tuple(idx)} is singular", exc.pivot) from exc
    return 0.5 * (len(idx) * math.log(2.0 * math.pi * math.e) + ld)


def normalized_mutual_info(scatter: ScatterInput, i, j) -> float:
    """Plug-in MI divided by the joint entropy of the standardized pair."""
    i, j, ij = _pair(scatter, i, j)
    mi = mutual_info_plugin(scatter, i, j)
    h = joint_entropy_normalizer(scatter, ij)
    if not h > 0.0:
        raise DegenerateNormalizerError(f"joint entropy normalizer {h:.4g} <= 0 for {ij}")
    return mi / h


def linkage_similarity(corr: np.ndarray, i, j, spec: SimilaritySpec) -> float:
    """Correlation linkage between two clusters (max, mean or min over cross pairs)."""
    corr = np.asarray(corr, dtype=float)
    d = corr.shape[0]
    i, j = index_set(i, d), index_set(j, d)
    if set(i) & set(j):
        raise InvalidArgumentError(f"clusters {i} and {j} overlap")
    block = corr[np.ix_(i, j)]
    if spec.use_abs:
        block = np.abs(block)
    m = spec.measure
    if m is Measure.LINK_SINGLE:
        return float(block.max())
    if m is Measure.LINK_COMPLETE:
        return float(block.min())
    if m is Measure.LINK_AVERAGE:
        # correctly rounded sum, so the value does not depend on argument order
        return math.fsum(block.ravel().tolist()) / block.size
    if m is Measure.LINK_WARD:
        raise UnsupportedMeasureError("Ward distances only exist through the Lance-Williams recursion")
    raise UnsupportedMeasureError(f"{m.value} is not a linkage measure")


def evaluate(scatter: ScatterInput, i, j, spec: SimilaritySpec) -> SimilarityValue:
    """Dispatch a non-linkage measure on one cluster pair."""
    m = spec.measure
    if m in (Measure.BAYES_COV, Measure.BAYES_CORR):
        return bayes_similarity(scatter, i, j, spec.hyper)
    if m is Measure.BAYES_PREC:
        return precision_similarity(scatter, i, j, spec.hyper)
    if m is Measure.BIC:
        return bic_similarity(scatter, i, j)
    if m is Measure.INFOMUT:
        return SimilarityValue(mutual_info_plugin(scatter, i, j))
    if m is Measure.INFOMUT_NORM:
        return SimilarityValue(normalized_mutual_info(scatter, i, j))
    raise UnsupportedMeasureError(f"{m.value} is evaluated by the linkage engine")


def partition_log_marginal(scatter: ScatterInput, p: Partition, hyper: Hyperparams) -> float:
    """Relative log marginal likelihood of a partition.

    Sum over blocks of
    ``ln Z(D_k, n + nu_k) - ln Z(D_k, nu_k) + nu_k/2 ln|Lambda_k| - (n + nu_k)/2 ln|Lambda_k + S_k|``.
    The partition-independent factor ``|S|^{(N-D-1)/2} / Z(D, N)`` is dropped.
    """
    _check_hyper(scatter, hyper, ("cov", "corr"))
    if not isinstance(p, Partition):
        p = Partition(scatter.dim, tuple(tuple(b) for b in p))
    if p.d != scatter.dim:
        raise InvalidArgumentError(f"partition covers {p.d} variables, scatter has {scatter.dim}")
    n = scatter.n_eff
    total = 0.0
    for block in p.blocks:
        dk = len(block)
        nk = hyper.nu_k(dk)
        lam = hyper.lam(block)
        total += (
            log_z(dk, n + nk)
            - log_z(dk, nk)
            + 0.5 * nk * log_det_pd(lam)
            - 0.5 * (n + nk) * log_det_pd(lam + restrict(scatter.s, block))
        )
    return total


def make_hyper_bayescov(scatter: ScatterInput) -> Hyperparams:
    """``nu = D`` and the diagonal ``Lambda`` maximizing the all-singleton evidence.

    At ``nu = D`` the stationary point is ``Lambda_dd = S_dd / n_eff``.
    """
    diag = np.diagonal(scatter.s)
    if np.any(~(diag > 0.0)):
        raise DegenerateVarianceError(f"zero variance at index {int(np.flatnonzero(~(diag > 0.0))[0])}")
    d = scatter.dim
    nu = float(d)
    return Hyperparams(nu, tuple((nu - d + 1.0) / scatter.n_eff * diag), "cov")


def make_hyper_bayescorr(d: int) -> Hyperparams:
    """``nu = D + 1`` with identity scale: uniform prior marginals on correlations."""
    if d < 1:
        raise InvalidArgumentError("dimension must be positive")
    return Hyperparams(float(d + 1), (1.0,) * d, "corr")


def make_hyper_precision(scatter: ScatterInput, omega_scale: Optional[float] = None) -> Hyperparams:
    """Precision-matrix prior with ``Omega = Lambda^{-1}`` taken from the covariance strategy."""
    base = make_hyper_bayescov(scatter)
    return Hyperparams(base.nu, base.lambda_diag, "precision", omega_scale)


def optimal_lambda_fixed_point(scatter: ScatterInput, p: Partition, nu: float, iters: int = 200, lam0=None) -> np.ndarray:
    """Iterate the stationarity condition for a diagonal ``Lambda`` at partition `p`.

    ``Lambda_dd <- (nu_k / (n + nu_k)) / [(S_k + Lambda_k)^{-1}]_dd`` with ``k``
    the block holding ``d``.  At the all-singleton level the fixed point is
    ``(nu - D + 1) S_dd / n``.
    """
    d = scatter.dim
    n = scatter.n_eff
    lam = np.ones(d) if lam0 is None else np.array(lam0, dtype=float)
    for _ in range(iters):
        new = lam.copy()
        for block in p.blocks:
            nk = nu - d + len(block)
            inv = np.linalg.inv(restrict(scatter.s, block) + np.diag(lam[list(block)]))
            new[list(block)] = (nk / (n + nk)) / np.diagonal(inv)
        if np.allclose(new, lam, rtol=1e-12, atol=0.0):
            return new
        lam = new
    return lam
