"""Bundled summary statistics for the HIV toy data set.

Six blood measurements on children born to HIV-positive mothers: X1, X2
immunoglobin G and A, X3 lymphocyte B, X4 platelet count, X5 lymphocyte T4,
X6 T4/T8 ratio.  Only variances and correlations were published; the sample
size ``HIV_N`` comes from the original study (107 children).
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .numerics import ScatterInput

__all__ = ["HIV_N", "HIV_NAMES", "hiv_correlation", "hiv_covariance", "hiv_csv_path", "hiv_scatter"]

HIV_N = 107
HIV_NAMES = ("X1", "X2", "X3", "X4", "X5", "X6")

_VARIANCES = np.array([8.8374, 0.1919, 8924231.9, 20392.4, 1952795.2, 1.378])
_LOWER = (
    (0.483,),
    (0.220, 0.057),
    (-0.040, -0.133, 0.149),
    (0.253, -0.124, 0.523, 0.179),
    (-0.276, -0.314, -0.183, 0.064, 0.213),
)


def hiv_correlation() -> np.ndarray:
    r = np.eye(6)
    for row, vals in enumerate(_LOWER, start=1):
        for col, v in enumerate(vals):
            r[row, col] = r[col, row] = v
    return r


def hiv_covariance() -> np.ndarray:
    sd = np.sqrt(_VARIANCES)
    return hiv_correlation() * np.outer(sd, sd)


def hiv_scatter(kind: str = "cov", n: int = HIV_N) -> ScatterInput:
    """Mean-unknown scatter at sample size `n` on the covariance or correlation scale."""
    if kind == "corr":
        return ScatterInput.from_correlation(hiv_correlation(), n)
    return ScatterInput.from_covariance(hiv_covariance(), n)


def hiv_csv_path(kind: str = "corr"):
    """Path-like handle to the bundled CSV (``"corr"`` or ``"cov"``) with a name header."""
    return resources.files("bahc") / "data" / f"hiv_{kind}.csv"
