"""Named clustering methods (``BayesCorrAuto``, ``AverageAbs``, ...).

A method fixes the measure, the input scale it works on, how its
hyperparameters are derived from the data, and whether the automatic stop
applies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .engine import Hierarchy, ahc
from .errors import InvalidArgumentError
from .measures import (
    Measure,
    SimilaritySpec,
    make_hyper_bayescorr,
    make_hyper_bayescov,
    make_hyper_precision,
)
from .numerics import ScatterInput

__all__ = ["METHODS", "MethodDef", "prepare", "run_method"]


@dataclass(frozen=True)
class MethodDef:
    measure: Measure
    use_abs: bool = False
    auto: bool = False


def _build() -> dict[str, MethodDef]:
    out = {}
    for base, measure in (("BayesCov", Measure.BAYES_COV), ("BayesCorr", Measure.BAYES_CORR),
                          ("Bic", Measure.BIC), ("BayesPrec", Measure.BAYES_PREC)):
        out[base] = MethodDef(measure)
        out[base + "Auto"] = MethodDef(measure, auto=True)
    out["Infomut"] = MethodDef(Measure.INFOMUT)
    out["InfomutNorm"] = MethodDef(Measure.INFOMUT_NORM)
    for base, measure in (("Single", Measure.LINK_SINGLE), ("Average", Measure.LINK_AVERAGE),
                          ("Complete", Measure.LINK_COMPLETE), ("Ward", Measure.LINK_WARD)):
        out[base] = MethodDef(measure)
        out[base + "Abs"] = MethodDef(measure, use_abs=True)
    return out


METHODS: dict[str, MethodDef] = _build()
_LOWER = {k.lower(): k for k in METHODS}


def canonical_name(name: str) -> str:
    try:
        return _LOWER[name.lower()]
    except KeyError:
        raise InvalidArgumentError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None


def prepare(name: str, scatter: ScatterInput, omega_scale: Optional[float] = None) -> tuple[SimilaritySpec, ScatterInput]:
    """Similarity spec (hyperparameters filled in) and the scatter it runs on.

    ``BayesCov`` and ``BayesPrec`` keep the covariance scale; everything else
    works on the correlation-scale scatter.
    """
    mdef = METHODS[canonical_name(name)]
    m = mdef.measure
    if m is Measure.BAYES_COV:
        return SimilaritySpec(m, hyper=make_hyper_bayescov(scatter)), scatter
    if m is Measure.BAYES_PREC:
        return SimilaritySpec(m, hyper=make_hyper_precision(scatter, omega_scale)), scatter
    corr = scatter.to_correlation()
    if m is Measure.BAYES_CORR:
        return SimilaritySpec(m, hyper=make_hyper_bayescorr(scatter.dim)), corr
    return SimilaritySpec(m, use_abs=mdef.use_abs), corr


def run_method(name: str, scatter: ScatterInput, seed: int = 0, stop: Optional[str] = None) -> Hierarchy:
    """Run a named method; `stop` defaults to the method's own rule."""
    mdef = METHODS[canonical_name(name)]
    spec, s = prepare(name, scatter)
    if stop is None:
        stop = "auto" if mdef.auto else "full"
    return ahc(s, spec, stop=stop, seed=seed)
