"""Agglomerative clustering of variables driven by Bayesian model selection."""

from .engine import Hierarchy, MergeStep, ahc, ahc_linkage, auto_partition, cumulative_curve, cut
from .errors import (
    BahcError,
    ConfigurationError,
    DegenerateNormalizerError,
    DegenerateVarianceError,
    InvalidArgumentError,
    InvalidDegreesOfFreedomError,
    MeasureEvaluationError,
    NotPositiveDefiniteError,
    NumericalError,
    SmallSampleError,
    UnreachableLevelError,
    UnsupportedMeasureError,
)
from .measures import (
    Hyperparams,
    Measure,
    SimilaritySpec,
    SimilarityValue,
    bayes_similarity,
    bic_similarity,
    evaluate,
    make_hyper_bayescorr,
    make_hyper_bayescov,
    make_hyper_precision,
    mutual_info_plugin,
    normalized_mutual_info,
    partition_log_marginal,
    precision_similarity,
)
from .methods import METHODS, prepare, run_method
from .metrics import StabilityMatrix, adjusted_rand, consensus, exact_recovery, rand_index
from .numerics import ScatterInput, cov_to_corr, log_det_pd, log_z, scatter_from_data
from .partition import Partition

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
