"""fairmaxcorr: fairness-regularized learning via maximal correlation.

Discrete data trains through an exact DTM eigen-solver; continuous data
trains through Soft-HGR minimax regularization.  The :mod:`fairmaxcorr.cli`
module sweeps the regularization weight and emits performance-fairness
tradeoff curves as CSV.
"""

__version__ = "0.1.0"

from . import cli, datasets, discrete, errors, metrics, nn, probability, soft_hgr

__all__ = [
    "cli",
    "datasets",
    "discrete",
    "errors",
    "metrics",
    "nn",
    "probability",
    "soft_hgr",
    "__version__",
]
