"""Explainable visual saliency: reconstruct deep-model activation maps
with a biologically plausible log-Gabor filter bank and derive the final
saliency map from the reconstructions."""

from . import blockstats, cmrnet, grids, loggabor, metrics, pipeline
from .estimators import LogGaborResponses, SaliencyExplainer

__version__ = "0.1.0"

__all__ = [
    "blockstats",
    "cmrnet",
    "grids",
    "loggabor",
    "metrics",
    "pipeline",
    "LogGaborResponses",
    "SaliencyExplainer",
]
