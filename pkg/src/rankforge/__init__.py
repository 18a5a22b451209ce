"""rankforge: a coarse-to-fine learning-to-rank toolkit with ranking
metrics, stochastic pairwise confidence, and a merge-sort annotation
workflow (engine, HTTP service, and simulated annotators)."""

from .backend import BACKEND_NAME

__version__ = "0.1.0"
__all__ = ["BACKEND_NAME", "__version__"]
