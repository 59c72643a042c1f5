"""Conditional-independence tests: linear (partial correlation) and nonlinear (kNN CMI)."""

from .base import CMI_KNN, PARCORR, CITestResult
from .cmiknn import (
    DEFAULT_K,
    DEFAULT_PERM_NEIGHBORS,
    NeighborCounts,
    cmi_knn_estimate,
    cmi_knn_test,
    neighbor_counts,
)
from .parcorr import parcorr_test
from .special import digamma, digamma_table

__all__ = [
    "CMI_KNN",
    "PARCORR",
    "CITestResult",
    "DEFAULT_K",
    "DEFAULT_PERM_NEIGHBORS",
    "NeighborCounts",
    "cmi_knn_estimate",
    "cmi_knn_test",
    "neighbor_counts",
    "parcorr_test",
    "digamma",
    "digamma_table",
]
