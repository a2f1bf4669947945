"""Numerical core: PCA, Hotelling's T-squared, F / studentized-range tests."""

from .distributions import (
    f_cdf,
    f_sf,
    regularized_incomplete_beta,
    studentized_range_cdf,
    studentized_range_quantile,
)
from .inference import (
    AnovaResult,
    FTestResult,
    PairComparison,
    TukeyResult,
    one_way_anova,
    tukey_hsd,
    two_sample_f_test,
)
from .linalg import eigendecompose_symmetric
from .pca import PcaModel, column_means, covariance_matrix, hotelling_t2, pca

__all__ = [
    "AnovaResult",
    "FTestResult",
    "PairComparison",
    "PcaModel",
    "TukeyResult",
    "column_means",
    "covariance_matrix",
    "eigendecompose_symmetric",
    "f_cdf",
    "f_sf",
    "hotelling_t2",
    "one_way_anova",
    "pca",
    "regularized_incomplete_beta",
    "studentized_range_cdf",
    "studentized_range_quantile",
    "tukey_hsd",
    "two_sample_f_test",
]
