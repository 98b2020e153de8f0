"""Utility functions"""

from sphs.utils.numerics import softplus, softplus_inverse, format_float, interquartile_summary
from sphs.utils.linalg import min_eigenvalue, cholesky_succeeds, skew_residual

__all__ = [
    'softplus',
    'softplus_inverse',
    'format_float',
    'interquartile_summary',
    'min_eigenvalue',
    'cholesky_succeeds',
    'skew_residual',
]
