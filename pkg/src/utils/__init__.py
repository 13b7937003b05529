"""
Utility functions for the tree-correlation toolkit.

This package contains utility functions for marginal distributions,
increment preprocessing, correlation metrics, file I/O and run configuration.
"""

from .distributions import Family, cdf, inverse_cdf

from .preprocessing import (
    NormalizationConfig,
    mle_per_generation,
    normalize_increments,
    sign_flip_if_negative,
    discretize
)

from .metrics import (
    delta_theta_hat,
    fold_through_vertex,
    td_delta_theta,
    pearson_flat,
    per_generation_pearson
)

from .data_loader import load_paired_trees, save_paired_trees

__all__ = [
    'Family',
    'cdf',
    'inverse_cdf',
    'NormalizationConfig',
    'mle_per_generation',
    'normalize_increments',
    'sign_flip_if_negative',
    'discretize',
    'delta_theta_hat',
    'fold_through_vertex',
    'td_delta_theta',
    'pearson_flat',
    'per_generation_pearson',
    'load_paired_trees',
    'save_paired_trees'
]
