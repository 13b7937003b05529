"""
Tree-correlation models.

This package contains the data model and the theory behind the angle statistic:
- tree_model: paired tree datasets, validation, increments
- ellipse_theory: quantile-ellipse tangent geometry
- generators: seeded synthetic paired trees (import directly)
"""

from .tree_model import PairedTreeData, Topology, IncrementsByGeneration, extract_increments, to_dspgm, validate
from .ellipse_theory import (
    BivariateGaussianParams,
    quantile_ellipse,
    tangent_slopes,
    delta_theta_theory,
    mu_star_schedule
)

__all__ = [
    'PairedTreeData',
    'Topology',
    'IncrementsByGeneration',
    'extract_increments',
    'to_dspgm',
    'validate',
    'BivariateGaussianParams',
    'quantile_ellipse',
    'tangent_slopes',
    'delta_theta_theory',
    'mu_star_schedule'
]
