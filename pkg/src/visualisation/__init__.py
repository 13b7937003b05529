"""
Plot-ready data for tree-correlation results.

This package turns results into CSV tables for external plotting:
- Quantile ellipses with their tangent lines
- Per-generation Pearson correlations
- Batch proportions of simulation cells
"""

from .plot_data import batch_plot_frame, ellipse_plot_frame, pearson_plot_frame, write_plot_csv

__all__ = [
    'ellipse_plot_frame',
    'pearson_plot_frame',
    'batch_plot_frame',
    'write_plot_csv'
]
