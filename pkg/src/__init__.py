"""
Tree-correlation toolkit.

Geometric correlation of paired tree-shaped datasets: quantile-ellipse
theory, the normalize-then-estimate angle statistic, synthetic tree
generators and a Monte-Carlo comparison harness.
"""

__version__ = "0.1.0"
