"""
Correlation metrics for paired tree-shaped data.

This module provides the statistics compared across tree pairs:
- Empirical included angle of the lines bounding 1 - alpha of the points
- The normalize-then-estimate angle pipeline on paired trees
- Pearson baselines (flat, per generation, pooled increments)
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.stats import pearsonr

from ..exceptions import AngularSpanError, DegenerateVarianceError, InsufficientSamplesError, ParameterError, \
    VertexCoincidentError
from ..models.tree_model import (IncrementsByGeneration, PairedTreeData, extract_increments, pooled_values,
                                 to_dspgm)
from .preprocessing import (NormalizationConfig, estimable_generations, mle_per_generation, normalize_increments,
                            sign_flip_if_negative)

logger = logging.getLogger(__name__)

# Guards ceil() against (1 - alpha) * n landing a rounding error above an integer.
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class AngleEstimate:
    delta_theta: float
    candidate_widths: Tuple[float, ...]
    m: int
    n: int

    @property
    def degrees(self):
        return math.degrees(self.delta_theta)


def _sorted_polar_angles(points, vertex):
    offsets = points - np.asarray(vertex, dtype=float)
    at_vertex = (offsets[:, 0] == 0) & (offsets[:, 1] == 0)
    if np.any(at_vertex):
        k = int(np.flatnonzero(at_vertex)[0])
        raise VertexCoincidentError(f"point {k} coincides with the vertex {tuple(vertex)} and has no polar angle")

    theta = np.sort(np.arctan2(offsets[:, 1], offsets[:, 0]), kind="stable")
    if len(theta) < 2:
        return theta
    gaps = np.diff(theta)
    wrap_gap = theta[0] + 2.0 * math.pi - theta[-1]
    if wrap_gap >= gaps.max():
        return theta
    # Unroll the circle so the sequence starts right after its largest gap.
    cut = int(np.argmax(gaps)) + 1
    return np.concatenate([theta[cut:], theta[:cut] + 2.0 * math.pi])


def fold_through_vertex(points, vertex=(0.0, 0.0)):
    """
    Reflect points lying behind the vertex onto the near side of its principal line.

    A line through the vertex passes through both p and 2 v - p, so the
    reflection leaves the point between the same pair of lines. The side is
    set by the leading eigenvector of the second moments about the vertex,
    oriented so the projections sum to a non-negative value.

    Args:
        points (array-like): (n, 2) coordinates
        vertex (tuple): Centre of the reflection

    Returns:
        np.ndarray: (n, 2) folded coordinates
    """
    v = np.asarray(vertex, dtype=float)
    offsets = np.asarray(points, dtype=float).reshape(-1, 2) - v
    if len(offsets) == 0:
        return offsets + v
    _, vectors = np.linalg.eigh(offsets.T @ offsets)
    projections = offsets @ vectors[:, -1]
    # eigh fixes the axis only up to sign; point it at the bulk of the cloud.
    if projections.sum() < 0:
        projections = -projections
    behind = projections < 0
    if np.any(behind):
        logger.debug("Folded %d of %d points through the vertex", int(behind.sum()), len(offsets))
    offsets[behind] *= -1.0
    return offsets + v


def delta_theta_hat(points, alpha=0.05, vertex=(0.0, 0.0)) -> AngleEstimate:
    """
    Estimate the included angle of two lines through the vertex that bound 1 - alpha of the points.

    Polar angles about the vertex are sorted; every contiguous window of
    m = ceil((1 - alpha) n) angles is a candidate, its boundary points being
    the side-points the two lines pass through. The estimate is the mean
    width of all n - m + 1 candidates. The circle is cut at its largest gap
    first; if the points still span pi or more the lines cannot be placed
    and the estimate is refused.

    Args:
        points (array-like): (n, 2) coordinates
        alpha (float): Fraction of points allowed outside the lines
        vertex (tuple): Intersection point of the two lines

    Returns:
        AngleEstimate: Mean candidate width in radians, with the candidates

    Raises:
        InsufficientSamplesError: fewer than two points
        VertexCoincidentError: a point sits on the vertex
        AngularSpanError: the sorted angles span pi or more
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        raise InsufficientSamplesError(f"angle estimate needs at least 2 points, got {n}")

    theta = _sorted_polar_angles(pts, vertex)
    span = theta[-1] - theta[0]
    if span >= math.pi:
        raise AngularSpanError(f"{n} points span {math.degrees(span):.1f} degrees about the vertex; "
                               f"no pair of lines through it bounds a proper wedge")
    m = max(1, math.ceil((1.0 - alpha) * n - _CEIL_SLACK))
    widths = theta[m - 1:] - theta[:n - m + 1]
    return AngleEstimate(float(widths.mean()), tuple(float(w) for w in widths), m, n)


def td_delta_theta_increments(inc: IncrementsByGeneration, cfg: NormalizationConfig) -> AngleEstimate:
    """Angle pipeline from increments: [sign flip] -> [normalize] -> [fold] -> pooled estimate at the origin."""
    if cfg.sign_flip:
        inc, _ = sign_flip_if_negative(inc)
    if cfg.normalize:
        if cfg.drop_unestimable:
            inc = estimable_generations(inc)
        inc = normalize_increments(inc, mle_per_generation(inc), cfg)
    points = inc.pooled()
    if cfg.fold_behind_vertex:
        points = fold_through_vertex(points)
    return delta_theta_hat(points, cfg.alpha, (0.0, 0.0))


def td_delta_theta(data: PairedTreeData, cfg: NormalizationConfig) -> AngleEstimate:
    """
    Normalize-then-estimate angle of a paired tree dataset.

    The dataset is expanded to one observation per node, differenced into
    per-generation increments anchored at the root's start point, optionally
    sign-flipped and normalized, and the angle is estimated at the origin on
    all generations pooled.

    Args:
        data (PairedTreeData): Valid dataset
        cfg (NormalizationConfig): Pipeline settings

    Returns:
        AngleEstimate: Pooled angle estimate
    """
    inc = extract_increments(to_dspgm(data))
    logger.debug("Pipeline on %d generations, counts %s", inc.max_generation, inc.counts())
    return td_delta_theta_increments(inc, cfg)


def _pearson(points, what):
    if len(points) < 2:
        raise InsufficientSamplesError(f"{what} needs at least 2 pairs, got {len(points)}")
    if np.ptp(points[:, 0]) == 0 or np.ptp(points[:, 1]) == 0:
        raise DegenerateVarianceError(f"{what}: zero variance, correlation undefined")
    r, _ = pearsonr(points[:, 0], points[:, 1])
    return float(r)


def pearson_flat(data: PairedTreeData):
    """Sample Pearson r over every (x, y) observation, node input order."""
    return _pearson(pooled_values(data), "flat Pearson correlation")


def pooled_pearson(inc: IncrementsByGeneration):
    """Sample Pearson r over all generations' increments pooled."""
    return _pearson(inc.pooled(), "pooled increment correlation")


@dataclass(frozen=True)
class PearsonReport:
    """Per-generation correlations; generations that cannot be estimated are listed in ``omitted``."""

    rows: Tuple[Tuple[int, float], ...]
    omitted: Tuple[Tuple[int, str], ...] = ()

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def per_generation_pearson(inc: IncrementsByGeneration) -> PearsonReport:
    """
    Sample Pearson correlation of each generation's increments.

    Args:
        inc (IncrementsByGeneration): Increments grouped by generation

    Returns:
        PearsonReport: (generation, r) rows plus a note for each omitted generation
    """
    rows, omitted = [], []
    for gen in inc:
        arr = inc[gen]
        if len(arr) < 2:
            omitted.append((gen, f"n={len(arr)} < 2"))
        elif np.ptp(arr[:, 0]) == 0 or np.ptp(arr[:, 1]) == 0:
            omitted.append((gen, "zero variance"))
        else:
            rows.append((gen, _pearson(arr, f"generation {gen}")))
    return PearsonReport(tuple(rows), tuple(omitted))
