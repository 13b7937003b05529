"""
Increment preprocessing for the angle statistic.

This module provides the transformations applied to per-generation increments
before the angle is estimated:
- Per-generation maximum-likelihood moments
- Normalization to variance sigma^2 and mean mu*_i
- Sign flip for negatively correlated pairs
- Equal-width and equal-frequency discretization
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import stats

from ..exceptions import DegenerateVarianceError, InsufficientSamplesError, ParameterError, UnknownPatternError
from ..models.ellipse_theory import DEFAULT_ALPHA, mu_star_schedule
from ..models.tree_model import IncrementsByGeneration

logger = logging.getLogger(__name__)

EPSILON_SCHEDULES = ("harmonic", "exact")
DISCRETIZE_METHODS = ("equal_width", "equal_freq")


@dataclass(frozen=True)
class NormalizationConfig:
    """
    Settings of the normalize-then-estimate pipeline.

    Attributes:
        alpha (float): Tail probability; 1 - alpha of the points lie between the lines
        tau (float): Sensitivity constant of the mean schedule
        sigma2 (float): Target per-generation variance
        epsilon (str): Mean-schedule multiplier, "harmonic" or "exact"
        damping (callable, optional): f(i, rho), needed by the exact schedule
        rho (float, optional): Correlation parameter, needed by the exact schedule
        normalize (bool): Rescale each generation before estimating
        sign_flip (bool): Negate x increments when the pooled correlation is negative
        drop_unestimable (bool): Leave out generations whose variance cannot be estimated
        fold_behind_vertex (bool): Reflect pooled points lying behind the origin before estimating
    """

    alpha: float = DEFAULT_ALPHA
    tau: float = 0.1
    sigma2: float = 1.0
    epsilon: str = "harmonic"
    damping: Optional[Callable[[int, float], float]] = None
    rho: Optional[float] = None
    normalize: bool = True
    sign_flip: bool = False
    drop_unestimable: bool = True
    fold_behind_vertex: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.tau > 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        if not self.sigma2 > 0:
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2}")
        if self.epsilon not in EPSILON_SCHEDULES:
            raise UnknownPatternError(f"unknown epsilon schedule {self.epsilon!r}")
        if self.epsilon == "exact" and (self.damping is None or self.rho is None):
            raise ParameterError("exact epsilon schedule needs damping and rho")

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    def mu_star(self, generation):
        return mu_star_schedule(generation, self.tau, self.sigma2, self.alpha, self.epsilon, self.damping, self.rho)


@dataclass(frozen=True)
class GenerationStats:
    mean_x: float
    mean_y: float
    sd_x: float
    sd_y: float
    n: int


@dataclass(frozen=True)
class GenerationMoments:
    """MLE moments keyed by generation index."""

    by_generation: Mapping[int, GenerationStats] = field(default_factory=dict)

    def __getitem__(self, generation):
        try:
            return self.by_generation[generation]
        except KeyError:
            raise InsufficientSamplesError(f"no moments estimated for generation {generation}") from None

    def __iter__(self):
        return iter(sorted(self.by_generation))

    def __len__(self):
        return len(self.by_generation)


def mle_per_generation(inc: IncrementsByGeneration) -> GenerationMoments:
    """
    Estimate per-generation means and standard deviations by maximum likelihood.

    Variances divide by n_i, not n_i - 1.

    Args:
        inc (IncrementsByGeneration): Increments grouped by generation

    Returns:
        GenerationMoments: Moments for every generation

    Raises:
        InsufficientSamplesError: a generation holds fewer than two increments
    """
    moments = {}
    for gen in inc:
        arr = inc[gen]
        if len(arr) < 2:
            raise InsufficientSamplesError(f"generation {gen} has {len(arr)} increment(s); need at least 2")
        mean = arr.mean(axis=0)
        sd = arr.std(axis=0, ddof=0)
        moments[gen] = GenerationStats(float(mean[0]), float(mean[1]), float(sd[0]), float(sd[1]), len(arr))
    return GenerationMoments(moments)


def normalize_increments(inc: IncrementsByGeneration, moments: GenerationMoments,
                         cfg: NormalizationConfig) -> IncrementsByGeneration:
    """
    Rescale each generation to standard deviation sigma and shift its mean to (mu*_i, mu*_i).

    Each coordinate becomes (sigma / sd_hat) * (d - mean_hat) + mu*_i, so the
    scaled mean is the one removed and the output mean is exactly mu*_i.

    Args:
        inc (IncrementsByGeneration): Increments grouped by generation
        moments (GenerationMoments): MLE moments of ``inc``
        cfg (NormalizationConfig): Target sigma^2 and mean schedule

    Returns:
        IncrementsByGeneration: Normalized increments

    Raises:
        DegenerateVarianceError: a generation has zero estimated variance
    """
    sigma = cfg.sigma
    out = {}
    for gen in inc:
        st = moments[gen]
        if not (st.sd_x > 0 and st.sd_y > 0):
            raise DegenerateVarianceError(f"degenerate variance in generation {gen} (sd_x={st.sd_x}, sd_y={st.sd_y})")
        mu_star = cfg.mu_star(gen)
        arr = inc[gen]
        dx = (arr[:, 0] - st.mean_x) * (sigma / st.sd_x) + mu_star
        dy = (arr[:, 1] - st.mean_y) * (sigma / st.sd_y) + mu_star
        out[gen] = np.column_stack([dx, dy])
    return IncrementsByGeneration(out)


def estimable_generations(inc: IncrementsByGeneration) -> IncrementsByGeneration:
    """Keep the generations with at least two increments and positive variance in both coordinates."""
    kept = {}
    for gen in inc:
        arr = inc[gen]
        if len(arr) < 2 or not np.all(arr.std(axis=0) > 0):
            logger.debug("Dropping generation %d from normalization (n=%d)", gen, len(arr))
            continue
        kept[gen] = arr
    if not kept:
        raise InsufficientSamplesError("no generation has enough increments to estimate its variance")
    return IncrementsByGeneration(kept)


def _pooled_r(points):
    if len(points) < 2:
        raise InsufficientSamplesError("need at least 2 increments for a correlation")
    if np.ptp(points[:, 0]) == 0 or np.ptp(points[:, 1]) == 0:
        raise DegenerateVarianceError("zero-variance pool; correlation undefined")
    r, _ = stats.pearsonr(points[:, 0], points[:, 1])
    return float(r)


def sign_flip_if_negative(inc: IncrementsByGeneration):
    """
    Negate every x increment when the pooled sample correlation is negative.

    Returns:
        tuple: (increments, flipped)
    """
    r = _pooled_r(inc.pooled())
    if r >= 0:
        return inc, False
    logger.info("Pooled correlation %.4f is negative; negating x increments", r)
    flipped = {gen: inc[gen] * np.array([-1.0, 1.0]) for gen in inc}
    return IncrementsByGeneration(flipped), True


def _discretize_column(values, method, bins):
    n = len(values)
    if method == "equal_width":
        lo, hi = values.min(), values.max()
        if not hi > lo:
            raise DegenerateVarianceError("equal-width discretization of a constant sample")
        idx = np.floor((values - lo) / (hi - lo) * bins)
        return np.clip(idx, 0, bins - 1).astype(int) + 1
    if bins > n:
        raise InsufficientSamplesError(f"equal-frequency discretization needs bins <= n, got {bins} > {n}")
    ranks = np.empty(n, dtype=int)
    ranks[np.argsort(values, kind="stable")] = np.arange(n)
    return ranks * bins // n + 1


def discretize(samples, method, bins):
    """
    Map samples to interval indices 1..bins.

    equal_width splits [min, max] into equal intervals (the maximum joins the
    top interval); equal_freq cuts at sample quantiles, breaking ties by
    sample order. Two-column input is discretized one column at a time.

    Args:
        samples (array-like): Shape (n,) or (n, 2)
        method (str): "equal_width" or "equal_freq"
        bins (int): Number of intervals, at least 2

    Returns:
        numpy.ndarray: Integer indices with the input's shape
    """
    if method not in DISCRETIZE_METHODS:
        raise UnknownPatternError(f"unknown discretization method {method!r}")
    if int(bins) != bins or bins < 2:
        raise ParameterError(f"bins must be an integer >= 2, got {bins}")
    bins = int(bins)
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        return _discretize_column(arr, method, bins)
    return np.column_stack([_discretize_column(arr[:, j], method, bins) for j in range(arr.shape[1])])
