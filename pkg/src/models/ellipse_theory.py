"""
Quantile-ellipse geometry behind the angle statistic.

This module provides closed-form results for the (1 - alpha) quantile ellipse
of a bivariate Gaussian:
- The ellipse level c^2 = -2 (1 - rho^2) ln(alpha) and density height D
- Slopes of the two tangent lines through an external point
- The included angle from the explicit tan^2 rearrangement of the angle/rho relation
- Support-region and generation-monotonicity condition checks
- Generation marginals of the tree model and the mu*_i normalization schedule

Angles are in radians throughout.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..exceptions import (ConditionInapplicableError, ParameterError, RegionError, UnknownPatternError,
                          VerticalTangentError)

DEFAULT_ALPHA = 0.05
VERTICAL_TANGENT_TOL = 1e-12

Damping = Callable[[int, float], float]


@dataclass(frozen=True)
class BivariateGaussianParams:
    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ParameterError(f"standard deviations must be positive, got {self.sigma1}, {self.sigma2}")
        if not abs(self.rho) < 1:
            raise ParameterError(f"correlation must lie in (-1, 1), got {self.rho}")

    @property
    def mean(self):
        return np.array([self.mu1, self.mu2])

    @property
    def covariance(self):
        off = self.rho * self.sigma1 * self.sigma2
        return np.array([[self.sigma1 ** 2, off], [off, self.sigma2 ** 2]])


@dataclass(frozen=True)
class QuantileEllipse:
    params: BivariateGaussianParams
    alpha: float
    c2: float
    density_height: float

    @property
    def center(self):
        return (self.params.mu1, self.params.mu2)


@dataclass(frozen=True)
class ExternalPoint:
    x0: float
    y0: float


def lambda_level(alpha):
    """lambda = -2 ln(alpha)."""
    _check_alpha(alpha)
    return -2.0 * math.log(alpha)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")


def quantile_ellipse(bg: BivariateGaussianParams, alpha=DEFAULT_ALPHA) -> QuantileEllipse:
    """
    Build the (1 - alpha) quantile ellipse of a bivariate Gaussian.

    Args:
        bg (BivariateGaussianParams): Distribution parameters
        alpha (float): Tail probability outside the ellipse

    Returns:
        QuantileEllipse: Ellipse with level c^2 and density height D
    """
    lam = lambda_level(alpha)
    c2 = (1.0 - bg.rho ** 2) * lam
    height = alpha / (2.0 * math.pi * bg.sigma1 * bg.sigma2 * math.sqrt(1.0 - bg.rho ** 2))
    return QuantileEllipse(bg, alpha, c2, height)


def quadratic_form(ellipse: QuantileEllipse, x, y):
    """Evaluate ((x-mu1)/s1)^2 - 2 rho (..)(..) + ((y-mu2)/s2)^2."""
    bg = ellipse.params
    z1 = (np.asarray(x, dtype=float) - bg.mu1) / bg.sigma1
    z2 = (np.asarray(y, dtype=float) - bg.mu2) / bg.sigma2
    return z1 ** 2 - 2.0 * bg.rho * z1 * z2 + z2 ** 2


def ellipse_boundary(ellipse: QuantileEllipse, n_points=200):
    """Points on the ellipse boundary as an (n_points, 2) array."""
    bg = ellipse.params
    lam = ellipse.c2 / (1.0 - bg.rho ** 2)
    chol = np.linalg.cholesky(bg.covariance)
    t = np.linspace(0.0, 2.0 * math.pi, n_points)
    circle = math.sqrt(lam) * np.vstack([np.cos(t), np.sin(t)])
    return (bg.mean[:, None] + chol @ circle).T


def _tangency_coefficients(bg, lam, u1, u2):
    # (k u1 - u2)^2 = lam (k^2 s1^2 - 2 k rho s1 s2 + s2^2), collected in k
    a = u1 ** 2 - lam * bg.sigma1 ** 2
    b = -2.0 * (u1 * u2 - lam * bg.rho * bg.sigma1 * bg.sigma2)
    c = u2 ** 2 - lam * bg.sigma2 ** 2
    return a, b, c


def tangent_slopes(ellipse: QuantileEllipse, p: ExternalPoint):
    """
    Slopes of the two tangent lines from an external point.

    Substitutes y - y0 = k (x - x0) into the conic and zeroes the
    discriminant, which leaves a quadratic in k.

    Args:
        ellipse (QuantileEllipse): Target ellipse
        p (ExternalPoint): Point strictly outside the ellipse

    Returns:
        tuple: (k1, k2) with k1 <= k2

    Raises:
        RegionError: p lies inside or on the ellipse
        VerticalTangentError: one tangent line is vertical
    """
    bg = ellipse.params
    if not quadratic_form(ellipse, p.x0, p.y0) > ellipse.c2:
        raise RegionError(f"no external tangents: point ({p.x0}, {p.y0}) lies inside or on the ellipse")

    lam = ellipse.c2 / (1.0 - bg.rho ** 2)
    a, b, c = _tangency_coefficients(bg, lam, bg.mu1 - p.x0, bg.mu2 - p.y0)
    if abs(a) < VERTICAL_TANGENT_TOL:
        raise VerticalTangentError(
            f"vertical tangent: |x0 - mu1| equals sigma1*sqrt(lambda) for point ({p.x0}, {p.y0})")

    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise RegionError("no external tangents: negative tangency discriminant")
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    k_first = q / a
    k_second = c / q if q != 0 else -k_first
    return tuple(sorted((k_first, k_second)))


def delta_theta_from_slopes(k1, k2):
    """Included angle between lines of slopes k1 and k2 (tan = |k2 - k1| / (1 + k1 k2))."""
    return math.atan2(abs(k2 - k1), 1.0 + k1 * k2)


def support_region_contains(bg: BivariateGaussianParams, alpha, p: ExternalPoint):
    """True iff p lies in one of the two centrally symmetric regions where both slopes are positive."""
    root_lam = math.sqrt(lambda_level(alpha))
    eps1, eps2 = bg.sigma1 * root_lam, bg.sigma2 * root_lam
    below = p.x0 < bg.mu1 - eps1 and p.y0 < bg.mu2 - eps2
    above = p.x0 > bg.mu1 + eps1 and p.y0 > bg.mu2 + eps2
    return below or above


def delta_theta_theory(bg: BivariateGaussianParams, alpha, p: ExternalPoint):
    """
    Theoretical included angle of the quantile lines through p.

    Solves lam s1 s2 rho - u1 u2 = -sqrt(A + B^2/4 tan^2) for tan^2, with
    u = mu - p, lam = -2 ln(alpha),
    A = lam^2 s1^2 s2^2 + u1^2 u2^2 - lam s1^2 u2^2 - lam s2^2 u1^2 and
    B = lam (s1^2 + s2^2) - (u1^2 + u2^2).

    Args:
        bg (BivariateGaussianParams): Distribution parameters
        alpha (float): Quantile level
        p (ExternalPoint): Vertex inside the positive-slope region

    Returns:
        float: Acute angle in radians

    Raises:
        RegionError: p outside the support region, or the radicand is negative
    """
    if not support_region_contains(bg, alpha, p):
        raise RegionError(f"point ({p.x0}, {p.y0}) is outside the positive-slope support region")
    lam = lambda_level(alpha)
    s1, s2, rho = bg.sigma1, bg.sigma2, bg.rho
    u1, u2 = bg.mu1 - p.x0, bg.mu2 - p.y0

    lhs = lam * s1 * s2 * rho - u1 * u2
    if lhs > 0:
        raise RegionError("angle relation has no solution on the negative square-root branch")
    a_term = lam ** 2 * s1 ** 2 * s2 ** 2 + u1 ** 2 * u2 ** 2 - lam * s1 ** 2 * u2 ** 2 - lam * s2 ** 2 * u1 ** 2
    b_term = lam * (s1 ** 2 + s2 ** 2) - (u1 ** 2 + u2 ** 2)
    numerator = lhs ** 2 - a_term
    if numerator < 0:
        raise RegionError(f"negative radicand {numerator:.3e}; precondition breached")
    return math.atan(math.sqrt(numerator / (b_term ** 2 / 4.0)))


def generation_marginal(mu_x, mu_y, sigma1, sigma2, rho, damping: Damping, i) -> BivariateGaussianParams:
    """
    Marginal distribution of a generation-i node in the DSPGM.

    Mean (i mu_x, i mu_y), variances (i s1^2, i s2^2) and covariance
    sum_{r=1..i} f(r; rho) s1 s2.
    """
    if i < 1:
        raise ParameterError(f"generation must be >= 1, got {i}")
    covariance = sum(damping(r, rho) for r in range(1, i + 1)) * sigma1 * sigma2
    corr = covariance / (i * sigma1 * sigma2)
    if not abs(corr) < 1:
        raise ParameterError(f"damping pattern gives generation-{i} correlation {corr}; |rho| must stay below 1")
    return BivariateGaussianParams(i * mu_x, i * mu_y, math.sqrt(i) * sigma1, math.sqrt(i) * sigma2, corr)


def theorem3_condition_check(mu_x, mu_y, sigma1, sigma2, rho, damping: Damping, alpha=DEFAULT_ALPHA):
    """
    Sufficient condition for the generation angles to decrease with i.

    With cos g = (sqrt2/2)(mu_x + mu_y)/|mu|, sin g = (sqrt2/2)(mu_x - mu_y)/|mu|,
    sigma^2 = max(s1^2, s2^2) cos 2g and
    mu = (sigma/s1) mu_x cos g - (sigma/s2) mu_y sin g, checks
    mu^2 / (lam sigma^2) > max(f(1; rho) / cos 2g, 1).

    Raises:
        ConditionInapplicableError: cos 2g <= 0
    """
    norm = math.hypot(mu_x, mu_y)
    if norm == 0:
        raise ParameterError("condition undefined for zero means")
    cos_g = math.sqrt(2.0) / 2.0 * (mu_x + mu_y) / norm
    sin_g = math.sqrt(2.0) / 2.0 * (mu_x - mu_y) / norm
    cos_2g = cos_g ** 2 - sin_g ** 2
    if cos_2g <= 0:
        raise ConditionInapplicableError(f"cos 2gamma = {cos_2g:.3g} <= 0; condition makes no claim")
    if not (mu_x > 0 and mu_y > 0):
        raise ParameterError("condition requires positive means")

    sigma_sq = max(sigma1 ** 2, sigma2 ** 2) * cos_2g
    sigma = math.sqrt(sigma_sq)
    mu = (sigma / sigma1) * mu_x * cos_g - (sigma / sigma2) * mu_y * sin_g
    ratio = mu ** 2 / (lambda_level(alpha) * sigma_sq)
    return ratio > max(damping(1, rho) / cos_2g, 1.0)


def epsilon_schedule(i, schedule="harmonic", damping: Optional[Damping] = None, rho=None):
    """Mean-schedule multiplier epsilon_i.

    harmonic: sum_{j=1..i} 1/j; exact: (1 - f(i; rho)) / (1 - rho).
    """
    if i < 1:
        raise ParameterError(f"generation must be >= 1, got {i}")
    if schedule == "harmonic":
        return sum(1.0 / j for j in range(1, i + 1))
    if schedule == "exact":
        if damping is None or rho is None:
            raise ParameterError("exact schedule needs a damping pattern and rho")
        if rho == 1:
            raise ParameterError("exact schedule is undefined at rho = 1")
        return (1.0 - damping(i, rho)) / (1.0 - rho)
    raise UnknownPatternError(f"unknown epsilon schedule {schedule!r}")


def mu_star_schedule(i, tau, sigma2, alpha=DEFAULT_ALPHA, schedule="harmonic", damping=None, rho=None):
    """
    Target normalized mean mu*_i = sqrt(epsilon_i tau + lam sigma^2).

    Always exceeds sigma sqrt(lam), which keeps the origin inside the
    positive-slope region after normalization.
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    if not sigma2 > 0:
        raise ParameterError(f"sigma^2 must be positive, got {sigma2}")
    eps = epsilon_schedule(i, schedule, damping, rho)
    return math.sqrt(eps * tau + lambda_level(alpha) * sigma2)


def normalized_model(i, rho, damping: Damping, tau=0.1, sigma2=1.0, alpha=DEFAULT_ALPHA, schedule="exact"):
    """Generation-i increment distribution after normalization: mean (mu*_i, mu*_i), variance sigma^2, corr f(i; rho)."""
    mu_star = mu_star_schedule(i, tau, sigma2, alpha, schedule, damping, rho)
    sigma = math.sqrt(sigma2)
    return BivariateGaussianParams(mu_star, mu_star, sigma, sigma, damping(i, rho))


def common_tangent_angle(rho, tau=0.1, sigma2=1.0, alpha=DEFAULT_ALPHA):
    """Angle shared by every generation under the exact schedule: sec = 1 + (1 - rho) lam sigma^2 / tau."""
    sec = 1.0 + (1.0 - rho) * lambda_level(alpha) * sigma2 / tau
    return math.acos(1.0 / sec)
