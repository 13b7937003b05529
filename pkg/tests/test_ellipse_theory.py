import math

import numpy as np
import pytest

from src.exceptions import ConditionInapplicableError, ParameterError, RegionError, VerticalTangentError
from src.models.ellipse_theory import (BivariateGaussianParams, ExternalPoint, common_tangent_angle,
                                       delta_theta_from_slopes, delta_theta_theory, ellipse_boundary,
                                       epsilon_schedule, generation_marginal, lambda_level, mu_star_schedule,
                                       normalized_model, quadratic_form, quantile_ellipse, support_region_contains,
                                       tangent_slopes, theorem3_condition_check)
from src.models.generators import damping

LAMBDA = -2.0 * math.log(0.05)
ORIGIN = ExternalPoint(0.0, 0.0)


def geometric(i, rho):
    return rho ** i


def random_region_config(gen):
    """Parameters and a vertex inside the lower positive-slope region."""
    s1, s2 = gen.uniform(0.5, 2.0, size=2)
    rho = gen.uniform(-0.9, 0.9)
    mu1, mu2 = gen.uniform(-5.0, 10.0, size=2)
    x0 = mu1 - s1 * math.sqrt(LAMBDA) - gen.uniform(0.5, 5.0)
    y0 = mu2 - s2 * math.sqrt(LAMBDA) - gen.uniform(0.5, 5.0)
    return BivariateGaussianParams(mu1, mu2, s1, s2, rho), ExternalPoint(x0, y0)


@pytest.mark.parametrize("rho, c2", [(0.0, 5.991465), (0.5, 4.493598)])
def test_quantile_ellipse_level(rho, c2):
    ellipse = quantile_ellipse(BivariateGaussianParams(0, 0, 1, 1, rho), 0.05)
    assert ellipse.c2 == pytest.approx(c2, abs=1e-6)


def test_level_vanishes_near_perfect_correlation():
    assert quantile_ellipse(BivariateGaussianParams(0, 0, 1, 1, 0.999999), 0.05).c2 < 1e-4


def test_density_height():
    ellipse = quantile_ellipse(BivariateGaussianParams(1, 2, 2.0, 0.5, 0.6), 0.05)
    assert ellipse.density_height == pytest.approx(0.05 / (2 * math.pi * 2.0 * 0.5 * 0.8))


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
def test_alpha_domain(alpha):
    with pytest.raises(ParameterError):
        quantile_ellipse(BivariateGaussianParams(0, 0, 1, 1, 0), alpha)


@pytest.mark.parametrize("args", [(0, 0, 0, 1, 0), (0, 0, 1, -1, 0), (0, 0, 1, 1, 1.0)])
def test_gaussian_params_domain(args):
    with pytest.raises(ParameterError):
        BivariateGaussianParams(*args)


def test_circle_tangents():
    ellipse = quantile_ellipse(BivariateGaussianParams(5, 5, 1, 1, 0), 0.05)
    k1, k2 = tangent_slopes(ellipse, ORIGIN)
    assert k1 < 1 < k2
    assert k1 * k2 == pytest.approx(1.0, rel=1e-12)
    radius = math.sqrt(ellipse.c2)
    assert delta_theta_from_slopes(k1, k2) == pytest.approx(2 * math.asin(radius / math.sqrt(50)), abs=1e-12)


def test_axis_aligned_tangents_are_mirrored():
    ellipse = quantile_ellipse(BivariateGaussianParams(5, 0, 1, 1, 0), 0.05)
    k1, k2 = tangent_slopes(ellipse, ORIGIN)
    assert k1 == pytest.approx(-k2, abs=1e-12)


def tangency_discriminant(ellipse, p, k):
    bg = ellipse.params
    u1, u2 = bg.mu1 - p.x0, bg.mu2 - p.y0
    s1, s2, rho = bg.sigma1, bg.sigma2, bg.rho
    a = 1 / s1 ** 2 - 2 * rho * k / (s1 * s2) + k ** 2 / s2 ** 2
    b = -2 * u1 / s1 ** 2 + 2 * rho * (u1 * k + u2) / (s1 * s2) - 2 * k * u2 / s2 ** 2
    c = u1 ** 2 / s1 ** 2 - 2 * rho * u1 * u2 / (s1 * s2) + u2 ** 2 / s2 ** 2 - ellipse.c2
    return abs(b * b - 4 * a * c) / (b * b)


def test_returned_lines_touch_the_ellipse():
    gen = np.random.default_rng(3)
    for _ in range(200):
        bg, p = random_region_config(gen)
        ellipse = quantile_ellipse(bg, 0.05)
        for k in tangent_slopes(ellipse, p):
            assert tangency_discriminant(ellipse, p, k) < 1e-9


def test_slopes_positive_in_region():
    gen = np.random.default_rng(4)
    for _ in range(100):
        bg, p = random_region_config(gen)
        k1, k2 = tangent_slopes(quantile_ellipse(bg, 0.05), p)
        assert 0 < k1 <= k2


def test_no_tangents_from_inside():
    ellipse = quantile_ellipse(BivariateGaussianParams(5, 5, 1, 1, 0.3), 0.05)
    with pytest.raises(RegionError, match="no external tangents"):
        tangent_slopes(ellipse, ExternalPoint(5, 5))


def test_vertical_tangent_is_reported():
    ellipse = quantile_ellipse(BivariateGaussianParams(5, 5, 1, 1, 0), 0.05)
    with pytest.raises(VerticalTangentError):
        tangent_slopes(ellipse, ExternalPoint(5 - math.sqrt(LAMBDA), -5))


def test_closed_form_agrees_with_slopes():
    gen = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        bg, p = random_region_config(gen)
        closed = delta_theta_theory(bg, 0.05, p)
        from_slopes = delta_theta_from_slopes(*tangent_slopes(quantile_ellipse(bg, 0.05), p))
        worst = max(worst, abs(closed - from_slopes))
    assert worst < 1e-9


def test_closed_form_in_mirror_region():
    bg = BivariateGaussianParams(5, 5, 1, 1, 0.4)
    low = delta_theta_theory(bg, 0.05, ExternalPoint(0, 0))
    high = delta_theta_theory(bg, 0.05, ExternalPoint(10, 10))
    assert low == pytest.approx(high, abs=1e-12)


def test_closed_form_rejects_points_outside_region():
    with pytest.raises(RegionError):
        delta_theta_theory(BivariateGaussianParams(5, 5, 1, 1, 0), 0.05, ExternalPoint(0, 5))


def test_angle_decreases_in_rho():
    gen = np.random.default_rng(11)
    grid = np.round(np.arange(0.0, 1.0, 0.01), 2)
    for _ in range(50):
        bg, p = random_region_config(gen)
        angles = [delta_theta_theory(BivariateGaussianParams(bg.mu1, bg.mu2, bg.sigma1, bg.sigma2, r), 0.05, p)
                  for r in grid]
        assert np.all(np.diff(angles) < 0)


def test_support_region_examples():
    bg = BivariateGaussianParams(5, 5, 1, 1, 0)
    eps = math.sqrt(LAMBDA)
    assert eps == pytest.approx(2.44775, abs=1e-5)
    assert support_region_contains(bg, 0.05, ExternalPoint(0, 0))
    assert support_region_contains(bg, 0.05, ExternalPoint(10, 10))
    assert not support_region_contains(bg, 0.05, ExternalPoint(5, 5))
    assert not support_region_contains(bg, 0.05, ExternalPoint(5 - eps, 5 - eps))
    assert not support_region_contains(bg, 0.05, ExternalPoint(0, 10))


def test_generation_marginal_first_generation():
    bg = generation_marginal(2.0, 3.0, 1.0, 2.0, 0.5, geometric, 1)
    assert (bg.mu1, bg.mu2) == (2.0, 3.0)
    assert bg.rho * bg.sigma1 * bg.sigma2 == pytest.approx(0.5 * 1.0 * 2.0)


def test_generation_marginal_second_generation():
    s = math.sqrt(2.0)
    bg = generation_marginal(2.0, 2.0, s, s, 0.5, geometric, 2)
    assert (bg.mu1, bg.mu2) == (4.0, 4.0)
    assert bg.sigma1 ** 2 == pytest.approx(4.0)
    assert bg.rho * bg.sigma1 * bg.sigma2 == pytest.approx(1.5)


def test_generation_correlation_decreases():
    rhos = [generation_marginal(1, 1, 1, 1, 0.7, geometric, i).rho for i in range(1, 21)]
    assert np.all(np.diff(rhos) < 0)


def test_generation_marginal_rejects_bad_pattern():
    with pytest.raises(ParameterError):
        generation_marginal(1, 1, 1, 1, 0.5, lambda i, rho: 1.5, 1)


def test_decay_condition_examples():
    assert theorem3_condition_check(10, 10, 1, 1, 0.5, geometric, 0.05)
    assert not theorem3_condition_check(1, 1, 1, 1, 0.5, geometric, 0.05)


def test_decay_condition_inapplicable_when_cos_2gamma_not_positive():
    with pytest.raises(ConditionInapplicableError):
        theorem3_condition_check(-1, 2, 1, 1, 0.5, geometric, 0.05)


def test_angle_decreases_with_generation_when_condition_holds():
    gen = np.random.default_rng(5)
    checked = 0
    while checked < 20:
        mu_x, mu_y = gen.uniform(5.0, 10.0, size=2)
        s1, s2 = gen.uniform(0.5, 1.5, size=2)
        rho = gen.uniform(0.1, 0.9)
        if not theorem3_condition_check(mu_x, mu_y, s1, s2, rho, geometric, 0.05):
            continue
        angles = [delta_theta_theory(generation_marginal(mu_x, mu_y, s1, s2, rho, geometric, i), 0.05, ORIGIN)
                  for i in range(1, 8)]
        assert np.all(np.diff(angles) < 0)
        checked += 1


def test_mu_star_first_generation():
    assert mu_star_schedule(1, 0.1, 1.0, 0.05) == pytest.approx(2.468090, abs=1e-6)


def test_epsilon_schedules():
    assert epsilon_schedule(3) == pytest.approx(11 / 6)
    assert epsilon_schedule(1, "exact", geometric, 0.4) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        epsilon_schedule(2, "exact", geometric, 1.0)


@pytest.mark.parametrize("i", range(1, 8))
def test_mu_star_clears_the_region_margin(i):
    assert mu_star_schedule(i, 0.1, 1.0, 0.05) > math.sqrt(LAMBDA)


@pytest.mark.parametrize("kind", ["exp", "linear"])
@pytest.mark.parametrize("rho", [0.1, 0.5, 0.9])
def test_exact_schedule_gives_common_tangents(kind, rho):
    pattern = damping(kind, 7)
    angles = [delta_theta_theory(normalized_model(i, rho, pattern), 0.05, ORIGIN) for i in range(1, 8)]
    assert max(angles) - min(angles) < 1e-9
    assert angles[0] == pytest.approx(common_tangent_angle(rho), abs=1e-9)


def test_common_tangent_value():
    sec = 1 + 0.5 * LAMBDA / 0.1
    assert sec == pytest.approx(30.957, abs=1e-3)
    assert common_tangent_angle(0.5) == pytest.approx(math.acos(1 / sec), abs=1e-12)
    assert common_tangent_angle(0.5) == pytest.approx(1.5385, abs=1e-4)


def test_boundary_points_lie_on_the_ellipse():
    ellipse = quantile_ellipse(BivariateGaussianParams(1, -2, 1.5, 0.5, -0.6), 0.1)
    pts = ellipse_boundary(ellipse, 64)
    np.testing.assert_allclose(quadratic_form(ellipse, pts[:, 0], pts[:, 1]), ellipse.c2, rtol=1e-10)
    assert lambda_level(0.1) == pytest.approx(-2 * math.log(0.1))
