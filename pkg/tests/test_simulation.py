import math

import numpy as np
import pandas as pd
import pytest

from src.exceptions import ParameterError, UnknownPatternError
from src.models.generators import GenConfig, gen_pair, make_rng
from src.models.tree_model import IncrementsByGeneration
from src.simulation import (CSV_COLUMNS, TABLE_COLUMNS, ExperimentResult, ExperimentSpec, NuisanceRanges, _reduce,
                            dataset_increments, draw_nuisance, fit_dspgm, format_cell, gen_mimic, mimic_bootstrap,
                            _pair_configs, run_comparison, run_grid, summarize, write_results_csv)


@pytest.mark.parametrize("mean, sd, cell", [
    (0.5412, 3.1e-4, "0.54 (3e-04)"),
    (1.0, 0.0, "1 (0e+00)"),
    (0.98, 2.2e-5, "0.98 (2e-05)"),
    (float("nan"), float("nan"), "nan (nan)"),
])
def test_format_cell(mean, sd, cell):
    assert format_cell(mean, sd) == cell


def test_reduce_skips_failed_replicates():
    res = _reduce([True, False, None, True], reps=2, batches=2)
    assert res.batch_proportions == (0.5, 1.0)
    assert res.failures == 1
    assert res.mean == pytest.approx(0.75)
    assert res.sd == pytest.approx(np.std([0.5, 1.0], ddof=1))


def test_single_batch_has_zero_sd():
    assert _reduce([True, False, True], reps=3, batches=1).sd == 0.0


@pytest.mark.parametrize("kwargs, error", [
    ({"rho": 0.5, "eta": 0.5}, ParameterError),
    ({"rho": -0.1, "eta": 0.2}, ParameterError),
    ({"rho": 0.1, "eta": 0.2, "family": "beta"}, UnknownPatternError),
    ({"rho": 0.1, "eta": 0.2, "setting": "mixed"}, UnknownPatternError),
    ({"rho": 0.1, "eta": 0.2, "reps": 0}, ParameterError),
    ({"rho": 0.1, "eta": 0.2, "damping": "cosine"}, UnknownPatternError),
])
def test_experiment_spec_validation(kwargs, error):
    with pytest.raises(error):
        ExperimentSpec(**kwargs)


def test_nuisance_draws_stay_in_range():
    rng = make_rng(4)
    tight = NuisanceRanges().tight()
    for _ in range(50):
        p = draw_nuisance(rng, tight, "f")
        assert 2.5 <= p.mu_x <= 3.0 and 0.3 <= p.sigma2_sq <= 0.5
        assert p.marginal.family_x.tag == p.marginal.family_y.tag == "f"
        assert 5.0 <= p.marginal.family_x["d1"] <= 10.0


def test_nuisance_range_validation():
    with pytest.raises(ParameterError):
        NuisanceRanges(sigma_sq=(0.0, 1.0))
    with pytest.raises(ParameterError):
        NuisanceRanges(mu=(3.0, 1.0))
    with pytest.raises(UnknownPatternError):
        draw_nuisance(make_rng(1), NuisanceRanges(), "lognormal")


def test_diff_params_ranges_keep_the_experiment_ranges():
    ranges = NuisanceRanges(gamma_shape=(2.0, 2.0), gamma_scale=(0.7, 0.7))
    assert ranges.tight().gamma_shape == ranges.loose().gamma_shape == (2.0, 2.0)
    spec = ExperimentSpec(rho=0.2, eta=0.3, family="gamma", setting="diff_params", ranges=ranges)
    first, second = _pair_configs(spec, make_rng(5))
    for cfg in (first, second):
        assert cfg.marginal.family_x["shape"] == 2.0
        assert cfg.marginal.family_y["scale"] == 0.7
    assert 0.3 <= first.sigma1_sq <= 0.5 and 1.5 <= second.sigma1_sq <= 2.0
    assert (first.rho, second.rho) == (0.2, 0.5)


def test_results_do_not_depend_on_thread_count():
    spec = ExperimentSpec(rho=0.1, eta=0.8, reps=20, batches=2, seed=3)
    serial = run_comparison(spec)
    threaded = run_comparison(spec, threads=4)
    assert serial.batch_proportions == threaded.batch_proportions
    assert serial.failures == 0
    assert serial.mean > 0.6


def test_diff_params_non_gaussian_smoke():
    res = run_comparison(ExperimentSpec(rho=0.2, eta=0.5, family="gamma", setting="diff_params", reps=5,
                                        batches=1, depth=5))
    assert 0.0 <= res.mean <= 1.0
    assert res.spec.family == "gamma"


def test_replicates_that_cannot_be_normalized_are_counted():
    res = run_comparison(ExperimentSpec(rho=0.2, eta=0.3, depth=1, reps=3, batches=2))
    assert res.failures == 6
    assert math.isnan(res.mean)
    assert res.cell == "nan (nan)"


def test_grid_respects_correlation_bound():
    template = ExperimentSpec(rho=0.1, eta=0.05, reps=1, batches=1, depth=4)
    results = run_grid(template, rhos=(0.1, 0.5), etas=(0.05, 0.45, 0.55))
    pairs = [(r.spec.rho, r.spec.eta) for r in results]
    assert pairs == [(0.1, 0.05), (0.1, 0.45), (0.1, 0.55), (0.5, 0.05), (0.5, 0.45)]


def test_summarize_and_csv(tmp_path):
    spec = ExperimentSpec(rho=0.5, eta=0.05, reps=200, batches=20)
    table = summarize([ExperimentResult((0.5, 0.6), 0.55, 3e-4, 0, spec)])
    assert list(table.columns) == TABLE_COLUMNS
    assert table.loc[0, "cell"] == "0.55 (3e-04)"

    path = tmp_path / "results.csv"
    write_results_csv(table, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert pd.read_csv(path).loc[0, "batches"] == 20


def test_summarize_empty():
    table = summarize([])
    assert table.empty and list(table.columns) == TABLE_COLUMNS


def test_summarize_needs_specs():
    with pytest.raises(ParameterError):
        summarize([ExperimentResult((0.5,), 0.5, 0.0)])


def test_mimic_fit_pools_small_generations():
    gen = np.random.default_rng(0)
    inc = IncrementsByGeneration({1: [[1.0, 2.0]], 2: gen.normal(size=(2, 2)), 3: gen.normal(size=(40, 2))})
    fit = fit_dspgm(inc)
    assert fit.generations[1].pooled and fit.generations[2].pooled
    assert not fit.generations[3].pooled
    assert fit.counts() == {1: 1, 2: 2, 3: 40}


def test_mimic_fit_clips_perfect_correlation():
    line = np.column_stack([np.arange(5.0), 2 * np.arange(5.0)])
    assert fit_dspgm(IncrementsByGeneration({1: line})).generations[1].rho == 0.999


def mimic_design(rho, seed, **kwargs):
    return gen_pair(GenConfig(branching=8, depth=4, rho=rho, seed=seed, **kwargs))


def test_mimic_keeps_the_dataset_topology(binary_gaussian_pair):
    fit = fit_dspgm(dataset_increments(binary_gaussian_pair, "diff"))
    mimic = gen_mimic(fit, binary_gaussian_pair.topology, make_rng(1), binary_gaussian_pair.anchor)
    assert mimic.topology == binary_gaussian_pair.topology
    assert dataset_increments(mimic, "diff").counts() == fit.counts()


def test_raw_mimic_values_are_the_draws(small_tree):
    fit = fit_dspgm(dataset_increments(small_tree, "raw"))
    first = gen_mimic(fit, small_tree.topology, make_rng(3), increments="raw")
    again = gen_mimic(fit, small_tree.topology, make_rng(3), increments="diff")
    np.testing.assert_allclose(dataset_increments(first, "raw").pooled(), dataset_increments(again, "diff").pooled(),
                               atol=1e-12)
    with pytest.raises(UnknownPatternError):
        gen_mimic(fit, small_tree.topology, make_rng(3), increments="log")


def test_mimic_needs_a_fit_for_every_generation(small_tree, binary_gaussian_pair):
    fit = fit_dspgm(dataset_increments(small_tree, "diff"))
    with pytest.raises(ParameterError):
        gen_mimic(fit, binary_gaussian_pair.topology, make_rng(0))


def test_dataset_increment_modes(small_tree):
    np.testing.assert_array_equal(dataset_increments(small_tree, "raw")[2], [[3.0, 5.0], [0.0, 1.0]])
    np.testing.assert_array_equal(dataset_increments(small_tree, "diff")[2], [[2.0, 3.0], [-1.0, -1.0]])
    with pytest.raises(UnknownPatternError):
        dataset_increments(small_tree, "log")


def test_mimic_of_identical_data_is_a_tie(binary_gaussian_pair):
    res = mimic_bootstrap(binary_gaussian_pair, binary_gaussian_pair, reps=60, seed=9)
    assert res.fit_a == res.fit_b
    assert res.delta_theta.batch_proportions == (0.5,)
    assert res.pearson.batch_proportions == (0.5,)


def test_mimic_orders_weak_below_strong_correlation():
    res = mimic_bootstrap(mimic_design(0.3, 1), mimic_design(0.7, 2), reps=200, seed=4, threads=4)
    assert res.delta_theta.failures == 0
    assert res.delta_theta.mean >= 0.9


def test_mimic_angle_beats_flat_pearson_when_drift_differs():
    wins = 0
    for run in range(5):
        weak = mimic_design(0.3, 10 + run, mu_x=3.0, mu_y=3.0, sigma1_sq=0.5, sigma2_sq=0.5)
        strong = mimic_design(0.7, 20 + run, mu_x=1.0, mu_y=1.0, sigma1_sq=2.0, sigma2_sq=2.0)
        res = mimic_bootstrap(weak, strong, reps=40, seed=run, threads=4)
        wins += res.delta_theta.mean >= res.pearson.mean
    assert wins >= 4


@pytest.mark.slow
@pytest.mark.parametrize("kwargs, low, high", [
    ({"rho": 0.1, "eta": 0.85}, 0.99, 1.0),
    ({"rho": 0.5, "eta": 0.0}, 0.43, 0.57),
    ({"rho": 0.5, "eta": 0.05}, 0.47, 0.61),
    ({"rho": 0.9, "eta": 0.05}, 0.93, 1.0),
    ({"rho": 0.9, "eta": 0.05, "setting": "diff_params", "normalize": False}, 0.0, 0.05),
    ({"rho": 0.9, "eta": 0.05, "setting": "diff_params"}, 0.90, 1.0),
    ({"rho": 0.2, "eta": 0.45, "family": "gamma"}, 0.70, 0.84),
    ({"rho": 0.1, "eta": 0.55, "family": "student_t"}, 0.70, 0.84),
    ({"rho": 0.5, "eta": 0.25, "family": "poisson"}, 0.82, 0.96),
])
def test_desk_scale_cells(kwargs, low, high):
    res = run_comparison(ExperimentSpec(reps=200, batches=20, seed=2024, **kwargs), threads=4)
    assert low <= res.mean <= high
