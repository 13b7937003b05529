"""
Monte-Carlo comparisons of tree correlation.

This module provides the experiment runner:
- Nuisance-parameter ranges and draws ("other parameters drawn randomly")
- run_comparison: proportion of replicates where the rho pair has the larger angle
- run_grid: the (rho, eta) sweep with rho + eta < 1
- mimic_bootstrap: fit two real datasets, regenerate replicas, compare
- summarize: CSV-ready result tables

Replicate k always draws from stream k of the base seed and results are
reduced in replicate order, so output does not depend on the thread count.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import DegenerateVarianceError, ParameterError, TreeCorrError, UnknownPatternError
from .models.generators import GenConfig, Marginal, damping, gen_pair, make_rng, sample_bivariate_normal
from .models.tree_model import (IncrementsByGeneration, PairedTreeData, Topology, extract_increments, path_values,
                                raw_increments, to_dspgm)
from .utils.distributions import Family
from .utils.metrics import pearson_flat, td_delta_theta, td_delta_theta_increments
from .utils.preprocessing import EPSILON_SCHEDULES, NormalizationConfig

logger = logging.getLogger(__name__)

FAMILIES = ("gaussian", "gamma", "f", "student_t", "poisson", "equal_width", "equal_freq")
SETTINGS = ("same_params", "diff_params")
CSV_COLUMNS = ["rho", "eta", "setting", "normalize", "family", "mean", "sd", "reps", "batches", "seed"]
TABLE_COLUMNS = CSV_COLUMNS + ["cell", "failures"]

GRID_RHOS = tuple(round(0.1 * k, 2) for k in range(1, 10))
GRID_ETAS = tuple(round(0.05 + 0.1 * k, 2) for k in range(9))

MIMIC_MIN_GENERATION = 3
MAX_ABS_CORRELATION = 0.999
INCREMENT_MODES = ("diff", "raw")


def _check_range(name, bounds, positive=False):
    lo, hi = bounds
    if not lo <= hi:
        raise ParameterError(f"{name} range must satisfy low <= high, got {bounds}")
    if positive and not lo > 0:
        raise ParameterError(f"{name} range must be positive, got {bounds}")


@dataclass(frozen=True)
class NuisanceRanges:
    """Uniform ranges for every parameter other than the correlation."""

    mu: Tuple[float, float] = (1.0, 3.0)
    sigma_sq: Tuple[float, float] = (0.5, 2.5)
    gamma_shape: Tuple[float, float] = (1.0, 3.0)
    gamma_scale: Tuple[float, float] = (0.5, 1.5)
    f_d1: Tuple[float, float] = (5.0, 10.0)
    f_d2: Tuple[float, float] = (10.0, 20.0)
    t_nu: Tuple[float, float] = (3.0, 10.0)
    t_loc: Tuple[float, float] = (1.0, 3.0)
    t_scale: Tuple[float, float] = (0.5, 1.5)
    poisson_mean: Tuple[float, float] = (8.0, 12.0)
    bins: int = 10

    def __post_init__(self):
        _check_range("mu", self.mu)
        _check_range("t_loc", self.t_loc)
        for name in ("sigma_sq", "gamma_shape", "gamma_scale", "f_d1", "f_d2", "t_nu", "t_scale", "poisson_mean"):
            _check_range(name, getattr(self, name), positive=True)
        if self.bins < 2:
            raise ParameterError(f"bins must be >= 2, got {self.bins}")

    def tight(self):
        """Narrow-variance ranges for the first pair of a diff_params replicate; other ranges kept."""
        return replace(self, mu=(2.5, 3.0), sigma_sq=(0.3, 0.5))

    def loose(self):
        """Wide-variance ranges for the second pair of a diff_params replicate; other ranges kept."""
        return replace(self, mu=(2.5, 3.0), sigma_sq=(1.5, 2.0))


@dataclass(frozen=True)
class NuisanceParams:
    mu_x: float
    mu_y: float
    sigma1_sq: float
    sigma2_sq: float
    marginal: Marginal


def _draw_family(rng, ranges, family):
    u = rng.uniform
    if family == "gamma":
        return Family.gamma(u(*ranges.gamma_shape), u(*ranges.gamma_scale))
    if family == "f":
        return Family.f(u(*ranges.f_d1), u(*ranges.f_d2))
    if family == "student_t":
        return Family.student_t(u(*ranges.t_nu), u(*ranges.t_loc), u(*ranges.t_scale))
    return Family.poisson(u(*ranges.poisson_mean))


def draw_nuisance(rng, ranges: NuisanceRanges, family) -> NuisanceParams:
    """
    Draw the Gaussian source parameters and, for copula families, one target marginal per coordinate.

    Args:
        rng (numpy.random.Generator): Replicate stream
        ranges (NuisanceRanges): Uniform ranges
        family (str): One of ``FAMILIES``

    Returns:
        NuisanceParams: Parameters for GenConfig
    """
    if family not in FAMILIES:
        raise UnknownPatternError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    mu_x, mu_y = rng.uniform(*ranges.mu), rng.uniform(*ranges.mu)
    s1, s2 = rng.uniform(*ranges.sigma_sq), rng.uniform(*ranges.sigma_sq)
    if family == "gaussian":
        marginal = Marginal.gaussian()
    elif family == "equal_width":
        marginal = Marginal.equal_width(ranges.bins)
    elif family == "equal_freq":
        marginal = Marginal.equal_freq(ranges.bins)
    else:
        marginal = Marginal.copula(_draw_family(rng, ranges, family), _draw_family(rng, ranges, family))
    return NuisanceParams(mu_x, mu_y, s1, s2, marginal)


@dataclass(frozen=True)
class ExperimentSpec:
    """
    One cell of a comparison table.

    Attributes:
        rho (float): Correlation of pair 1; pair 2 uses rho + eta
        eta (float): Correlation gap, rho + eta < 1
        family (str): Marginal family of the increments
        damping (str): "exp" or "linear"
        setting (str): "same_params" shares nuisance parameters, "diff_params" draws pair 1 from
            ``ranges.tight()`` and pair 2 from ``ranges.loose()``
        normalize (bool): Normalize increments before estimating
        reps (int): Replicates per batch
        batches (int): Number of batches
        depth (int): Generations per tree
        branching (int): Children per node
        seed (int): Base seed; replicate k uses stream k
    """

    rho: float
    eta: float
    family: str = "gaussian"
    damping: str = "exp"
    setting: str = "same_params"
    normalize: bool = True
    reps: int = 200
    batches: int = 20
    depth: int = 7
    branching: int = 2
    seed: int = 0
    alpha: float = 0.05
    tau: float = 0.1
    sigma2: float = 1.0
    epsilon: str = "harmonic"
    ranges: NuisanceRanges = field(default_factory=NuisanceRanges)

    def __post_init__(self):
        if not 0 <= self.rho < 1 or self.eta < 0:
            raise ParameterError(f"need 0 <= rho < 1 and eta >= 0, got rho={self.rho}, eta={self.eta}")
        if not self.rho + self.eta < 1:
            raise ParameterError(f"rho + eta must be below 1, got {self.rho} + {self.eta}")
        if self.family not in FAMILIES:
            raise UnknownPatternError(f"unknown family {self.family!r}")
        if self.setting not in SETTINGS:
            raise UnknownPatternError(f"unknown setting {self.setting!r}; expected same_params or diff_params")
        if self.epsilon not in EPSILON_SCHEDULES:
            raise UnknownPatternError(f"unknown epsilon schedule {self.epsilon!r}")
        if self.reps < 1 or self.batches < 1:
            raise ParameterError(f"reps and batches must be >= 1, got {self.reps} x {self.batches}")
        damping(self.damping, self.depth)

    @property
    def replicates(self):
        return self.reps * self.batches

    def normalization(self, rho):
        pattern = damping(self.damping, self.depth) if self.epsilon == "exact" else None
        return NormalizationConfig(alpha=self.alpha, tau=self.tau, sigma2=self.sigma2, epsilon=self.epsilon,
                                   damping=pattern, rho=rho if pattern else None, normalize=self.normalize)


def format_cell(mean, sd):
    """Table cell "mean (sd)": mean to two decimals, sd with one significant digit."""
    if math.isnan(mean):
        return "nan (nan)"
    return f"{round(mean, 2):g} ({sd:.0e})"


@dataclass(frozen=True)
class ExperimentResult:
    batch_proportions: Tuple[float, ...]
    mean: float
    sd: float
    failures: int = 0
    spec: Optional[ExperimentSpec] = None
    wall_clock: float = 0.0

    @property
    def cell(self):
        return format_cell(self.mean, self.sd)


def _reduce(outcomes, reps, batches, spec=None, started=None):
    """Per-batch proportions over successful replicates; None marks a failed replicate."""
    proportions = []
    failures = 0
    for b in range(batches):
        chunk = outcomes[b * reps:(b + 1) * reps]
        ok = [o for o in chunk if o is not None]
        failures += len(chunk) - len(ok)
        proportions.append(sum(ok) / len(ok) if ok else float("nan"))
    arr = np.array(proportions)
    if np.all(np.isnan(arr)):
        mean, sd = float("nan"), float("nan")
    else:
        valid = arr[~np.isnan(arr)]
        mean = float(valid.mean())
        sd = float(valid.std(ddof=1)) if len(valid) > 1 else 0.0
    elapsed = time.perf_counter() - started if started is not None else 0.0
    if failures:
        logger.warning("%d of %d replicates failed and were left out of the proportions", failures, len(outcomes))
    return ExperimentResult(tuple(proportions), mean, sd, failures, spec, elapsed)


def _order(first, second):
    """1 when ``first`` is larger, 0.5 on a tie, 0 otherwise."""
    if first == second:
        return 0.5
    return 1.0 if first > second else 0.0


def _pair_configs(spec: ExperimentSpec, rng):
    if spec.setting == "same_params":
        first = draw_nuisance(rng, spec.ranges, spec.family)
        second = first
    else:
        first = draw_nuisance(rng, spec.ranges.tight(), spec.family)
        second = draw_nuisance(rng, spec.ranges.loose(), spec.family)

    def config(nuisance, rho):
        return GenConfig(branching=spec.branching, depth=spec.depth, mu_x=nuisance.mu_x, mu_y=nuisance.mu_y,
                         sigma1_sq=nuisance.sigma1_sq, sigma2_sq=nuisance.sigma2_sq, rho=rho,
                         damping=spec.damping, marginal=nuisance.marginal, seed=spec.seed)

    return config(first, spec.rho), config(second, spec.rho + spec.eta)


def _replicate(spec: ExperimentSpec, index):
    rng = make_rng(spec.seed, index)
    try:
        cfg_1, cfg_2 = _pair_configs(spec, rng)
        pair_1, pair_2 = gen_pair(cfg_1, rng), gen_pair(cfg_2, rng)
        angle_1 = td_delta_theta(pair_1, spec.normalization(cfg_1.rho)).delta_theta
        angle_2 = td_delta_theta(pair_2, spec.normalization(cfg_2.rho)).delta_theta
    except TreeCorrError as exc:
        logger.debug("Replicate %d failed: %s", index, exc)
        return None
    return _order(angle_1, angle_2)


def _map_ordered(func, count, threads):
    if threads is None or threads <= 1:
        return [func(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, range(count)))


def run_comparison(spec: ExperimentSpec, threads=None) -> ExperimentResult:
    """
    Estimate the proportion of replicates with angle(rho) > angle(rho + eta).

    Each replicate draws nuisance parameters (shared by both pairs under
    same_params), generates both pairs and runs the angle pipeline on each.
    A replicate that raises a toolkit error is counted as a failure and left
    out of its batch proportion.

    Args:
        spec (ExperimentSpec): Experiment cell
        threads (int, optional): Worker threads; results do not depend on it

    Returns:
        ExperimentResult: Batch proportions with their mean and sd
    """
    started = time.perf_counter()
    logger.info("Running rho=%.2f eta=%.2f %s %s normalize=%s: %d x %d replicates", spec.rho, spec.eta,
                spec.family, spec.setting, spec.normalize, spec.reps, spec.batches)
    outcomes = _map_ordered(lambda k: _replicate(spec, k), spec.replicates, threads)
    return _reduce(outcomes, spec.reps, spec.batches, spec, started)


def run_grid(template: ExperimentSpec, rhos: Sequence[float] = GRID_RHOS, etas: Sequence[float] = GRID_ETAS,
             threads=None):
    """Run ``template`` for every (rho, eta) with rho + eta < 1, rho-major order."""
    results = []
    for rho in rhos:
        for eta in etas:
            if rho + eta < 1 - 1e-12:
                results.append(run_comparison(replace(template, rho=rho, eta=eta), threads))
    return results


@dataclass(frozen=True)
class GenerationFit:
    mu_x: float
    mu_y: float
    sigma1: float
    sigma2: float
    rho: float
    n: int
    pooled: bool = False


@dataclass(frozen=True)
class DSPGMFit:
    """Per-generation Gaussian fit of a dataset's increments, with the generation sizes to regenerate."""

    generations: Dict[int, GenerationFit]

    def counts(self):
        return {g: fit.n for g, fit in self.generations.items()}


def _gaussian_fit(arr, n, pooled):
    mean = arr.mean(axis=0)
    sd = arr.std(axis=0)
    if not (sd[0] > 0 and sd[1] > 0):
        raise DegenerateVarianceError("degenerate variance in mimic fit")
    r = float(np.corrcoef(arr[:, 0], arr[:, 1])[0, 1])
    r = float(np.clip(r, -MAX_ABS_CORRELATION, MAX_ABS_CORRELATION))
    return GenerationFit(float(mean[0]), float(mean[1]), float(sd[0]), float(sd[1]), r, n, pooled)


def fit_dspgm(inc: IncrementsByGeneration) -> DSPGMFit:
    """
    Fit a Gaussian to each generation's increments.

    Generations with fewer than three increments reuse the fit of all
    increments pooled; correlations are clipped to +-0.999.
    """
    pooled_points = inc.pooled()
    if len(pooled_points) < 2:
        raise DegenerateVarianceError("mimic fit needs at least 2 increments")
    pooled_fit = None
    fits = {}
    for gen in inc:
        arr = inc[gen]
        if len(arr) >= MIMIC_MIN_GENERATION:
            try:
                fits[gen] = _gaussian_fit(arr, len(arr), pooled=False)
                continue
            except DegenerateVarianceError:
                logger.debug("Generation %d has zero variance; using the pooled fit", gen)
        if pooled_fit is None:
            pooled_fit = _gaussian_fit(pooled_points, len(pooled_points), pooled=True)
        fits[gen] = replace(pooled_fit, n=len(arr))
    return DSPGMFit(fits)


def gen_mimic(fit: DSPGMFit, topology: Topology, rng, anchor=(0.0, 0.0), increments="diff") -> PairedTreeData:
    """
    Draw a synthetic dataset on a DSPGM topology with the fitted per-generation Gaussians.

    Increments are drawn generation by generation in node order. Under
    "diff" node values are the anchor plus path sums; under "raw" the draws
    are the node values themselves.

    Args:
        fit (DSPGMFit): Fitted parameters; one entry per generation of ``topology``
        topology (Topology): Tree with one observation per node
        rng (numpy.random.Generator): Random stream
        anchor (tuple): Start point (X0, Y0)
        increments (str): "diff" or "raw"

    Returns:
        PairedTreeData: Mimic dataset on ``topology``
    """
    if increments not in INCREMENT_MODES:
        raise UnknownPatternError(f"unknown increment mode {increments!r}; expected raw or diff")
    generation = topology.generations
    by_gen: Dict[int, list] = {}
    for node_id in topology.node_ids:
        by_gen.setdefault(generation[node_id], []).append(node_id)
    missing = sorted(set(by_gen) - set(fit.generations))
    if missing:
        raise ParameterError(f"mimic fit has no parameters for generation(s) {missing}")

    draws = {}
    for gen in sorted(by_gen):
        g = fit.generations[gen]
        x, y = sample_bivariate_normal(g.mu_x, g.mu_y, g.sigma1, g.sigma2, g.rho, rng, size=len(by_gen[gen]))
        draws.update((node_id, (float(dx), float(dy))) for node_id, dx, dy in zip(by_gen[gen], x, y))

    values = path_values(topology, draws, anchor) if increments == "diff" else draws
    rows = [(r.node_id, r.parent_id, (values[r.node_id][0],), (values[r.node_id][1],)) for r in topology.records]
    return PairedTreeData.from_rows(rows, anchor)


@dataclass(frozen=True)
class MimicResult:
    delta_theta: ExperimentResult
    pearson: ExperimentResult
    fit_a: DSPGMFit
    fit_b: DSPGMFit


def dataset_increments(data: PairedTreeData, increments="diff") -> IncrementsByGeneration:
    """Increments of a dataset: parent differences ("diff") or the raw values ("raw")."""
    dspgm = to_dspgm(data)
    if increments == "diff":
        return extract_increments(dspgm)
    if increments == "raw":
        return raw_increments(dspgm)
    raise UnknownPatternError(f"unknown increment mode {increments!r}; expected raw or diff")


def mimic_bootstrap(data_a: PairedTreeData, data_b: PairedTreeData, reps=200, batches=1, seed=0,
                    cfg: Optional[NormalizationConfig] = None, increments="diff", threads=None) -> MimicResult:
    """
    Compare two datasets through synthetic replicas of their fitted models.

    Each dataset is fitted per generation and every replicate draws one
    mimic of A and one of B on their own DSPGM topologies. Both mimics start
    from the same point of the replicate stream, so with equal fits they
    coincide. The replicate records whether the angle of A exceeds the angle
    of B, and whether the flat Pearson r of A is below that of B; ties count
    one half.

    Args:
        data_a, data_b (PairedTreeData): Datasets to compare
        reps (int): Replicates per batch
        batches (int): Number of batches
        seed (int): Base seed; replicate k uses stream k
        cfg (NormalizationConfig, optional): Angle pipeline settings
        increments (str): "diff" or "raw"
        threads (int, optional): Worker threads

    Returns:
        MimicResult: Angle and Pearson proportions plus both fits
    """
    if reps < 1 or batches < 1:
        raise ParameterError(f"reps and batches must be >= 1, got {reps} x {batches}")
    cfg = NormalizationConfig() if cfg is None else cfg
    dspgm_a, dspgm_b = to_dspgm(data_a), to_dspgm(data_b)
    fit_a = fit_dspgm(dataset_increments(dspgm_a, increments))
    fit_b = fit_dspgm(dataset_increments(dspgm_b, increments))
    logger.info("Mimic bootstrap: %d and %d nodes, %d x %d replicates, %s increments", len(dspgm_a.topology),
                len(dspgm_b.topology), reps, batches, increments)
    started = time.perf_counter()

    def replicate(k):
        rng = make_rng(seed, k)
        start = rng.bit_generator.state
        mimic_a = gen_mimic(fit_a, dspgm_a.topology, rng, dspgm_a.anchor, increments)
        rng.bit_generator.state = start
        mimic_b = gen_mimic(fit_b, dspgm_b.topology, rng, dspgm_b.anchor, increments)
        try:
            angle = _order(td_delta_theta_increments(dataset_increments(mimic_a, increments), cfg).delta_theta,
                           td_delta_theta_increments(dataset_increments(mimic_b, increments), cfg).delta_theta)
        except TreeCorrError as exc:
            logger.debug("Mimic replicate %d angle failed: %s", k, exc)
            angle = None
        try:
            pearson = _order(pearson_flat(mimic_b), pearson_flat(mimic_a))
        except TreeCorrError as exc:
            logger.debug("Mimic replicate %d Pearson failed: %s", k, exc)
            pearson = None
        return angle, pearson

    outcomes = _map_ordered(replicate, reps * batches, threads)
    angle_result = _reduce([o[0] for o in outcomes], reps, batches, started=started)
    pearson_result = _reduce([o[1] for o in outcomes], reps, batches, started=started)
    return MimicResult(angle_result, pearson_result, fit_a, fit_b)


def summarize(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    """
    One table row per experiment.

    Args:
        results (list): ExperimentResult objects carrying their spec

    Returns:
        pandas.DataFrame: Columns ``TABLE_COLUMNS``; ``CSV_COLUMNS`` is the CSV subset
    """
    rows = []
    for res in results:
        if res.spec is None:
            raise ParameterError("summarize needs results that carry their ExperimentSpec")
        s = res.spec
        rows.append({
            "rho": s.rho, "eta": s.eta, "setting": s.setting, "normalize": s.normalize, "family": s.family,
            "mean": res.mean, "sd": res.sd, "reps": s.reps, "batches": s.batches, "seed": s.seed,
            "cell": res.cell, "failures": res.failures,
        })
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def write_results_csv(table: pd.DataFrame, path):
    """Write the machine-readable columns of a summary table."""
    table[CSV_COLUMNS].to_csv(path, index=False)
