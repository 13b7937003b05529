"""
Seeded synthesis of paired tree-shaped datasets.

This module provides the generators behind the simulations:
- Damping patterns f(i; rho) (geometric and linear decay)
- Counter-based random streams, one per replicate
- Gaussian random walks on a full tree (one or several observations per node)
- Gaussian-copula transforms to continuous and Poisson marginals
- Equal-width / equal-frequency discretized increments

Increments are drawn Gaussian first, transformed, and only then path-summed
into node values.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ..exceptions import CopulaUnderflowError, ParameterError, UnknownPatternError
from ..utils.distributions import Family, inverse_cdf, standard_normal_cdf
from ..utils.preprocessing import DISCRETIZE_METHODS, discretize
from .tree_model import PairedTreeData, Topology

logger = logging.getLogger(__name__)

DAMPING_KINDS = ("exp", "linear")
MARGINAL_KINDS = ("gaussian", "copula") + DISCRETIZE_METHODS


def f_pattern(kind, i, rho, depth=None):
    """
    Generation-i increment correlation.

    exp: rho^i; linear: (1 - (i - 1) / depth) * rho.

    Args:
        kind (str): "exp" or "linear"
        i (int): Generation, 1 <= i <= depth
        rho (float): Correlation parameter
        depth (int, optional): Number of generations; required for linear

    Returns:
        float: Correlation f(i; rho)
    """
    if kind not in DAMPING_KINDS:
        raise UnknownPatternError(f"unknown damping pattern {kind!r}; expected exp or linear")
    if i < 1 or (depth is not None and i > depth):
        raise ParameterError(f"generation {i} outside [1, {depth}]")
    if kind == "exp":
        return rho ** i
    if depth is None:
        raise ParameterError("linear damping needs the tree depth")
    return (1.0 - (i - 1) / depth) * rho


def damping(kind, depth=None):
    """Bind a damping pattern to a depth, giving the callable f(i, rho)."""
    if kind not in DAMPING_KINDS:
        raise UnknownPatternError(f"unknown damping pattern {kind!r}; expected exp or linear")
    if kind == "linear" and depth is None:
        raise ParameterError("linear damping needs the tree depth")

    def pattern(i, rho):
        return f_pattern(kind, i, rho, depth)

    pattern.kind = kind
    pattern.depth = depth
    return pattern


def make_rng(seed, stream=0):
    """
    Random generator for one replicate.

    Philox4x64-10 keyed by the 64-bit seed; the stream id occupies the upper
    128 bits of the 256-bit counter, so each stream owns a disjoint block of
    2^128 counter values.
    """
    seed, stream = int(seed), int(stream)
    if not 0 <= seed < 2 ** 64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= stream < 2 ** 128:
        raise ParameterError(f"stream id out of range: {stream}")
    return np.random.Generator(np.random.Philox(key=seed, counter=stream << 128))


def sample_bivariate_normal(mu1, mu2, sigma1, sigma2, r, rng, size=None):
    """
    Draw from a bivariate normal via the lower-triangular covariance factor.

    Args:
        mu1, mu2 (float): Means
        sigma1, sigma2 (float): Standard deviations
        r (float): Correlation, |r| < 1
        rng (numpy.random.Generator): Random stream
        size (int, optional): Number of draws; None draws one pair

    Returns:
        tuple: (x, y), floats or arrays of length ``size``
    """
    if not abs(r) < 1:
        raise ParameterError(f"correlation must satisfy |r| < 1, got {r}")
    n = 1 if size is None else int(size)
    z = rng.standard_normal((n, 2))
    x = mu1 + sigma1 * z[:, 0]
    y = mu2 + sigma2 * (r * z[:, 0] + math.sqrt(1.0 - r * r) * z[:, 1])
    if size is None:
        return float(x[0]), float(y[0])
    return x, y


def _check_phi(phi, axis):
    bad = np.flatnonzero((phi <= 0.0) | (phi >= 1.0))
    if bad.size:
        k = int(bad[0])
        raise CopulaUnderflowError(f"standard normal CDF rounded to {phi[k]:g} for sample {k} ({axis} coordinate)")


def _uniforms(deltas, mu_x, mu_y, sigma1, sigma2):
    arr = np.asarray(deltas, dtype=float).reshape(-1, 2)
    phi_x = standard_normal_cdf((arr[:, 0] - mu_x) / sigma1)
    phi_y = standard_normal_cdf((arr[:, 1] - mu_y) / sigma2)
    _check_phi(phi_x, "x")
    _check_phi(phi_y, "y")
    return phi_x, phi_y


def copula_continuous(deltas, mu_x, mu_y, sigma1, sigma2, family: Family, family_y: Optional[Family] = None):
    """
    Push Gaussian increments through the Gaussian copula onto a continuous family.

    Each coordinate is standardized, mapped by the standard normal CDF and then
    by the target inverse CDF, which keeps the rank dependence of the source.

    Args:
        deltas (array-like): (n, 2) Gaussian increments
        mu_x, mu_y (float): Source means
        sigma1, sigma2 (float): Source standard deviations
        family (Family): Target marginal of x (and of y unless ``family_y`` is given)
        family_y (Family, optional): Target marginal of y

    Returns:
        numpy.ndarray: (n, 2) transformed increments

    Raises:
        CopulaUnderflowError: a CDF value rounded to exactly 0 or 1
    """
    family_y = family if family_y is None else family_y
    for fam in (family, family_y):
        if not fam.is_continuous:
            raise ParameterError(f"copula_continuous needs a continuous family, got {fam.tag}")
    phi_x, phi_y = _uniforms(deltas, mu_x, mu_y, sigma1, sigma2)
    return np.column_stack([np.atleast_1d(inverse_cdf(family, phi_x)), np.atleast_1d(inverse_cdf(family_y, phi_y))])


def copula_poisson(deltas, mu_x, mu_y, sigma1, sigma2, mean, mean_y=None):
    """
    Gaussian copula onto Poisson marginals: x with F(x) <= Phi < F(x + 1), and x = 0 below F(0).

    Returns:
        numpy.ndarray: (n, 2) non-negative integer-valued increments (float dtype)
    """
    mean_y = mean if mean_y is None else mean_y
    fam_x, fam_y = Family.poisson(mean), Family.poisson(mean_y)
    phi_x, phi_y = _uniforms(deltas, mu_x, mu_y, sigma1, sigma2)
    return np.column_stack([np.atleast_1d(inverse_cdf(fam_x, phi_x)), np.atleast_1d(inverse_cdf(fam_y, phi_y))])


@dataclass(frozen=True)
class Marginal:
    """How Gaussian increments are turned into observed increments."""

    kind: str = "gaussian"
    family_x: Optional[Family] = None
    family_y: Optional[Family] = None
    bins: int = 10

    def __post_init__(self):
        if self.kind not in MARGINAL_KINDS:
            raise UnknownPatternError(f"unknown marginal {self.kind!r}")
        if self.kind == "copula" and (self.family_x is None or self.family_y is None):
            raise ParameterError("copula marginal needs a family per coordinate")
        if self.kind in DISCRETIZE_METHODS and self.bins < 2:
            raise ParameterError(f"bins must be >= 2, got {self.bins}")

    @classmethod
    def gaussian(cls):
        return cls("gaussian")

    @classmethod
    def copula(cls, family_x, family_y=None):
        return cls("copula", family_x, family_x if family_y is None else family_y)

    @classmethod
    def equal_width(cls, bins=10):
        return cls("equal_width", bins=bins)

    @classmethod
    def equal_freq(cls, bins=10):
        return cls("equal_freq", bins=bins)

    @property
    def label(self):
        if self.kind == "copula":
            return self.family_x.tag
        return self.kind

    def apply(self, deltas, mu_x, mu_y, sigma1, sigma2):
        if self.kind == "gaussian":
            return np.asarray(deltas, dtype=float)
        if self.kind in DISCRETIZE_METHODS:
            return discretize(deltas, self.kind, self.bins).astype(float)
        if self.family_x.tag == "poisson":
            return copula_poisson(deltas, mu_x, mu_y, sigma1, sigma2, self.family_x["mean"], self.family_y["mean"])
        return copula_continuous(deltas, mu_x, mu_y, sigma1, sigma2, self.family_x, self.family_y)


@dataclass(frozen=True)
class GenConfig:
    """
    Parameters of one synthetic paired tree.

    ``obs_per_node`` is either one count for every node or one count per
    generation; counts above 1 give a random walk inside each node.
    """

    branching: int = 2
    depth: int = 7
    obs_per_node: Union[int, Tuple[int, ...]] = 1
    mu_x: float = 2.0
    mu_y: float = 2.0
    sigma1_sq: float = 1.5
    sigma2_sq: float = 1.5
    rho: float = 0.5
    damping: str = "exp"
    anchor: Tuple[float, float] = (0.0, 0.0)
    marginal: Marginal = field(default_factory=Marginal.gaussian)
    seed: int = 0

    def __post_init__(self):
        if self.branching < 1:
            raise ParameterError(f"branching must be >= 1, got {self.branching}")
        if self.depth < 1:
            raise ParameterError(f"depth must be >= 1, got {self.depth}")
        if not (self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise ParameterError("variances must be positive")
        if not abs(self.rho) < 1:
            raise ParameterError(f"rho must lie in (-1, 1), got {self.rho}")
        counts = self.observation_counts()
        if len(counts) != self.depth or min(counts) < 1:
            raise ParameterError(f"obs_per_node must be >= 1 per generation, one entry per generation; got {self.obs_per_node}")
        pattern = self.pattern
        for i in range(1, self.depth + 1):
            if not abs(pattern(i, self.rho)) < 1:
                raise ParameterError(f"f({i}; {self.rho}) leaves (-1, 1)")

    @property
    def pattern(self):
        return damping(self.damping, self.depth)

    def observation_counts(self):
        if isinstance(self.obs_per_node, int):
            return (self.obs_per_node,) * self.depth
        return tuple(int(t) for t in self.obs_per_node)

    @property
    def node_count(self):
        return sum(self.branching ** (i - 1) for i in range(1, self.depth + 1))


def full_tree(branching, depth) -> Topology:
    """Full tree in breadth-first order; ids are dotted paths from the root "1"."""
    pairs = [("1", None)]
    frontier = ["1"]
    for _ in range(depth - 1):
        nxt = []
        for parent in frontier:
            for c in range(1, branching + 1):
                child = f"{parent}.{c}"
                pairs.append((child, parent))
                nxt.append(child)
        frontier = nxt
    return Topology.from_parents(pairs)


def gen_increments(config: GenConfig, topology: Topology, rng) -> Dict[str, np.ndarray]:
    """
    Draw the observed increments of every node.

    Generation-i Gaussian increments have correlation f(i; rho); all of them
    are drawn first, in breadth-first node order, then passed through the
    marginal transform together.

    Returns:
        dict: Node id -> (T, 2) array of increments
    """
    s1, s2 = math.sqrt(config.sigma1_sq), math.sqrt(config.sigma2_sq)
    counts = config.observation_counts()
    generation = topology.generations
    pattern = config.pattern

    by_gen = {}
    for node_id in topology.node_ids:
        by_gen.setdefault(generation[node_id], []).append(node_id)

    order, blocks = [], []
    for i in sorted(by_gen):
        nodes = by_gen[i]
        t = counts[i - 1]
        x, y = sample_bivariate_normal(config.mu_x, config.mu_y, s1, s2, pattern(i, config.rho), rng,
                                       size=len(nodes) * t)
        blocks.append(np.column_stack([x, y]))
        order.extend((node_id, t) for node_id in nodes)

    gaussian = np.vstack(blocks)
    observed = config.marginal.apply(gaussian, config.mu_x, config.mu_y, s1, s2)

    increments, start = {}, 0
    for node_id, t in order:
        increments[node_id] = observed[start:start + t]
        start += t
    return increments


def gen_pair(config: GenConfig, rng=None) -> PairedTreeData:
    """
    Generate one paired tree dataset.

    Node values are the anchor plus the path sum of increments; inside a node
    with several observations each one steps from the previous, the first from
    the parent's last observation.

    Args:
        config (GenConfig): Tree shape, model and marginal
        rng (numpy.random.Generator, optional): Random stream; defaults to ``make_rng(config.seed)``

    Returns:
        PairedTreeData: Full ``branching``-ary tree of ``depth`` generations
    """
    rng = make_rng(config.seed) if rng is None else rng
    topology = full_tree(config.branching, config.depth)
    increments = gen_increments(config, topology, rng)

    last = {}
    rows = []
    for record in topology.records:
        start = np.asarray(config.anchor, dtype=float) if record.parent_id is None else last[record.parent_id]
        walk = start + np.cumsum(increments[record.node_id], axis=0)
        last[record.node_id] = walk[-1]
        rows.append((record.node_id, record.parent_id, walk[:, 0], walk[:, 1]))

    logger.debug("Generated %d-node tree (rho=%.3f, marginal=%s)", len(topology), config.rho, config.marginal.label)
    return PairedTreeData.from_rows(rows, config.anchor)
