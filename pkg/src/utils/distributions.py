"""
Scalar distribution kit for the copula generators.

CDFs and inverse CDFs for the marginal families used by the simulations:
- Normal (mu, sigma)
- Gamma (shape, scale), via the regularized lower incomplete gamma
- F (d1, d2), via the regularized incomplete beta
- Student-t (nu, loc, scale) for real nu > 0
- Poisson (mean), with the bracketing inverse F(x) <= p < F(x + 1)

Every function accepts scalars or numpy arrays.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import special, stats
from scipy.optimize import brentq

from ..exceptions import ConvergenceError, ParameterError, UnknownPatternError

logger = logging.getLogger(__name__)

CONTINUOUS_TAGS = ("normal", "gamma", "f", "student_t")
ALL_TAGS = CONTINUOUS_TAGS + ("poisson",)

# name -> (lower bound, strict) per family; None means unbounded
_PARAMETER_DOMAINS = {
    "normal": {"mu": None, "sigma": 0.0},
    "gamma": {"shape": 0.0, "scale": 0.0},
    "f": {"d1": 0.0, "d2": 0.0},
    "student_t": {"nu": 0.0, "loc": None, "scale": 0.0},
    "poisson": {"mean": 0.0},
}

ROUND_TRIP_TOL = 1e-12
MAX_BRACKET_DOUBLINGS = 200


@dataclass(frozen=True)
class Family:
    """A marginal distribution: a tag plus its parameters."""

    tag: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in _PARAMETER_DOMAINS:
            raise UnknownPatternError(f"unknown family {self.tag!r}; expected one of {', '.join(ALL_TAGS)}")
        domain = _PARAMETER_DOMAINS[self.tag]
        if set(self.params) != set(domain):
            raise ParameterError(f"{self.tag} needs parameters {sorted(domain)}, got {sorted(self.params)}")
        for name, lower in domain.items():
            value = float(self.params[name])
            if not math.isfinite(value) or (lower is not None and value <= lower):
                raise ParameterError(f"{self.tag} parameter {name}={value} out of range")

    @classmethod
    def normal(cls, mu=0.0, sigma=1.0):
        return cls("normal", {"mu": mu, "sigma": sigma})

    @classmethod
    def gamma(cls, shape, scale=1.0):
        return cls("gamma", {"shape": shape, "scale": scale})

    @classmethod
    def f(cls, d1, d2):
        return cls("f", {"d1": d1, "d2": d2})

    @classmethod
    def student_t(cls, nu, loc=0.0, scale=1.0):
        return cls("student_t", {"nu": nu, "loc": loc, "scale": scale})

    @classmethod
    def poisson(cls, mean):
        return cls("poisson", {"mean": mean})

    @property
    def is_continuous(self):
        return self.tag in CONTINUOUS_TAGS

    def __getitem__(self, name):
        return float(self.params[name])

    def describe(self):
        inner = ", ".join(f"{k}={float(v):g}" for k, v in self.params.items())
        return f"{self.tag}({inner})"


def standard_normal_cdf(x):
    """Phi(x)."""
    return special.ndtr(x)


def standard_normal_quantile(p):
    """Phi^{-1}(p) for p in (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise ParameterError("standard normal quantile needs p strictly inside (0, 1)")
    result = special.ndtri(p)
    return float(result) if result.ndim == 0 else result


def cdf(family: Family, x):
    """
    Cumulative distribution function of a family.

    Args:
        family (Family): Marginal distribution
        x (float or numpy.ndarray): Evaluation point(s)

    Returns:
        float or numpy.ndarray: Probabilities in [0, 1]
    """
    x = np.asarray(x, dtype=float)
    tag = family.tag
    if tag == "normal":
        out = special.ndtr((x - family["mu"]) / family["sigma"])
    elif tag == "gamma":
        out = special.gammainc(family["shape"], np.maximum(x, 0.0) / family["scale"])
    elif tag == "f":
        d1, d2 = family["d1"], family["d2"]
        xp = np.maximum(x, 0.0)
        out = special.betainc(d1 / 2.0, d2 / 2.0, d1 * xp / (d1 * xp + d2))
    elif tag == "student_t":
        out = special.stdtr(family["nu"], (x - family["loc"]) / family["scale"])
    else:
        k = np.floor(x)
        out = np.where(k < 0, 0.0, special.pdtr(np.maximum(k, 0.0), family["mean"]))
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _initial_guess(family, p):
    tag = family.tag
    if tag == "normal":
        return family["mu"] + family["sigma"] * special.ndtri(p)
    if tag == "gamma":
        return family["scale"] * special.gammaincinv(family["shape"], p)
    if tag == "f":
        d1, d2 = family["d1"], family["d2"]
        b = special.betaincinv(d1 / 2.0, d2 / 2.0, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d2 * b / (d1 * (1.0 - b))
    return family["loc"] + family["scale"] * special.stdtrit(family["nu"], p)


def _bracket(family, p, guess):
    """Find lo <= hi with cdf(lo) <= p <= cdf(hi), starting from the guess."""
    positive_support = family.tag in ("gamma", "f")
    if not math.isfinite(guess):
        guess = 1.0 if positive_support else 0.0
    width = max(1.0, abs(guess))
    lo, hi = guess - width, guess + width
    if positive_support:
        lo = max(lo, 0.0)
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if cdf(family, lo) <= p <= cdf(family, hi):
            return lo, hi
        width *= 2.0
        if cdf(family, hi) < p:
            hi = guess + width
        if cdf(family, lo) > p:
            lo = max(guess - width, 0.0) if positive_support else guess - width
    raise ConvergenceError(f"could not bracket the {family.describe()} quantile at p={p!r}")


def _polish(family, p, guess):
    lo, hi = _bracket(family, p, guess)
    if lo == hi:
        return lo
    root, info = brentq(lambda v: cdf(family, v) - p, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                        maxiter=500, full_output=True, disp=False)
    if not info.converged:
        raise ConvergenceError(f"{family.describe()} quantile at p={p!r} did not converge: {info.flag}")
    return root


def _poisson_bracket_inverse(mean, p):
    """Integer x with F(x) <= p < F(x + 1); x = 0 when p < F(0)."""
    x = np.maximum(stats.poisson.ppf(p, mean), 0.0)
    # ppf is the smallest x with F(x) >= p, one above the bracket unless F(x) == p.
    x = np.where(special.pdtr(x, mean) > p, x - 1.0, x)
    return np.maximum(x, 0.0)


def inverse_cdf(family: Family, p):
    """
    Quantile function of a family.

    Continuous families start from a library inverse and are polished with a
    bracketed Brent root-find wherever |cdf(x) - p| exceeds the round-trip
    tolerance. Poisson follows the bracketing rule F(x) <= p < F(x + 1).

    Args:
        family (Family): Marginal distribution
        p (float or numpy.ndarray): Probabilities; (0, 1) for continuous
            families, [0, 1) for Poisson

    Returns:
        float or numpy.ndarray: Quantiles

    Raises:
        ParameterError: p outside the domain
        ConvergenceError: the numerical inversion failed
    """
    p = np.asarray(p, dtype=float)
    if np.any(np.isnan(p)):
        raise ParameterError("probability is NaN")

    if family.tag == "poisson":
        if np.any((p < 0.0) | (p >= 1.0)):
            raise ParameterError("poisson quantile needs p in [0, 1)")
        out = _poisson_bracket_inverse(family["mean"], p)
        return float(out) if out.ndim == 0 else out

    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ParameterError(f"{family.tag} quantile needs p strictly inside (0, 1)")

    guess = np.atleast_1d(np.asarray(_initial_guess(family, p), dtype=float)).copy()
    flat_p = np.atleast_1d(p)
    with np.errstate(invalid="ignore"):
        residual = np.abs(np.atleast_1d(cdf(family, guess)) - flat_p)
    needs_polish = ~np.isfinite(guess) | ~(residual <= ROUND_TRIP_TOL)
    if np.any(needs_polish):
        logger.debug("Polishing %d %s quantiles by root-finding", int(needs_polish.sum()), family.tag)
        for idx in np.flatnonzero(needs_polish):
            guess[idx] = _polish(family, float(flat_p[idx]), float(guess[idx]))
    out = guess.reshape(p.shape)
    return float(out) if out.ndim == 0 else out
