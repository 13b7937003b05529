"""
Run configuration for the command line.

Values are merged with precedence flags > environment > defaults. The
environment variables are TREECORR_ALPHA, TREECORR_TAU, TREECORR_SIGMA2,
TREECORR_EPSILON, TREECORR_SEED, TREECORR_THREADS and TREECORR_SCALE.
"""

import logging
import os
from dataclasses import dataclass, fields
from typing import Mapping, Optional

from ..exceptions import ParameterError
from .preprocessing import EPSILON_SCHEDULES, NormalizationConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "TREECORR_"

# preset -> (reps per batch, batches)
SCALE_PRESETS = {
    "smoke": (20, 3),
    "desk": (200, 20),
    "full": (1000, 100),
}


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.05
    tau: float = 0.1
    sigma2: float = 1.0
    epsilon: str = "harmonic"
    seed: int = 0
    threads: Optional[int] = None
    scale: str = "desk"

    def __post_init__(self):
        if self.epsilon not in EPSILON_SCHEDULES:
            raise ParameterError(f"epsilon must be one of {', '.join(EPSILON_SCHEDULES)}, got {self.epsilon!r}")
        # Range checks for alpha, tau and sigma2 live in NormalizationConfig.
        NormalizationConfig(alpha=self.alpha, tau=self.tau, sigma2=self.sigma2)
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.threads is not None and self.threads < 1:
            raise ParameterError(f"threads must be >= 1, got {self.threads}")
        if self.scale not in SCALE_PRESETS:
            raise ParameterError(f"scale must be one of {', '.join(SCALE_PRESETS)}, got {self.scale!r}")

    @classmethod
    def from_sources(cls, flags: Optional[Mapping] = None, environ: Optional[Mapping] = None):
        """
        Merge command-line flags over environment variables over defaults.

        Args:
            flags (dict, optional): Flag values; None entries count as unset
            environ (dict, optional): Environment; defaults to ``os.environ``

        Returns:
            RunConfig: Validated configuration
        """
        flags = flags or {}
        environ = os.environ if environ is None else environ
        values = {}
        for f in fields(cls):
            if flags.get(f.name) is not None:
                values[f.name] = flags[f.name]
                continue
            raw = environ.get(ENV_PREFIX + f.name.upper())
            if raw is None or raw == "":
                continue
            values[f.name] = _coerce(f.name, raw)
            logger.debug("Using %s%s=%s from the environment", ENV_PREFIX, f.name.upper(), raw)
        return cls(**values)

    @property
    def reps(self):
        return SCALE_PRESETS[self.scale][0]

    @property
    def batches(self):
        return SCALE_PRESETS[self.scale][1]

    @property
    def worker_threads(self):
        return self.threads or os.cpu_count() or 1

    def normalization(self, **overrides):
        """NormalizationConfig carrying this run's alpha, tau, sigma2 and epsilon."""
        base = dict(alpha=self.alpha, tau=self.tau, sigma2=self.sigma2, epsilon=self.epsilon)
        base.update(overrides)
        return NormalizationConfig(**base)


_CASTS = {"alpha": float, "tau": float, "sigma2": float, "epsilon": str, "seed": int, "threads": int, "scale": str}


def _coerce(name, raw):
    try:
        return _CASTS[name](raw.strip())
    except ValueError:
        raise ParameterError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a valid {_CASTS[name].__name__}") from None
