import pytest

from src.exceptions import ParameterError
from src.utils.config import SCALE_PRESETS, RunConfig


def test_defaults():
    cfg = RunConfig.from_sources({}, {})
    assert (cfg.alpha, cfg.tau, cfg.sigma2, cfg.epsilon, cfg.seed) == (0.05, 0.1, 1.0, "harmonic", 0)
    assert (cfg.reps, cfg.batches) == SCALE_PRESETS["desk"] == (200, 20)
    assert cfg.worker_threads >= 1


def test_flags_override_environment():
    env = {"TREECORR_TAU": "0.5", "TREECORR_SEED": "7", "TREECORR_SCALE": "smoke"}
    cfg = RunConfig.from_sources({"tau": 0.2, "seed": None}, env)
    assert cfg.tau == 0.2
    assert cfg.seed == 7
    assert (cfg.reps, cfg.batches) == (20, 3)


def test_empty_environment_value_is_unset():
    assert RunConfig.from_sources({}, {"TREECORR_ALPHA": ""}).alpha == 0.05


@pytest.mark.parametrize("env", [
    {"TREECORR_SEED": "many"},
    {"TREECORR_ALPHA": "1.5"},
    {"TREECORR_THREADS": "0"},
    {"TREECORR_SCALE": "huge"},
    {"TREECORR_EPSILON": "geometric"},
])
def test_bad_environment_values(env):
    with pytest.raises(ParameterError):
        RunConfig.from_sources({}, env)


def test_normalization_overrides():
    cfg = RunConfig(tau=0.3, threads=2)
    norm = cfg.normalization(sign_flip=True)
    assert norm.tau == 0.3 and norm.sign_flip
    assert cfg.worker_threads == 2
