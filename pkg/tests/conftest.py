import numpy as np
import pytest

from src.models.generators import GenConfig, gen_pair, make_rng
from src.models.tree_model import PairedTreeData


@pytest.fixture
def rng():
    return make_rng(20240601, 0)


@pytest.fixture
def small_tree():
    """Root plus two children plus one grandchild, DSPGM, anchor at the origin."""
    return PairedTreeData.from_rows([
        ("r", None, [1.0], [2.0]),
        ("a", "r", [3.0], [5.0]),
        ("b", "r", [0.0], [1.0]),
        ("c", "a", [4.0], [4.0]),
    ])


@pytest.fixture
def spgm_tree():
    """Root with a 3-step series and one child with a 2-step series."""
    return PairedTreeData.from_rows([
        ("r", None, [1.0, 2.0, 4.0], [1.0, 3.0, 4.0]),
        ("k", "r", [5.0, 7.0], [6.0, 6.5]),
    ], anchor=(0.5, -0.5))


@pytest.fixture
def binary_gaussian_pair():
    return gen_pair(GenConfig(rho=0.5, seed=11))


@pytest.fixture
def random_points():
    gen = np.random.default_rng(7)
    return gen.normal(loc=3.0, scale=1.0, size=(200, 2))
