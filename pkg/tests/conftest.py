import numpy as np
import pytest

from jumpmix.dataset import Feature, MixedSeries


def mixed_random(rng, T, n_cont, n_cat, levels=3):
    """Random complete mixed series with ``n_cont`` continuous and ``n_cat`` categorical columns."""
    lv = tuple(chr(ord("A") + i) for i in range(levels))
    feats = tuple(Feature(f"c{i}") for i in range(n_cont)) + tuple(
        Feature(f"k{i}", lv) for i in range(n_cat))
    cont = rng.normal(size=(T, n_cont))
    cat = rng.integers(levels, size=(T, n_cat)).astype(float)
    return MixedSeries(feats, np.column_stack([cont, cat]) if n_cat else cont)


def plateaus(T=60, gap=5.0, noise=0.1, seed=0):
    """Two-plateau series (continuous + categorical) with its true states."""
    rng = np.random.default_rng(seed)
    truth = (np.arange(T) >= T // 2).astype(int)
    x = gap * truth + noise * rng.standard_normal(T)
    y = -gap * truth + noise * rng.standard_normal(T)
    cat = truth.astype(float)
    feats = (Feature("x"), Feature("y"), Feature("k", ("lo", "hi")))
    return MixedSeries(feats, np.column_stack([x, y, cat])), truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
