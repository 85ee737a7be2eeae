import numpy as np
import pytest

from jumpmix.dataset import Feature, MixedSeries
from jumpmix.simulate import (
    SETUPS, SimConfig, discretize, inject_missing, load_scenario, run_benchmark, simulate,
    simulate_chain, simulate_gaussian,
)


def runs(col):
    """Lengths of the runs of True in a boolean column."""
    out, n = [], 0
    for v in col:
        if v:
            n += 1
        elif n:
            out.append(n)
            n = 0
    if n:
        out.append(n)
    return out


def test_setups():
    assert SETUPS[1] == {"mu": 1.0, "rho": 0.0}
    assert SETUPS[2]["rho"] == 0.2 and SETUPS[3]["mu"] == 0.5


class TestChain:
    def test_transition_frequencies(self):
        s = simulate_chain(100_000, 3, 0.95, seed=0)
        counts = np.zeros((3, 3))
        np.add.at(counts, (s[:-1], s[1:]), 1)
        freq = counts / counts.sum(axis=1, keepdims=True)
        expected = np.full((3, 3), 0.025)
        np.fill_diagonal(expected, 0.95)
        assert np.abs(freq - expected).max() < 0.01

    def test_absorbing(self):
        s = simulate_chain(200, 3, 1.0, seed=1)
        assert np.all(s == s[0])

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            SimConfig(rho=1.0)
        with pytest.raises(ValueError):
            SimConfig(self_prob=0.0)
        with pytest.raises(ValueError):
            SimConfig(fidelity=0.2)


class TestGaussian:
    def test_independent(self):
        y = simulate_gaussian(np.ones(20000, int), 4, rho=0.0, seed=0)
        c = np.corrcoef(y, rowvar=False)
        assert np.abs(c[~np.eye(4, dtype=bool)]).max() < 0.03
        assert np.abs(y.mean(axis=0)).max() < 0.03  # middle state has mean 0

    def test_correlated(self):
        y = simulate_gaussian(np.zeros(50000, int), 5, rho=0.2, seed=1)
        c = np.corrcoef(y, rowvar=False)
        assert np.abs(c[~np.eye(5, dtype=bool)] - 0.2).max() < 0.02
        assert np.abs(y.mean(axis=0) - 1.0).max() < 0.02


class TestDiscretize:
    def test_noiseless(self):
        states = simulate_chain(500, 3, 0.9, seed=0)
        s = discretize(np.zeros((500, 6)), states, 1.0, seed=1)
        assert s.categorical.tolist() == [False] * 3 + [True] * 3
        assert np.all(s.values[:, 3:] == states[:, None])

    def test_fidelity(self):
        states = simulate_chain(100_000, 3, 0.9, seed=0)
        s = discretize(np.zeros((100_000, 2)), states, 0.8, seed=2)
        hit = s.values[:, 1] == states
        assert abs(hit.mean() - 0.8) < 0.01
        wrong = s.values[~hit, 1]
        assert abs(np.mean((wrong - states[~hit]) % 3 == 1) - 0.5) < 0.01

    def test_chance_level(self):
        states = simulate_chain(60_000, 3, 0.9, seed=0)
        s = discretize(np.zeros((60_000, 2)), states, 1 / 3, seed=3)
        for k in range(3):
            freq = np.bincount(s.values[states == k, 1].astype(int), minlength=3)
            assert np.abs(freq / freq.sum() - 1 / 3).max() < 0.015

    def test_odd_p(self):
        s, _ = simulate(SimConfig(T=20, P=25, seed=0))
        assert (~s.categorical).sum() == 13 and s.categorical.sum() == 12

    def test_reproducible(self):
        a, ta = simulate(SimConfig(T=50, P=6, seed=9))
        b, tb = simulate(SimConfig(T=50, P=6, seed=9))
        assert np.array_equal(a.values, b.values) and np.array_equal(ta, tb)


class TestMissing:
    def base(self, T=500, P=50):
        return MixedSeries(tuple(Feature(f"x{i}") for i in range(P)), np.zeros((T, P)))

    def test_random_count(self):
        out = inject_missing(self.base(), 0.1, "random", seed=0)
        assert out.missing.sum() == 2500
        assert np.array_equal(np.isnan(out.values), out.missing)

    def test_fraction_doubles(self):
        a = inject_missing(self.base(), 0.1, "random", seed=0).missing.sum()
        b = inject_missing(self.base(), 0.2, "random", seed=0).missing.sum()
        assert b == 2 * a

    @pytest.mark.parametrize("T,frac", [(500, 0.1), (500, 0.2), (50, 0.1), (50, 0.2), (100, 0.2)])
    def test_continuous_blocks(self, T, frac):
        out = inject_missing(self.base(T, 8), frac, "continuous", seed=1)
        lo = int(np.ceil(0.05 * T))
        for p in range(8):
            col = out.missing[:, p]
            assert col.sum() == int(np.floor(frac * T))
            assert all(r >= lo for r in runs(col))
            assert not col.all()

    def test_validation(self):
        with pytest.raises(ValueError):
            inject_missing(self.base(), 0.0, "random")
        with pytest.raises(ValueError):
            inject_missing(self.base(), 0.1, "sideways")


class TestBenchmark:
    def test_small_run_deterministic(self, tmp_path):
        kw = dict(setups=(1,), T_grid=(40,), P_grid=(6,), replicates=2,
                  missing=(("none", 0.0), ("random", 0.1)), seed=5,
                  lambda_grid=(0.0, 0.5), n_init=2, max_iter=5)
        a = run_benchmark(**kw, output=tmp_path / "a.csv")
        b = run_benchmark(**kw, n_jobs=2)
        cols = [c for c in a.table.columns if c != "wall_time"]
        assert a.table[cols].equals(b.table[cols])
        assert len(a.table) == 4 and set(a.table.method) == {"jm-mix", "k-prot"}
        row = a.lookup(1, 40, 6, "k-prot", "random", 0.1)
        assert row.mean_lambda == 0 and 0 <= row.mean_imputation_error <= 1
        jm = a.records[a.records.method == "jm-mix"].ari.to_numpy()
        kp = a.records[a.records.method == "k-prot"].ari.to_numpy()
        assert np.all(jm >= kp)  # lambda = 0 is on the jm-mix grid
        assert (tmp_path / "a.csv").exists()

    def test_scenario_file(self, tmp_path):
        p = tmp_path / "s.ini"
        p.write_text("[benchmark]\nsetups = 1, mine\nT = 50, 100\nP = 10\nreplicates = 3\n"
                     "missing = none, random 0.1, continuous 0.2\nlambda_grid = 0:0.2:0.1\n"
                     "seed = 4\n\n[setup mine]\nmu = 0.7\nrho = 0.1\n")
        kw = load_scenario(p)
        assert kw["T_grid"] == [50, 100] and kw["replicates"] == 3
        assert kw["missing"] == [("none", 0.0), ("random", 0.1), ("continuous", 0.2)]
        assert kw["lambda_grid"] == [0.0, 0.1, 0.2]
        assert kw["custom_setups"] == {"mine": {"mu": 0.7, "rho": 0.1}}
