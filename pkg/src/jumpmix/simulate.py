"""Synthetic mixed-type regime data, missing-data injection and the Monte Carlo benchmark."""
from __future__ import annotations

import configparser
import math
import os
import time
import zlib
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .dataset import Feature, MixedSeries, compute_context
from .jumpmodel import imputation_error
from .metrics import ari
from .selection import DEFAULT_LAMBDA_GRID, ari_path, best_by_ari

__all__ = [
    "SimConfig", "SETUPS", "simulate_chain", "simulate_gaussian", "discretize", "simulate",
    "inject_missing", "ari", "BenchResult", "run_benchmark", "load_scenario",
]

SCHEMES = ("none", "random", "continuous")
METHODS = ("jm-mix", "k-prot")


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the three-state Gaussian HMM with half the features made categorical."""

    T: int = 500
    P: int = 50
    K_true: int = 3
    mu: float = 1.0
    rho: float = 0.0
    self_prob: float = 0.95
    fidelity: float = 0.80
    seed: int | None = None

    def __post_init__(self):
        if self.P < 2:
            raise ValueError(f"P must be at least 2, got {self.P}")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if not 0 < self.self_prob <= 1:
            raise ValueError(f"self_prob must lie in (0, 1], got {self.self_prob}")
        if not 1.0 / self.K_true <= self.fidelity <= 1:
            raise ValueError(f"fidelity must lie in [1/K, 1], got {self.fidelity}")


SETUPS = {
    1: dict(mu=1.0, rho=0.0),
    2: dict(mu=1.0, rho=0.20),
    3: dict(mu=0.50, rho=0.0),
}


def simulate_chain(T: int, K_true: int = 3, self_prob: float = 0.95, seed=None) -> np.ndarray:
    """First-order Markov chain with uniform start and equal off-diagonal transitions.

    Returns 0-based states of length ``T``.
    """
    rng = np.random.default_rng(seed)
    off = (1.0 - self_prob) / (K_true - 1) if K_true > 1 else 0.0
    trans = np.full((K_true, K_true), off)
    np.fill_diagonal(trans, self_prob)
    cum = np.cumsum(trans, axis=1)
    u = rng.random(T)
    s = np.empty(T, np.int64)
    s[0] = min(int(u[0] * K_true), K_true - 1)
    for t in range(1, T):
        s[t] = min(int(np.searchsorted(cum[s[t - 1]], u[t], side="right")), K_true - 1)
    return s


def simulate_gaussian(states, P: int, mu: float = 1.0, rho: float = 0.0, seed=None,
                      state_means=None) -> np.ndarray:
    """Rows ``N_P(m_{s_t} 1, Sigma)`` with unit variances and common correlation ``rho``.

    State means default to ``(mu, 0, -mu)``.
    """
    states = np.asarray(states, np.int64)
    if P > 1 and not -1.0 / (P - 1) < rho < 1:
        raise ValueError(f"rho={rho} does not give a positive-definite covariance for P={P}")
    means = np.asarray(state_means if state_means is not None else (mu, 0.0, -mu), float)
    if states.size and states.max() >= means.size:
        raise ValueError("more states than state means")
    cov = np.full((P, P), rho)
    np.fill_diagonal(cov, 1.0)
    chol = np.linalg.cholesky(cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((states.size, P))
    return means[states][:, None] + z @ chol.T


def discretize(matrix, states, fidelity: float = 0.80, seed=None, K_true: int = 3) -> MixedSeries:
    """Keep the first ceil(P/2) columns continuous and replace the other floor(P/2)
    with categorical draws.

    Each categorical cell equals the current state with probability ``fidelity``
    and each other level with probability ``(1 - fidelity) / (K_true - 1)``.
    Levels are labeled "1".."K_true".
    """
    matrix = np.asarray(matrix, float)
    states = np.asarray(states, np.int64)
    T, P = matrix.shape
    half = P - P // 2
    rng = np.random.default_rng(seed)
    keep = rng.random((T, P - half)) < fidelity
    # uniform over the K_true - 1 other levels
    shift = rng.integers(1, K_true, size=(T, P - half))
    cat = np.where(keep, states[:, None], (states[:, None] + shift) % K_true)
    levels = tuple(str(i + 1) for i in range(K_true))
    features = tuple(Feature(f"y{p + 1}") for p in range(half)) + tuple(
        Feature(f"y{p + 1}", levels) for p in range(half, P)
    )
    return MixedSeries(features, np.column_stack([matrix[:, :half], cat.astype(float)]))


def simulate(config: SimConfig, seed=None) -> tuple[MixedSeries, np.ndarray]:
    """Draw ``(series, true_states)`` for one configuration."""
    seed = config.seed if seed is None else seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_chain, s_gauss, s_cat = ss.spawn(3)
    states = simulate_chain(config.T, config.K_true, config.self_prob, s_chain)
    means = (config.mu, 0.0, -config.mu) if config.K_true == 3 else np.linspace(
        config.mu, -config.mu, config.K_true)
    y = simulate_gaussian(states, config.P, config.mu, config.rho, s_gauss, state_means=means)
    return discretize(y, states, config.fidelity, s_cat, config.K_true), states


def _block_lengths(m: int, lo: int, hi: int, rng) -> list[int]:
    # lengths in [lo, hi] summing exactly to m
    if m < lo:
        return [m] if m > 0 else []
    out, remaining = [], m
    while remaining > 0:
        options = list(range(lo, min(hi, remaining - lo) + 1))
        if lo <= remaining <= hi:
            options.append(remaining)
        if not options:
            # remaining in (hi, hi + lo): split as evenly as possible
            options = [remaining // 2]
        length = int(rng.choice(options))
        out.append(length)
        remaining -= length
    return out


def inject_missing(series: MixedSeries, fraction: float, scheme: str = "random", seed=None) -> MixedSeries:
    """Blank a ``fraction`` of the cells.

    ``random`` picks floor(fraction * T * P) cells uniformly without replacement.
    ``continuous`` removes, per feature, floor(fraction * T) cells as
    non-overlapping contiguous blocks whose lengths lie in
    [ceil(0.05 T), ceil(0.15 T)]. No feature is ever left without an observed value.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    T, P = series.shape
    rng = np.random.default_rng(seed)
    mask = np.array(series.missing)
    if scheme == "random":
        target = math.floor(fraction * T * P)
        if target < 1:
            raise ValueError("fraction * T * P must be at least 1")
        need = target - int(mask.sum())
        observed = np.flatnonzero(~mask.ravel())
        if need > 0:
            for _ in range(100):
                pick = rng.choice(observed, size=need, replace=False)
                trial = mask.ravel().copy()
                trial[pick] = True
                trial = trial.reshape(T, P)
                if not trial.all(axis=0).any():
                    mask = trial
                    break
            else:
                raise ValueError("cannot place the random gaps without emptying a feature")
    elif scheme == "continuous":
        m = math.floor(fraction * T)
        if m < 1:
            raise ValueError("fraction * T must be at least 1")
        lo, hi = math.ceil(0.05 * T), math.ceil(0.15 * T)
        for p in range(P):
            lengths = _block_lengths(m, lo, hi, rng)
            free = T - sum(lengths)
            # random composition of the free cells into len(lengths) + 1 gaps
            cuts = np.sort(rng.choice(free + len(lengths), size=len(lengths), replace=False))
            gaps = np.diff(np.concatenate([[-1], cuts])) - 1
            pos = 0
            for gap, length in zip(gaps, lengths):
                pos += int(gap)
                mask[pos:pos + length, p] = True
                pos += length
        if mask.all(axis=0).any():
            raise ValueError("continuous gaps would empty a feature")
    else:
        raise ValueError(f"unknown missing-data scheme {scheme!r}")
    return series.with_mask(mask)


@dataclass(frozen=True)
class Cell:
    setup: str
    config: SimConfig
    scheme: str = "none"
    fraction: float = 0.0


def _seed(master: int, *parts) -> np.random.SeedSequence:
    key = [int(master)] + [zlib.crc32(str(p).encode()) for p in parts]
    return np.random.SeedSequence(key)


def _run_replicate(cell: Cell, rep: int, master: int, lambda_grid, n_init, max_iter, methods):
    cfg = cell.config
    t0 = time.perf_counter()
    data_seed = _seed(master, "data", cell.setup, cfg.T, cfg.P, rep)
    truth_series, truth = simulate(cfg, data_seed)
    series = truth_series
    if cell.scheme != "none":
        series = inject_missing(truth_series, cell.fraction, cell.scheme,
                                _seed(master, "mask", cell.setup, cfg.T, cfg.P, cell.scheme,
                                      cell.fraction, rep))
    fit_seed = int(_seed(master, "fit", cell.setup, cfg.T, cfg.P, cell.scheme, cell.fraction,
                         rep).generate_state(1)[0])
    grid = sorted(set(lambda_grid) | ({0.0} if "k-prot" in methods else set()))
    if "jm-mix" not in methods:
        grid = [0.0]
    path = ari_path(series, truth, cfg.K_true, grid, n_init, max_iter, fit_seed)
    chosen = {}
    if "jm-mix" in methods:
        chosen["jm-mix"] = best_by_ari([e for e in path if e[0] in set(lambda_grid)])
    if "k-prot" in methods:
        chosen["k-prot"] = next(e for e in path if e[0] == 0.0)
    ref_ctx = compute_context(truth_series)
    out = []
    for method, (lam, score, res) in chosen.items():
        err = np.nan
        if cell.scheme != "none":
            err = imputation_error(truth_series, res.imputed, series.missing, ref_ctx)
        out.append({"method": method, "rep": rep, "ari": score, "lambda": lam,
                    "imputation_error": err})
    elapsed = time.perf_counter() - t0
    for row in out:
        row["seconds"] = elapsed / len(out)
    return out


BENCH_COLUMNS = ["setup", "T", "P", "method", "missing_scheme", "fraction", "mean_ari", "sd_ari",
                 "mean_imputation_error", "sd_imputation_error", "mean_lambda", "replicates",
                 "wall_time"]


@dataclass
class BenchResult:
    """Aggregated table (one row per cell and method) plus the per-replicate records."""

    table: pd.DataFrame
    records: pd.DataFrame = field(repr=False)

    def to_csv(self, path=None):
        return self.table.to_csv(path, index=False, float_format="%.6f")

    def lookup(self, setup, T, P, method, scheme="none", fraction=0.0) -> pd.Series:
        t = self.table
        row = t[(t.setup == str(setup)) & (t["T"] == T) & (t["P"] == P) & (t.method == method)
                & (t.missing_scheme == scheme) & np.isclose(t.fraction, fraction)]
        if len(row) != 1:
            raise KeyError((setup, T, P, method, scheme, fraction))
        return row.iloc[0]


def _sd(x: pd.Series) -> float:
    x = x.dropna()
    return float(x.std(ddof=1)) if len(x) > 1 else np.nan


def run_benchmark(
    setups=(1,),
    T_grid=(50, 100, 500),
    P_grid=(25, 50, 75),
    replicates: int = 100,
    methods=METHODS,
    missing=(("none", 0.0),),
    seed: int = 0,
    n_jobs: int = 1,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    n_init: int = 10,
    max_iter: int = 10,
    output: str | os.PathLike | None = None,
    custom_setups: dict | None = None,
) -> BenchResult:
    """Monte Carlo comparison of the jump model against k-prototypes on simulated data.

    For every (setup, T, P, missing scheme) cell and replicate a dataset is
    simulated, gaps are optionally injected, the jump model's lambda is chosen
    by maximal ARI against the true states over ``lambda_grid`` and
    k-prototypes is the lambda = 0 fit. Seeds depend on the master seed and the
    cell/replicate identity only, so ``n_jobs`` never changes the numbers.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    methods = tuple(m.lower() for m in methods)
    bad = set(methods) - set(METHODS)
    if bad:
        raise ValueError(f"unknown methods {sorted(bad)}")
    setup_params = {str(k): v for k, v in SETUPS.items()}
    setup_params.update({str(k): v for k, v in (custom_setups or {}).items()})
    cells = []
    for setup in setups:
        params = setup_params[str(setup)]
        for T in T_grid:
            for P in P_grid:
                cfg = SimConfig(T=int(T), P=int(P), **params)
                for scheme, frac in missing:
                    cells.append(Cell(str(setup), cfg, scheme, float(frac) if scheme != "none" else 0.0))
    tasks = [(c, r) for c in cells for r in range(replicates)]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_replicate)(c, r, seed, tuple(lambda_grid), n_init, max_iter, methods)
        for c, r in tasks
    )
    records = []
    for (cell, _), rows in zip(tasks, results):
        for row in rows:
            records.append({"setup": cell.setup, "T": cell.config.T, "P": cell.config.P,
                            "missing_scheme": cell.scheme, "fraction": cell.fraction, **row})
    rec = pd.DataFrame(records)
    keys = ["setup", "T", "P", "method", "missing_scheme", "fraction"]
    rows = []
    for key, g in rec.groupby(keys, sort=False):
        rows.append(dict(zip(keys, key)) | {
            "mean_ari": g.ari.mean(), "sd_ari": _sd(g.ari),
            "mean_imputation_error": g.imputation_error.mean() if g.imputation_error.notna().any() else np.nan,
            "sd_imputation_error": _sd(g.imputation_error),
            "mean_lambda": g["lambda"].mean(), "replicates": len(g),
            "wall_time": g.seconds.sum(),
        })
    result = BenchResult(pd.DataFrame(rows, columns=BENCH_COLUMNS), rec)
    if output is not None:
        result.to_csv(output)
    return result


def _floats(text: str) -> list[float]:
    text = text.strip()
    if ":" in text and "," not in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(round((stop - start) / step))
        return [round(start + i * step, 10) for i in range(n + 1)]
    return [float(v) for v in text.split(",") if v.strip()]


def load_scenario(path) -> dict:
    """Read a benchmark scenario file into :func:`run_benchmark` keyword arguments.

    INI grammar::

        [benchmark]
        setups = 1, 2
        T = 50, 100, 500
        P = 25, 50, 75
        replicates = 100
        methods = jm-mix, k-prot
        missing = none, random 0.1, continuous 0.2
        lambda_grid = 0:1:0.05
        n_init = 10
        max_iter = 10
        seed = 1

        [setup mine]          ; optional extra setups, fields of SimConfig
        mu = 0.75
        rho = 0.1
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    if not parser.read(path):
        raise FileNotFoundError(f"cannot read scenario file {os.fspath(path)!r}")
    if not parser.has_section("benchmark"):
        raise ValueError(f"scenario file {os.fspath(path)!r} has no [benchmark] section")
    b = parser["benchmark"]
    kwargs: dict = {}
    if "setups" in b:
        kwargs["setups"] = [v.strip() for v in b["setups"].split(",")]
    if "T" in b:
        kwargs["T_grid"] = [int(v) for v in _floats(b["T"])]
    if "P" in b:
        kwargs["P_grid"] = [int(v) for v in _floats(b["P"])]
    if "replicates" in b:
        kwargs["replicates"] = b.getint("replicates")
    if "methods" in b:
        kwargs["methods"] = [v.strip() for v in b["methods"].split(",")]
    if "missing" in b:
        kwargs["missing"] = _parse_missing(b["missing"])
    if "lambda_grid" in b:
        kwargs["lambda_grid"] = _floats(b["lambda_grid"])
    for key in ("n_init", "max_iter", "seed"):
        if key in b:
            kwargs[key] = b.getint(key)
    custom = {}
    for section in parser.sections():
        if section.startswith("setup "):
            name = section.split(None, 1)[1].strip()
            custom[name] = {k: float(v) for k, v in parser[section].items()}
    if custom:
        kwargs["custom_setups"] = custom
    return kwargs


def _parse_missing(text: str) -> list[tuple[str, float]]:
    out = []
    for item in text.replace("\n", " ").split(","):
        parts = item.split()
        if not parts:
            continue
        scheme = parts[0].lower()
        if scheme not in SCHEMES:
            raise ValueError(f"unknown missing-data scheme {scheme!r}")
        out.append((scheme, float(parts[1]) if scheme != "none" else 0.0))
    return out
