"""Acceptance criteria.

Each test prints one ``criterion N: PASS|FAIL`` line with the measured values.
The Monte Carlo criteria are marked slow (several minutes in total on one core).
Seeds are fixed once below and are never tuned.
"""
import itertools
import math

import numpy as np
import pytest

from jumpmix.airquality import (
    PipelineConfig, aqi, engineer_features, load_breakpoints, run_pipeline, sub_index,
    synthetic_airquality,
)
from jumpmix.dataset import Feature, MixedSeries, compute_context
from jumpmix.gower import gower_matrix
from jumpmix.jumpmodel import decode_states, fit
from jumpmix.metrics import ari
from jumpmix.selection import select
from jumpmix.simulate import run_benchmark

MASTER_SEED = 0
REPLICATES = 25


def report(capsys, criterion, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}")


def bench_cell(setup, T, P, missing=("none", 0.0)):
    res = run_benchmark(setups=(setup,), T_grid=(T,), P_grid=(P,), replicates=REPLICATES,
                        missing=(missing,), seed=MASTER_SEED)
    scheme, frac = missing
    jm = res.lookup(setup, T, P, "jm-mix", scheme, frac)
    kp = res.lookup(setup, T, P, "k-prot", scheme, frac)
    return jm, kp


@pytest.mark.slow
def test_criterion_1_setup1_table(capsys):
    jm, kp = bench_cell(1, 500, 75)
    ok = jm.mean_ari >= 0.95 and 0.90 <= kp.mean_ari <= 1.00
    report(capsys, 1, ok, f"setup 1 T=500 P=75 reps={REPLICATES}: jm-mix ARI {jm.mean_ari:.4f} "
           f"(sd {jm.sd_ari:.4f}, need >= 0.95), k-prot ARI {kp.mean_ari:.4f} "
           f"(sd {kp.sd_ari:.4f}, need in [0.90, 1.00])")
    assert ok


@pytest.mark.slow
def test_criterion_2_setup2_table(capsys):
    jm, kp = bench_cell(2, 500, 25)
    ok = 0.70 <= jm.mean_ari <= 0.92 and jm.mean_ari > kp.mean_ari
    report(capsys, 2, ok, f"setup 2 T=500 P=25 reps={REPLICATES}: jm-mix ARI {jm.mean_ari:.4f} "
           f"(sd {jm.sd_ari:.4f}, need in [0.70, 0.92]), k-prot ARI {kp.mean_ari:.4f} "
           f"(need jm-mix strictly above)")
    assert ok


@pytest.mark.slow
def test_criterion_3_random_missing_table(capsys):
    jm, kp = bench_cell(1, 500, 50, ("random", 0.2))
    ok = 0.75 <= jm.mean_ari <= 0.97 and jm.mean_ari > kp.mean_ari
    report(capsys, 3, ok, f"setup 1 T=500 P=50 20% random missing reps={REPLICATES}: jm-mix ARI "
           f"{jm.mean_ari:.4f} (sd {jm.sd_ari:.4f}, need in [0.75, 0.97]), k-prot ARI "
           f"{kp.mean_ari:.4f} (need jm-mix above)")
    assert ok


@pytest.mark.slow
def test_criterion_4_imputation_ordering(capsys):
    schemes = [(s, f) for s in ("random", "continuous") for f in (0.1, 0.2)]
    res = run_benchmark(setups=(1,), T_grid=(50, 500), P_grid=(50,), replicates=REPLICATES,
                        methods=("jm-mix",), missing=schemes, seed=MASTER_SEED)
    err = {(T, s, f): res.lookup(1, T, 50, "jm-mix", s, f).mean_imputation_error
           for T in (50, 500) for s, f in schemes}
    checks = []
    for s, f in schemes:
        checks.append(err[(500, s, f)] < err[(50, s, f)])
    for T in (50, 500):
        for f in (0.1, 0.2):
            checks.append(err[(T, "continuous", f)] >= err[(T, "random", f)])
    detail = ", ".join(f"T={T} {s} {f:.0%}: {v:.4f}" for (T, s, f), v in sorted(err.items()))
    ok = all(checks)
    report(capsys, 4, ok, f"mean Gower imputation error over {REPLICATES} reps, P=50: {detail}")
    assert ok


def brute_minimum(loss, lam):
    T, K = loss.shape
    best = math.inf
    for seq in itertools.product(range(K), repeat=T):
        best = min(best, path_value(loss, np.array(seq), lam))
    return best


def path_value(loss, states, lam):
    """Penalized objective accumulated in time order."""
    acc = float(loss[0, states[0]])
    for t in range(1, len(states)):
        acc = float(loss[t, states[t]]) + (acc + lam if states[t] != states[t - 1] else acc)
    return acc


def test_criterion_5_dp_oracle(capsys):
    rng = np.random.default_rng(MASTER_SEED)
    mismatches = 0
    for i in range(200):
        T, K = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        lam = (0.0, 0.1, 0.5)[i % 3]
        n_cont, n_cat = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        n_cont = max(n_cont, 1 - n_cat)
        feats = tuple(Feature(f"c{p}") for p in range(n_cont)) + tuple(
            Feature(f"k{p}", ("a", "b", "c")) for p in range(n_cat))
        data = np.column_stack([rng.normal(size=(T, n_cont)),
                                rng.integers(3, size=(T, n_cat))]).astype(float)
        series = MixedSeries(feats, data)
        ctx = compute_context(series)
        # centroids inside the observed ranges so no contribution exceeds 1
        lo, hi = data.min(axis=0), data.max(axis=0)
        mu = lo + rng.random((K, data.shape[1])) * (hi - lo)
        mu[:, n_cont:] = rng.integers(3, size=(K, n_cat))
        loss = gower_matrix(data, mu, ctx)
        states = decode_states(series, mu, lam, ctx)
        if path_value(loss, states, lam) != brute_minimum(loss, lam):
            mismatches += 1
    ok = mismatches == 0
    report(capsys, 5, ok, f"200 instances (T<=8, K<=3, lambda in {{0, 0.1, 0.5}}): "
           f"{mismatches} objective mismatches against exhaustive enumeration (need 0, exact)")
    assert ok


def pair_counting_ari(a, b):
    pairs = list(itertools.combinations(range(len(a)), 2))
    same_a = np.array([a[i] == a[j] for i, j in pairs], bool)
    same_b = np.array([b[i] == b[j] for i, j in pairs], bool)
    total = len(pairs)
    if total == 0:
        return 1.0
    index = float(np.sum(same_a & same_b))
    expected = same_a.sum() * same_b.sum() / total
    max_index = (same_a.sum() + same_b.sum()) / 2
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)


def test_criterion_6_ari_oracle(capsys):
    rng = np.random.default_rng(MASTER_SEED)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 9))
        a = rng.integers(int(rng.integers(1, 4)), size=n)
        b = rng.integers(int(rng.integers(1, 4)), size=n)
        worst = max(worst, abs(ari(a, b) - pair_counting_ari(a, b)))
    ok = worst <= 1e-12
    report(capsys, 6, ok, f"500 sampled partition pairs (n<=8, <=3 blocks): max |diff| "
           f"{worst:.2e} against pair counting (need <= 1e-12)")
    assert ok


def descent_instances():
    rng = np.random.default_rng(MASTER_SEED)
    for _ in range(100):
        T = int(rng.integers(10, 60))
        n_cont, n_cat = int(rng.integers(1, 4)), int(rng.integers(0, 4))
        feats = tuple(Feature(f"c{p}") for p in range(n_cont)) + tuple(
            Feature(f"k{p}", ("a", "b", "c")) for p in range(n_cat))
        data = np.column_stack([rng.normal(size=(T, n_cont)) * rng.uniform(0.5, 3, n_cont),
                                rng.integers(3, size=(T, n_cat))]).astype(float)
        missing = rng.random(data.shape) < rng.choice([0.0, 0.1])
        missing[0] = False
        data[missing] = np.nan
        yield (MixedSeries(feats, data), int(rng.integers(2, 5)),
               float(rng.choice([0.0, 0.1, 0.5])), int(rng.integers(1 << 31)))


@pytest.mark.parametrize("centroid", ["mean", "median"])
def test_criterion_7_descent_and_saturation(capsys, centroid):
    strict, material, not_constant = 0, 0, 0
    for series, K, lam, seed in descent_instances():
        trace = fit(series, K, lam, n_init=1, seed=seed, centroid=centroid).trace
        steps = [b - a for a, b in zip(trace, trace[1:])]
        strict += any(d > 0 for d in steps)
        # rises beyond floating-point rounding of the objective
        material += any(d > 1e-12 * max(1.0, abs(trace[0])) for d in steps)
        sat = fit(series, K, float(series.n_times), n_init=3, seed=seed, centroid=centroid)
        not_constant += sat.jumps != 0
    ok = material == 0 and not_constant == 0
    report(capsys, "7", ok, f"centroid={centroid}: {material}/100 fit traces rising by more than "
           f"1e-12 relative (need 0; {strict}/100 counting any rise); {not_constant}/100 instances "
           f"without a constant sequence at lambda=T (need 0)")
    assert ok


def airquality_series(T, seed):
    frame, truth = synthetic_airquality(T=T, seed=seed)
    frame.index = frame.pop("date").pipe(lambda d: d.astype("datetime64[ns]"))
    series, _ = engineer_features(frame, PipelineConfig())
    return series, truth


def test_criterion_8_gic_consistency(capsys, tmp_path):
    series, _ = airquality_series(150, MASTER_SEED)
    rep = select(series, (2, 3, 4), (0.0, 0.1, 0.3, 0.6), n_init=3, seed=MASTER_SEED)
    rel = np.abs(rep.recompute() - rep.candidates.gic.to_numpy()) / np.abs(rep.candidates.gic.to_numpy())
    frame, _ = synthetic_airquality(T=200, seed=MASTER_SEED)
    csv = tmp_path / "aq.csv"
    frame.to_csv(csv, index=False)
    cfg = PipelineConfig(n_init=5, seed=MASTER_SEED)
    lams = [run_pipeline(csv, cfg).meta["lambda"] for _ in range(2)]
    ok = rel.max() <= 1e-12 and lams[0] == lams[1]
    report(capsys, 8, ok, f"{len(rel)} GIC rows recomputed, max rel diff {rel.max():.2e} "
           f"(need <= 1e-12); pipeline lambda over two reruns {lams} (need equal)")
    assert ok


def test_criterion_9_aqi_endpoints(capsys):
    bp = load_breakpoints()
    bad_ends, n_segs = 0, 0
    for segs in bp.segments.values():
        for c_lo, c_hi, i_lo, i_hi in segs:
            n_segs += 1
            if sub_index(c_lo, segs)[0] != i_lo or sub_index(c_hi, segs)[0] != i_hi:
                bad_ends += 1
    rng = np.random.default_rng(MASTER_SEED)
    bad_max = 0
    for _ in range(1000):
        conc = {p: float(rng.uniform(0, 1.1 * segs[-1][1])) for p, segs in bp.segments.items()}
        res = aqi(conc, bp)
        if res.overall != max(sub_index(c, bp.segments[p])[0] for p, c in conc.items()):
            bad_max += 1
    ok = bad_ends == 0 and bad_max == 0
    report(capsys, 9, ok, f"{bad_ends}/{n_segs} segments with wrong endpoints; {bad_max}/1000 "
           f"random vectors where overall != max sub-index (need 0 and 0)")
    assert ok


@pytest.mark.slow
def test_criterion_10_smoothing(capsys):
    lams = (0.1, 0.2, 0.3, 0.5, 1.0)
    wins = 0
    for rep in range(100):
        series, _ = airquality_series(365, 10_000 + rep)
        base = fit(series, 4, 0.0, seed=rep).jumps
        if all(fit(series, 4, lam, seed=rep).jumps < base for lam in lams):
            wins += 1
    ok = wins >= 95
    report(capsys, 10, ok, f"{wins}/100 replicates where every lambda in {lams} decodes strictly "
           f"fewer switches than lambda=0 (need >= 95)")
    assert ok
