"""Choosing the number of states and the jump penalty.

The information criterion compares every candidate fit with a saturated fit
(many states, no jump penalty) on the same series.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .dataset import GowerContext, MixedSeries, compute_context, initial_impute, unconditional_center
from .gower import gower_matrix
from .jumpmodel import FitResult, draw_seed, fit
from .metrics import ari

DEFAULT_LAMBDA_GRID = tuple(round(0.05 * i, 2) for i in range(21))
DEFAULT_K_GRID = (2, 3, 4, 5, 6)
DEFAULT_K_SATURATED = 6


def bcd(series: MixedSeries, states, centroids, center, ctx: GowerContext) -> float:
    """Between-cluster total deviance: sum over states of n_k * g(mu_k, center)."""
    centroids = np.atleast_2d(np.asarray(centroids, float))
    center = np.asarray(center, float)
    counts = np.bincount(np.asarray(states, np.int64), minlength=centroids.shape[0])
    if len(states) != series.n_times or counts.shape[0] != centroids.shape[0]:
        raise ValueError("states do not match the series or the centroids")
    d = gower_matrix(centroids, center[None, :], ctx)[:, 0]
    return float(math.fsum(d * counts))


def complexity_constant(K: int, P: int) -> float:
    """C(K) = -log K - (P/2) log(2 pi)."""
    return -math.log(K) - 0.5 * P * math.log(2 * math.pi)


def gic_value(bcd_: float, jumps: int, K: int, bcd_saturated: float, K_saturated: int,
              T: int, P: int) -> float:
    """GIC from logged quantities.

    ``(1/T) * ((BCD_S - BCD) + a_T * M) + 2 * (C(K_S) - C(K))`` with
    ``a_T = log(log T) * log P`` and ``M = K * (P + jumps)``.
    """
    if T <= math.e:
        raise ValueError(f"GIC needs T > e so that log(log T) is defined, got T={T}")
    a_T = math.log(math.log(T)) * math.log(P)
    M = K * (P + jumps)
    return ((bcd_saturated - bcd_) + a_T * M) / T + 2.0 * (
        complexity_constant(K_saturated, P) - complexity_constant(K, P)
    )


def gic(candidate: FitResult, saturated: FitResult, series: MixedSeries,
        ctx: GowerContext | None = None, center=None) -> float:
    """GIC of ``candidate`` against ``saturated``, both fitted on ``series``."""
    ctx = ctx or compute_context(series)
    if center is None:
        center = unconditional_center(initial_impute(series))
    T, P = series.shape
    b = bcd(series, candidate.states, candidate.centroids, center, ctx)
    bs = bcd(series, saturated.states, saturated.centroids, center, ctx)
    return gic_value(b, candidate.jumps, candidate.n_states, bs, saturated.n_states, T, P)


REPORT_COLUMNS = ["K", "lambda", "gic", "bcd", "jumps", "objective",
                  "bcd_saturated", "K_saturated", "jumps_saturated", "T", "P"]


@dataclass
class GicReport:
    """All candidates of a selection run, the minimizer and the saturated fit."""

    candidates: pd.DataFrame
    chosen: tuple[int, float]
    saturated: FitResult | None = None
    fits: dict = field(default_factory=dict, repr=False)

    @property
    def best_fit(self) -> FitResult | None:
        return self.fits.get(self.chosen)

    def to_csv(self, path=None) -> str | None:
        return self.candidates.to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path_or_text) -> "GicReport":
        if isinstance(path_or_text, str) and "\n" in path_or_text:
            path_or_text = io.StringIO(path_or_text)
        table = pd.read_csv(path_or_text)
        return cls(table, _argmin(table))

    def recompute(self) -> np.ndarray:
        """GIC column recomputed from the logged BCD, jumps, K, T and P columns."""
        return np.array([
            gic_value(r.bcd, int(r.jumps), int(r.K), r.bcd_saturated, int(r.K_saturated),
                      int(r.T), int(r.P))
            for r in self.candidates.itertuples()
        ])


def _argmin(table: pd.DataFrame) -> tuple[int, float]:
    best = table.sort_values(["gic", "K", "lambda"], kind="mergesort").iloc[0]
    return int(best["K"]), float(best["lambda"])


def select(
    series: MixedSeries,
    K_grid=DEFAULT_K_GRID,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    K_saturated: int = DEFAULT_K_SATURATED,
    n_init: int = 10,
    max_iter: int = 10,
    seed: int | None = None,
    n_jobs: int = 1,
    centroid: str = "mean",
) -> GicReport:
    """Fit every (K, lambda) candidate and pick the one with the smallest GIC.

    Ties go to the smaller K, then the smaller lambda. Every fit uses the same
    seed, so the outcome does not depend on grid order.
    """
    K_grid = sorted({int(k) for k in K_grid})
    lambda_grid = sorted({float(v) for v in lambda_grid})
    if not K_grid or not lambda_grid:
        raise ValueError("K and lambda grids must be non-empty")
    if K_saturated < max(K_grid):
        raise ValueError(f"K_saturated={K_saturated} is below the largest candidate K")
    if seed is None:
        seed = draw_seed()
    ctx = compute_context(series)
    center = unconditional_center(initial_impute(series))
    T, P = series.shape
    kw = dict(n_init=n_init, max_iter=max_iter, seed=seed, centroid=centroid, ctx=ctx)

    grid = [(k, lam) for k in K_grid for lam in lambda_grid]
    jobs = [(K_saturated, 0.0)] + grid
    results = Parallel(n_jobs=n_jobs)(delayed(fit)(series, k, lam, **kw) for k, lam in jobs)
    saturated, fits = results[0], dict(zip(grid, results[1:]))

    bcd_s = bcd(series, saturated.states, saturated.centroids, center, ctx)
    rows = []
    for (k, lam), res in fits.items():
        b = bcd(series, res.states, res.centroids, center, ctx)
        rows.append({
            "K": k, "lambda": lam,
            "gic": gic_value(b, res.jumps, k, bcd_s, K_saturated, T, P),
            "bcd": b, "jumps": res.jumps, "objective": res.objective,
            "bcd_saturated": bcd_s, "K_saturated": K_saturated,
            "jumps_saturated": saturated.jumps, "T": T, "P": P,
        })
    table = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    return GicReport(table, _argmin(table), saturated, fits)


def ari_path(series: MixedSeries, truth, K: int, lambda_grid=DEFAULT_LAMBDA_GRID,
             n_init: int = 10, max_iter: int = 10, seed: int | None = None,
             centroid: str = "mean") -> list[tuple[float, float, FitResult]]:
    """(lambda, ARI against ``truth``, fit) for every lambda in the grid, sorted by lambda."""
    if seed is None:
        seed = draw_seed()
    ctx = compute_context(series)
    out = []
    for lam in sorted({float(v) for v in lambda_grid}):
        res = fit(series, K, lam, n_init=n_init, max_iter=max_iter, seed=seed,
                  centroid=centroid, ctx=ctx)
        out.append((lam, ari(truth, res.states), res))
    return out


def best_by_ari(path) -> tuple[float, float, FitResult]:
    """Entry of an :func:`ari_path` with the highest ARI; ties go to the smaller lambda."""
    best = path[0]
    for entry in path[1:]:
        if entry[1] > best[1]:
            best = entry
    return best


def select_by_ari(series: MixedSeries, truth, K: int, lambda_grid=DEFAULT_LAMBDA_GRID,
                  n_init: int = 10, max_iter: int = 10, seed: int | None = None,
                  centroid: str = "mean") -> tuple[float, float]:
    """Lambda maximizing the ARI against known states; returns ``(lambda, ari)``."""
    lam, score, _ = best_by_ari(ari_path(series, truth, K, lambda_grid, n_init, max_iter,
                                         seed, centroid))
    return lam, score
