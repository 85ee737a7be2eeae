"""Statistical jump model for mixed-type data.

Coordinate descent alternating three steps until the state sequence stops
changing: fit state-conditional means/modes, refresh the originally-missing
cells from the current centroids, and decode the state sequence by dynamic
programming under a per-jump penalty.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from numba import njit
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_series, check_states, count_jumps
from .dataset import (
    Feature,
    GowerContext,
    MixedSeries,
    compute_context,
    initial_impute,
    unconditional_center,
)
from .gower import DimensionError, gower_matrix

CENTROID_MODES = ("mean", "median")
INIT_MODES = ("uniform", "kmeans++")


@njit(cache=True)
def _dp_decode(loss, lam):
    T, K = loss.shape
    V = np.empty((T, K))
    for k in range(K):
        V[0, k] = loss[0, k]
    for t in range(1, T):
        best = V[t - 1, 0]
        for k in range(1, K):
            if V[t - 1, k] < best:
                best = V[t - 1, k]
        jump = best + lam
        for k in range(K):
            stay = V[t - 1, k]
            V[t, k] = loss[t, k] + (stay if stay <= jump else jump)
    states = np.empty(T, np.int64)
    states[T - 1] = np.argmin(V[T - 1])
    for t in range(T - 2, -1, -1):
        k = states[t + 1]
        j = np.argmin(V[t])
        states[t] = k if V[t, k] <= V[t, j] + lam else j
    return states


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0 or math.isinf(lam):
        raise ValueError(f"jump penalty must be finite and nonnegative, got {lam}")
    return lam


@njit(cache=True)
def _path_value(loss, states, lam):
    acc = loss[0, states[0]]
    for t in range(1, states.shape[0]):
        prev = acc + lam if states[t] != states[t - 1] else acc
        acc = loss[t, states[t]] + prev
    return acc


def _objective_from_loss(loss: np.ndarray, states: np.ndarray, lam: float) -> float:
    # accumulated in time order, exactly as the decoder does, so the decoded
    # sequence is the exact floating-point minimizer of this value
    if len(states) == 0:
        return 0.0
    return float(_path_value(np.ascontiguousarray(loss, dtype=np.float64),
                             np.ascontiguousarray(states, dtype=np.int64), float(lam)))


def evaluate_objective(
    series: MixedSeries, states, centroids, lam: float, ctx: GowerContext
) -> float:
    """Penalized fit: sum of Gower distances to assigned centroids plus ``lam`` per jump."""
    if not series.is_complete:
        raise ValueError("evaluate_objective needs a fully observed series")
    centroids = np.atleast_2d(np.asarray(centroids, float))
    if centroids.shape[1] != series.n_features:
        raise DimensionError("centroid width does not match the series")
    s = check_states(states, series.n_times, centroids.shape[0])
    loss = gower_matrix(series.values, centroids, ctx)
    return _objective_from_loss(loss, s, _check_lambda(lam))


def _centroids(Y, states, K, categorical, n_levels, previous, rng, how="mean"):
    T, P = Y.shape
    counts = np.bincount(states, minlength=K)
    mu = np.empty((K, P))
    cont = ~categorical
    if cont.any():
        Yc = Y[:, cont]
        if how == "median":
            med = np.zeros((K, Yc.shape[1]))
            for k in np.flatnonzero(counts):
                med[k] = np.median(Yc[states == k], axis=0)
            mu[:, cont] = med
        else:
            sums = np.zeros((K, Yc.shape[1]))
            np.add.at(sums, states, Yc)
            mu[:, cont] = sums / np.maximum(counts, 1)[:, None]
    for p in np.flatnonzero(categorical):
        L = int(n_levels[p])
        tab = np.bincount(states * L + Y[:, p].astype(np.int64), minlength=K * L).reshape(K, L)
        mu[:, p] = tab.argmax(axis=1)
    for k in np.flatnonzero(counts == 0):
        if previous is not None:
            mu[k] = previous[k]
        else:
            mu[k] = Y[rng.integers(T)]
    return mu


def fit_centroids(
    series: MixedSeries,
    states,
    K: int,
    previous=None,
    random_state=None,
    centroid: str = "mean",
) -> np.ndarray:
    """State-conditional means (continuous) and modes (categorical).

    A state with no assigned rows keeps its row of ``previous``; without
    ``previous`` it gets a uniformly drawn data row. ``centroid="median"``
    uses conditional medians for continuous features instead of means.

    Returns
    -------
    ndarray of shape (K, P); categorical entries are level codes.
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    if centroid not in CENTROID_MODES:
        raise ValueError(f"centroid must be one of {CENTROID_MODES}")
    if not series.is_complete:
        raise ValueError("fit_centroids needs a fully observed series")
    s = check_states(states, series.n_times, K)
    rng = np.random.default_rng(random_state)
    prev = None if previous is None else np.asarray(previous, float)
    return _centroids(series.values, s, K, series.categorical, series.n_levels, prev, rng, centroid)


def impute_step(series: MixedSeries, states, centroids) -> MixedSeries:
    """Set every originally-missing cell (t, p) to the centroid value of state ``s_t``."""
    centroids = np.atleast_2d(np.asarray(centroids, float))
    if centroids.shape[1] != series.n_features:
        raise DimensionError("centroid width does not match the series")
    s = check_states(states, series.n_times, centroids.shape[0])
    if not series.missing.any():
        return series
    values = np.array(series.values)
    fill = centroids[s]
    values[series.missing] = fill[series.missing]
    return series.with_values(values)


def decode_states(series: MixedSeries, centroids, lam: float, ctx: GowerContext) -> np.ndarray:
    """Globally optimal state sequence for fixed centroids.

    Forward recursion ``V_t(k) = g(y_t, mu_k) + min(V_{t-1}(k), min_j V_{t-1}(j) + lam)``
    followed by backtracking. Ties go to the lower state index, and to staying
    in the current state when a jump costs exactly the same. O(T K).
    """
    if not series.is_complete:
        raise ValueError("decode_states needs a fully observed series")
    centroids = np.atleast_2d(np.asarray(centroids, float))
    if centroids.shape[1] != series.n_features:
        raise DimensionError("centroid width does not match the series")
    loss = gower_matrix(series.values, centroids, ctx)
    return _dp_decode(loss, _check_lambda(lam))


def decode_loss(loss, lam: float) -> np.ndarray:
    """Run the jump-penalized decoder directly on a (T, K) loss matrix."""
    loss = np.ascontiguousarray(np.asarray(loss, float))
    if loss.ndim != 2 or loss.shape[0] < 1 or loss.shape[1] < 1:
        raise DimensionError("loss must be a non-empty 2-d array")
    return _dp_decode(loss, _check_lambda(lam))


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``states`` are 0-based. ``centroids`` holds level codes in categorical
    columns. ``trace`` is the objective after each iteration of the winning
    restart; ``restart_objectives`` holds the final objective of every restart.
    """

    states: np.ndarray
    centroids: np.ndarray
    features: tuple[Feature, ...]
    objective: float
    jumps: int
    iterations: int
    lam: float
    n_init: int
    max_iter: int
    seed: int
    converged: bool
    trace: list[float] = field(default_factory=list)
    restart_objectives: list[float] = field(default_factory=list)
    imputed: MixedSeries | None = None
    centroid: str = "mean"
    init: str = "uniform"

    @property
    def n_states(self) -> int:
        return self.centroids.shape[0]

    def centroid_table(self) -> list[dict]:
        """Centroids as one dict per state with decoded categorical labels."""
        rows = []
        for k in range(self.n_states):
            row = {}
            for p, f in enumerate(self.features):
                v = self.centroids[k, p]
                row[f.name] = f.levels[int(v)] if f.is_categorical else float(v)
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {
            "format": "jumpmix.FitResult/1",
            "n_states": self.n_states,
            "lambda": self.lam,
            "seed": self.seed,
            "n_init": self.n_init,
            "max_iter": self.max_iter,
            "centroid": self.centroid,
            "init": self.init,
            "objective": self.objective,
            "jumps": self.jumps,
            "iterations": self.iterations,
            "converged": self.converged,
            "features": [
                {"name": f.name, "kind": f.kind, **({"levels": list(f.levels)} if f.is_categorical else {})}
                for f in self.features
            ],
            "centroids": self.centroid_table(),
            "states": [int(s) for s in self.states],
            "trace": [float(v) for v in self.trace],
            "restart_objectives": [float(v) for v in self.restart_objectives],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        features = tuple(Feature(f["name"], tuple(f["levels"]) if f["kind"] == "categorical" else None)
                         for f in d["features"])
        cents = np.empty((d["n_states"], len(features)))
        for k, row in enumerate(d["centroids"]):
            for p, f in enumerate(features):
                cents[k, p] = f.levels.index(row[f.name]) if f.is_categorical else row[f.name]
        return cls(
            states=np.asarray(d["states"], np.int64),
            centroids=cents,
            features=features,
            objective=d["objective"],
            jumps=d["jumps"],
            iterations=d["iterations"],
            lam=d["lambda"],
            n_init=d["n_init"],
            max_iter=d["max_iter"],
            seed=d["seed"],
            converged=d["converged"],
            trace=list(d.get("trace", [])),
            restart_objectives=list(d.get("restart_objectives", [])),
            centroid=d.get("centroid", "mean"),
            init=d.get("init", "uniform"),
        )

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        return cls.from_dict(json.loads(text))


def draw_seed() -> int:
    """Fresh seed for runs where the user did not give one; callers record it."""
    return int(np.random.SeedSequence().generate_state(1, np.uint32)[0])


def _kmeanspp_states(Y, K, ctx, rng):
    T = Y.shape[0]
    centers = [Y[rng.integers(T)]]
    d = gower_matrix(Y, centers[0][None, :], ctx)[:, 0]
    for _ in range(1, K):
        w = d ** 2
        idx = rng.choice(T, p=w / w.sum()) if w.sum() > 0 else rng.integers(T)
        centers.append(Y[idx])
        d = np.minimum(d, gower_matrix(Y, Y[idx][None, :], ctx)[:, 0])
    return np.argmin(gower_matrix(Y, np.array(centers), ctx), axis=1)


def _single_run(Y0, miss, K, lam, max_iter, ctx, categorical, n_levels, rng, centroid, init):
    T = Y0.shape[0]
    Y = np.array(Y0)
    if init == "kmeans++":
        s = _kmeanspp_states(Y, K, ctx, rng)
    else:
        s = rng.integers(K, size=T)
    mu = None
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = _centroids(Y, s, K, categorical, n_levels, mu, rng, centroid)
        if miss is not None:
            Y[miss] = mu[s][miss]
        loss = gower_matrix(Y, mu, ctx)
        s_new = _dp_decode(loss, lam)
        trace.append(_objective_from_loss(loss, s_new, lam))
        if np.array_equal(s_new, s):
            converged = True
            s = s_new
            break
        s = s_new
    return s, mu, Y, trace, it, converged


def fit(
    series: MixedSeries,
    K: int,
    lam: float = 0.0,
    n_init: int = 10,
    max_iter: int = 10,
    seed: int | None = None,
    centroid: str = "mean",
    init: str = "uniform",
    ctx: GowerContext | None = None,
    n_jobs: int = 1,
) -> FitResult:
    """Fit the jump model by coordinate descent with ``n_init`` random restarts.

    Each restart draws an initial state sequence, fills missing cells with the
    observed column mean/mode, then repeats centroid fitting, missing-value
    refresh and state decoding until the sequence repeats or ``max_iter`` is
    reached. The restart with the lowest objective wins (earliest on ties).
    ``lam = 0`` gives k-prototypes under the Gower distance. Restarts own their
    seeds, so ``n_jobs`` workers give the same result as one.
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    if n_init < 1 or max_iter < 1:
        raise ValueError("n_init and max_iter must be at least 1")
    if centroid not in CENTROID_MODES:
        raise ValueError(f"centroid must be one of {CENTROID_MODES}")
    if init not in INIT_MODES:
        raise ValueError(f"init must be one of {INIT_MODES}")
    lam = _check_lambda(lam)
    if seed is None:
        seed = draw_seed()
    if ctx is None:
        ctx = compute_context(series)
    start = initial_impute(series)
    miss = series.missing if series.missing.any() else None
    categorical, n_levels = series.categorical, series.n_levels

    def run(child):
        return _single_run(start.values, miss, K, lam, max_iter, ctx, categorical, n_levels,
                           np.random.default_rng(child), centroid, init)

    children = np.random.SeedSequence(seed).spawn(n_init)
    if n_jobs == 1:
        runs = [run(c) for c in children]
    else:
        runs = Parallel(n_jobs=n_jobs)(delayed(run)(c) for c in children)
    restart_objectives = [r[3][-1] for r in runs]
    best = runs[int(np.argmin(restart_objectives))]  # argmin keeps the earliest on ties
    s, mu, Y, trace, iterations, converged = best
    return FitResult(
        states=s,
        centroids=mu,
        features=series.features,
        objective=trace[-1],
        jumps=count_jumps(s),
        iterations=iterations,
        lam=lam,
        n_init=n_init,
        max_iter=max_iter,
        seed=int(seed),
        converged=converged,
        trace=trace,
        restart_objectives=restart_objectives,
        imputed=series.with_values(Y),
        centroid=centroid,
        init=init,
    )


def imputation_error(true_series: MixedSeries, imputed: MixedSeries, mask, ctx: GowerContext) -> float:
    """Mean per-cell Gower contribution between true and imputed values over ``mask``."""
    mask = np.asarray(mask, bool)
    if true_series.shape != imputed.shape or mask.shape != true_series.shape:
        raise DimensionError("true series, imputed series and mask must share a shape")
    if not mask.any():
        raise ValueError("imputation error is undefined for an empty mask")
    diff = np.abs(true_series.values - imputed.values)
    cat = np.broadcast_to(ctx.categorical, diff.shape)
    ranges = np.broadcast_to(ctx.ranges, diff.shape)
    contrib = np.where(cat, (diff > 0).astype(float),
                       np.divide(diff, ranges, out=np.zeros_like(diff), where=ranges > 0))
    if np.any(contrib[mask] > 1 + 1e-12):
        raise ValueError("imputed value outside the feature range of the reference context")
    return float(contrib[mask].mean())


class JumpModelMix(ClusterMixin, TransformerMixin, BaseEstimator):
    """Jump-penalized temporal clustering of mixed-type series under the Gower distance.

    Parameters
    ----------
    n_states : int, default=2
    jump_penalty : float, default=0.0
        Cost added per state switch. ``0`` reduces to k-prototypes.
    n_init : int, default=10
        Random restarts; the lowest-objective run is kept.
    max_iter : int, default=10
        Coordinate-descent iterations per restart.
    centroid : {"mean", "median"}, default="mean"
    init : {"uniform", "kmeans++"}, default="uniform"
    categorical_features : list, optional
        Column indices (arrays) or names (DataFrames) to treat as categorical.
        DataFrames default to their non-numeric columns.
    random_state : int, optional
        Seed. When omitted one is drawn and stored in ``seed_``.
    n_jobs : int, default=1
        Workers for the restarts; does not change the result.

    Attributes
    ----------
    labels_ : ndarray of shape (T,)
    centroids_ : ndarray of shape (n_states, P)
    objective_ : float
    n_jumps_ : int
    n_iter_ : int
    imputed_ : MixedSeries
    context_ : GowerContext
    result_ : FitResult
    """

    def __init__(
        self,
        n_states=2,
        jump_penalty=0.0,
        n_init=10,
        max_iter=10,
        centroid="mean",
        init="uniform",
        categorical_features=None,
        random_state=None,
        n_jobs=1,
    ):
        self.n_states = n_states
        self.jump_penalty = jump_penalty
        self.n_init = n_init
        self.max_iter = max_iter
        self.centroid = centroid
        self.init = init
        self.categorical_features = categorical_features
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        series = check_series(X, self.categorical_features)
        self.context_ = compute_context(series)
        res = fit(series, self.n_states, self.jump_penalty, self.n_init, self.max_iter,
                  self.random_state, self.centroid, self.init, self.context_, self.n_jobs)
        self.result_ = res
        self.features_ = series.features
        self.labels_ = res.states
        self.centroids_ = res.centroids
        self.objective_ = res.objective
        self.n_jumps_ = res.jumps
        self.n_iter_ = res.iterations
        self.imputed_ = res.imputed
        self.seed_ = res.seed
        self.center_ = unconditional_center(res.imputed)
        self.n_features_in_ = series.n_features
        return self

    def _complete(self, X) -> MixedSeries:
        series = check_series(X, reference=self.features_)
        if series.is_complete:
            return series
        values = np.array(series.values)
        miss = np.isnan(values)
        values[miss] = np.broadcast_to(self.center_, values.shape)[miss]
        return series.with_values(values)

    def predict(self, X):
        """Decode states for ``X`` with the fitted centroids.

        Missing cells are filled with the fitted unconditional means/modes first.
        """
        check_is_fitted(self, "centroids_")
        return decode_states(self._complete(X), self.centroids_, self.jump_penalty, self.context_)

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    def transform(self, X):
        """Gower distance from every row to every centroid, shape (T, n_states)."""
        check_is_fitted(self, "centroids_")
        return gower_matrix(self._complete(X).values, self.centroids_, self.context_)

    def score(self, X, y=None):
        """Negative penalized objective of the decoded sequence on ``X``."""
        series = self._complete(X)
        states = decode_states(series, self.centroids_, self.jump_penalty, self.context_)
        return -evaluate_objective(series, states, self.centroids_, self.jump_penalty, self.context_)
