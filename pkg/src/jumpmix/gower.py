"""Gower dissimilarity for mixed continuous/categorical vectors."""
from __future__ import annotations

import numpy as np

from .dataset import GowerContext


class DimensionError(ValueError):
    """Vectors do not conform to the Gower context."""


class OutOfRangeError(ValueError):
    """A continuous difference exceeds the feature range (stale context)."""


def feature_contribution(x_p: float, y_p: float, categorical: bool, range_p: float = 0.0) -> float:
    """Contribution of a single feature, in [0, 1].

    Continuous features give ``|x - y| / range``; a constant feature (range 0)
    contributes 0. Categorical features give 0 on a match and 1 otherwise.
    """
    if categorical:
        return 0.0 if x_p == y_p else 1.0
    diff = abs(x_p - y_p)
    if range_p == 0:
        if diff != 0:
            raise OutOfRangeError("nonzero difference on a constant feature")
        return 0.0
    if diff > range_p:
        raise OutOfRangeError(f"|x - y| = {diff} exceeds feature range {range_p}")
    return diff / range_p


def gower_distance(x, y, ctx: GowerContext) -> float:
    """Weighted mean of the per-feature contributions between two vectors."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.shape != (ctx.n_features,):
        raise DimensionError(
            f"vectors of shape {x.shape} and {y.shape} do not match {ctx.n_features} features"
        )
    total = 0.0
    for p in range(ctx.n_features):
        total += ctx.weights[p] * feature_contribution(
            x[p], y[p], bool(ctx.categorical[p]), float(ctx.ranges[p])
        )
    return total / float(ctx.weights.sum())


def gower_matrix(A, B, ctx: GowerContext) -> np.ndarray:
    """Gower distance between every row of ``A`` (n, P) and every row of ``B`` (m, P).

    Vectorized counterpart of :func:`gower_distance`. No range check is done here:
    rows outside the context's range (e.g. new data at predict time) give
    contributions above 1 rather than an error.
    """
    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    P = ctx.n_features
    if A.shape[1] != P or B.shape[1] != P:
        raise DimensionError(f"expected {P} columns, got {A.shape[1]} and {B.shape[1]}")
    cat = ctx.categorical
    cont = ~cat
    out = np.zeros((A.shape[0], B.shape[0]))
    if cont.any():
        r = ctx.ranges[cont]
        scale = ctx.weights[cont] * np.divide(1.0, r, out=np.zeros_like(r), where=r > 0)
        diff = np.abs(A[:, None, cont] - B[None, :, cont])
        out += diff @ scale
    if cat.any():
        mism = A[:, None, cat] != B[None, :, cat]
        out += mism @ ctx.weights[cat]
    return out / ctx.weights.sum()
