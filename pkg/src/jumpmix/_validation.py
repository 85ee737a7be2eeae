"""Input checking and coercion shared by the estimators and functions."""
from __future__ import annotations

from typing import Sequence

import numpy as np
import pandas as pd

from .dataset import Feature, MixedSeries, SchemaError


def check_series(
    X,
    categorical_features: Sequence | None = None,
    reference: Sequence[Feature] | None = None,
) -> MixedSeries:
    """Coerce ``X`` to a :class:`MixedSeries`.

    ``X`` may be a MixedSeries, a DataFrame or a 2-d array. For arrays,
    ``categorical_features`` lists column indices holding integer level codes.
    ``reference`` forces the result onto a fitted schema (names and levels).
    """
    if isinstance(X, MixedSeries):
        series = X
    elif isinstance(X, pd.DataFrame):
        if reference is not None:
            levels = {f.name: f.levels for f in reference if f.is_categorical}
            cat = list(levels)
            series = MixedSeries.from_frame(X, categorical=cat, levels=levels)
        else:
            cat = None
            if categorical_features is not None:
                cat = [X.columns[c] if isinstance(c, (int, np.integer)) else c
                       for c in categorical_features]
            series = MixedSeries.from_frame(X, categorical=cat)
    else:
        arr = np.asarray(X, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise SchemaError(f"expected a 2-d array, got shape {arr.shape}")
        if reference is not None:
            features = tuple(reference)
        else:
            cat = set(categorical_features or ())
            features = []
            for p in range(arr.shape[1]):
                if p in cat:
                    col = arr[:, p][~np.isnan(arr[:, p])]
                    n = int(col.max()) + 1 if col.size else 1
                    features.append(Feature(f"x{p}", tuple(str(i) for i in range(n))))
                else:
                    features.append(Feature(f"x{p}"))
        series = MixedSeries(tuple(features), arr)
    if reference is not None:
        ref = tuple(reference)
        if len(ref) != series.n_features:
            raise SchemaError(f"expected {len(ref)} features, got {series.n_features}")
        for a, b in zip(ref, series.features):
            if a.name != b.name or a.levels != b.levels:
                raise SchemaError(f"feature {b.name!r} does not match fitted feature {a.name!r}")
    return series


def check_states(states, n_times: int, n_states: int | None = None) -> np.ndarray:
    """Validate a 0-based state sequence of length ``n_times``."""
    s = np.asarray(states)
    if s.ndim != 1 or s.shape[0] != n_times:
        raise ValueError(f"state sequence must have length {n_times}, got shape {s.shape}")
    if s.size and not np.issubdtype(s.dtype, np.integer):
        if np.any(s != np.round(s)):
            raise ValueError("states must be integers")
    s = s.astype(np.int64)
    if s.size and s.min() < 0:
        raise ValueError("states must be nonnegative")
    if n_states is not None and s.size and s.max() >= n_states:
        raise ValueError(f"state {s.max()} out of range for {n_states} states")
    return s


def count_jumps(states) -> int:
    s = np.asarray(states)
    return int(np.count_nonzero(s[1:] != s[:-1]))
