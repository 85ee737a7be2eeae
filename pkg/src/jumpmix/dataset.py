"""Mixed-type time series container, CSV ingestion and Gower normalization context.

Categorical cells are stored as integer level codes inside a float array so the
whole table can be handled with vectorized numpy; ``NaN`` marks a missing cell.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

DEFAULT_MISSING_TOKENS = frozenset({"", "NA", "NaN"})


class SchemaError(ValueError):
    """Column declarations do not match the data."""


class ParseError(ValueError):
    """A cell could not be parsed according to its column kind."""


class ContextError(ValueError):
    """Gower normalization context cannot be built."""


class ImputationError(ValueError):
    """A feature has no observed value to impute from."""


@dataclass(frozen=True)
class Feature:
    """A named column; ``levels`` is ``None`` for continuous features."""

    name: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.levels is not None:
            levels = tuple(str(v) for v in self.levels)
            if not levels:
                raise SchemaError(f"categorical feature {self.name!r} has no levels")
            if len(set(levels)) != len(levels):
                raise SchemaError(f"categorical feature {self.name!r} has duplicate levels")
            object.__setattr__(self, "levels", levels)

    @property
    def is_categorical(self) -> bool:
        return self.levels is not None

    @property
    def kind(self) -> str:
        return "categorical" if self.is_categorical else "continuous"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MixedSeries:
    """Time-ordered T x P table of continuous and categorical features.

    Parameters
    ----------
    features : sequence of Feature
    values : array of shape (T, P)
        Continuous values, or level codes ``0..L-1`` for categorical columns.
        ``NaN`` marks a missing cell.
    timestamps : array of shape (T,), optional
        Strictly increasing time labels. Row order defines time order.
    missing : bool array of shape (T, P), optional
        Original missingness mask. Defaults to ``isnan(values)``; imputation keeps
        the original mask here after filling the cells.
    """

    features: tuple[Feature, ...]
    values: np.ndarray
    timestamps: np.ndarray | None = None
    missing: np.ndarray | None = field(default=None)

    def __post_init__(self):
        features = tuple(self.features)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise SchemaError("values must be a 2-d array")
        T, P = values.shape
        if T < 1 or P < 1:
            raise SchemaError("a series needs at least one row and one column")
        if len(features) != P:
            raise SchemaError(f"{len(features)} features declared for {P} columns")
        names = [f.name for f in features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        for p, f in enumerate(features):
            if f.is_categorical:
                col = values[:, p]
                obs = col[~np.isnan(col)]
                if obs.size and (
                    np.any(obs != np.round(obs)) or obs.min() < 0 or obs.max() >= len(f.levels)
                ):
                    raise SchemaError(f"column {f.name!r} holds codes outside its level set")
            elif np.any(np.isinf(values[:, p])):
                raise SchemaError(f"column {f.name!r} holds infinite values")
        missing = np.isnan(values) if self.missing is None else np.asarray(self.missing, bool)
        if missing.shape != values.shape:
            raise SchemaError("missing mask shape does not match values")
        if np.any(np.isnan(values) & ~missing):
            raise SchemaError("NaN cells must be part of the missing mask")
        ts = self.timestamps
        if ts is not None:
            ts = np.asarray(ts)
            if ts.shape != (T,):
                raise SchemaError("timestamps must have one entry per row")
            if T > 1 and not np.all(ts[1:] > ts[:-1]):
                raise SchemaError("timestamps must be strictly increasing")
            ts = _readonly(ts)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "missing", _readonly(missing))
        object.__setattr__(self, "timestamps", ts)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def categorical(self) -> np.ndarray:
        """Boolean mask of categorical columns."""
        return np.array([f.is_categorical for f in self.features])

    @property
    def n_levels(self) -> np.ndarray:
        return np.array([len(f.levels) if f.is_categorical else 0 for f in self.features])

    @property
    def is_complete(self) -> bool:
        """True when no cell currently holds NaN (imputed cells count as present)."""
        return not np.isnan(self.values).any()

    def with_values(self, values: np.ndarray) -> "MixedSeries":
        """Same schema, timestamps and original mask with new cell values."""
        return MixedSeries(self.features, values, self.timestamps, self.missing)

    def with_mask(self, missing: np.ndarray) -> "MixedSeries":
        """Blank the cells in ``missing``; the result's mask is exactly ``missing``."""
        missing = np.asarray(missing, bool)
        values = np.array(self.values)
        values[missing] = np.nan
        return MixedSeries(self.features, values, self.timestamps, missing)

    def select(self, columns: Sequence[str]) -> "MixedSeries":
        idx = [self.names.index(c) for c in columns]
        return MixedSeries(
            tuple(self.features[i] for i in idx),
            self.values[:, idx],
            self.timestamps,
            self.missing[:, idx],
        )

    def to_frame(self) -> pd.DataFrame:
        """Decode to a DataFrame: floats for continuous, level labels for categorical."""
        data = {}
        for p, f in enumerate(self.features):
            col = self.values[:, p]
            if f.is_categorical:
                labels = np.array(f.levels, dtype=object)
                out = np.full(col.shape, None, dtype=object)
                ok = ~np.isnan(col)
                out[ok] = labels[col[ok].astype(int)]
                data[f.name] = pd.Categorical(out, categories=list(f.levels))
            else:
                data[f.name] = col
        index = pd.Index(self.timestamps, name="time") if self.timestamps is not None else None
        return pd.DataFrame(data, index=index)

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        categorical: Iterable[str] | None = None,
        levels: dict[str, Sequence[str]] | None = None,
        use_index_as_time: bool = False,
    ) -> "MixedSeries":
        """Build a series from a DataFrame.

        Columns listed in ``categorical`` (default: columns of object, category,
        string or bool dtype) become categorical. ``levels`` pins the level order
        of a categorical column; otherwise pandas categories are kept, or the
        sorted observed labels are used.
        """
        levels = dict(levels or {})
        if categorical is None:
            categorical = [
                c
                for c in frame.columns
                if not pd.api.types.is_numeric_dtype(frame[c]) or frame[c].dtype == bool
            ]
        categorical = set(categorical) | set(levels)
        unknown = categorical - set(frame.columns)
        if unknown:
            raise SchemaError(f"unknown columns: {sorted(unknown)}")
        features, cols = [], []
        for name in frame.columns:
            col = frame[name]
            if name in categorical:
                lab = col.astype(object).where(col.notna(), None)
                lab = [None if v is None else str(v) for v in lab]
                if name in levels:
                    lv = tuple(str(v) for v in levels[name])
                elif isinstance(col.dtype, pd.CategoricalDtype):
                    lv = tuple(str(v) for v in col.cat.categories)
                else:
                    lv = tuple(sorted({v for v in lab if v is not None}))
                index = {v: i for i, v in enumerate(lv)}
                codes = np.empty(len(lab))
                for t, v in enumerate(lab):
                    if v is None:
                        codes[t] = np.nan
                    elif v in index:
                        codes[t] = index[v]
                    else:
                        raise SchemaError(f"label {v!r} in column {name!r} is not a declared level")
                features.append(Feature(str(name), lv))
                cols.append(codes)
            else:
                try:
                    cols.append(pd.to_numeric(col).to_numpy(dtype=float))
                except (ValueError, TypeError) as exc:
                    raise ParseError(f"column {name!r}: {exc}") from None
                features.append(Feature(str(name)))
        ts = frame.index.to_numpy() if use_index_as_time else None
        return cls(tuple(features), np.column_stack(cols), ts)


@dataclass(frozen=True)
class GowerContext:
    """Per-feature ranges and weights for the Gower distance.

    ``ranges`` holds max - min over observed values for continuous features and
    is unused (set to 0) for categorical ones.
    """

    ranges: np.ndarray
    weights: np.ndarray
    categorical: np.ndarray

    def __post_init__(self):
        ranges = np.asarray(self.ranges, float)
        weights = np.asarray(self.weights, float)
        categorical = np.asarray(self.categorical, bool)
        if not (ranges.shape == weights.shape == categorical.shape) or ranges.ndim != 1:
            raise ContextError("ranges, weights and categorical must be 1-d and equally long")
        if np.any(ranges < 0) or np.any(np.isnan(ranges)):
            raise ContextError("ranges must be nonnegative")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise ContextError("weights must be nonnegative and not all zero")
        object.__setattr__(self, "ranges", _readonly(ranges))
        object.__setattr__(self, "weights", _readonly(weights))
        object.__setattr__(self, "categorical", _readonly(categorical))

    @property
    def n_features(self) -> int:
        return self.ranges.shape[0]

    @property
    def constant(self) -> np.ndarray:
        """Continuous features whose observed range is zero."""
        return ~self.categorical & (self.ranges == 0)


def compute_context(series: MixedSeries, weights: Sequence[float] | None = None) -> GowerContext:
    """Observed-value ranges of the continuous features, unit weights by default."""
    P = series.n_features
    ranges = np.zeros(P)
    for p, f in enumerate(series.features):
        if f.is_categorical:
            continue
        col = series.values[:, p][~series.missing[:, p]]
        if col.size == 0:
            raise ContextError(f"continuous feature {f.name!r} has no observed values")
        ranges[p] = col.max() - col.min()
    w = np.ones(P) if weights is None else np.asarray(weights, float)
    return GowerContext(ranges, w, series.categorical)


def column_mode(codes: np.ndarray, n_levels: int) -> float:
    """Most frequent level code; ties go to the first level in declared order."""
    counts = np.bincount(codes.astype(int), minlength=n_levels)
    return float(np.argmax(counts))


def initial_impute(series: MixedSeries) -> MixedSeries:
    """Fill missing cells with the observed column mean (continuous) or mode (categorical).

    Only originally-missing cells are touched, so applying it twice is the same
    as applying it once.
    """
    values = np.array(series.values)
    for p, f in enumerate(series.features):
        miss = series.missing[:, p]
        if not miss.any():
            continue
        obs = series.values[~miss, p]
        if obs.size == 0:
            raise ImputationError(f"feature {f.name!r} is entirely missing")
        if f.is_categorical:
            values[miss, p] = column_mode(obs, len(f.levels))
        else:
            values[miss, p] = obs.mean()
    return series.with_values(values)


def unconditional_center(series: MixedSeries) -> np.ndarray:
    """Per-feature mean (continuous) or mode (categorical) over all rows."""
    if not series.is_complete:
        raise ImputationError("unconditional_center needs a fully observed series")
    center = series.values.mean(axis=0)
    for p, f in enumerate(series.features):
        if f.is_categorical:
            center[p] = column_mode(series.values[:, p], len(f.levels))
    return center


def load_schema(path: str | os.PathLike) -> dict[str, tuple[str, ...] | None]:
    """Read a column schema file.

    The file is INI-style with a ``[columns]`` section, one column per line::

        [columns]
        PM25 = continuous
        Windy = categorical
        Month = categorical: 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12

    A categorical entry may pin its level order after a colon. The result maps
    each column name to ``None`` (continuous), ``()`` (categorical, levels
    inferred) or a tuple of pinned levels.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not parser.read(path):
        raise SchemaError(f"cannot read schema file {os.fspath(path)!r}")
    if not parser.has_section("columns"):
        raise SchemaError(f"schema file {os.fspath(path)!r} has no [columns] section")
    schema: dict[str, tuple[str, ...] | None] = {}
    for name, decl in parser.items("columns"):
        kind, _, rest = decl.partition(":")
        kind = kind.strip().lower()
        if kind == "continuous":
            schema[name] = None
        elif kind == "categorical":
            schema[name] = tuple(v.strip() for v in rest.split(",") if v.strip())
        else:
            raise SchemaError(f"column {name!r}: unknown kind {kind!r}")
    return schema


def load_csv(
    path: str | os.PathLike,
    schema: dict[str, tuple[str, ...] | None] | str | os.PathLike | None = None,
    missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS,
    time_column: str | None = None,
) -> MixedSeries:
    """Load a comma-separated file into a :class:`MixedSeries`.

    Parameters
    ----------
    path : path to the CSV file (one header row, one row per time point).
    schema : mapping or path to a schema file (see :func:`load_schema`).
        Columns not in the schema are a :class:`SchemaError`. Without a schema
        every column is treated as continuous.
    missing_tokens : cell strings meaning "missing".
    time_column : optional column holding timestamps (parsed as dates when
        possible); it is not a feature.
    """
    if schema is not None and not isinstance(schema, dict):
        schema = load_schema(schema)
    tokens = set(missing_tokens)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False)
    timestamps = None
    if time_column is not None:
        if time_column not in raw.columns:
            raise SchemaError(f"time column {time_column!r} not in {os.fspath(path)!r}")
        tcol = raw.pop(time_column)
        try:
            timestamps = pd.to_datetime(tcol).to_numpy()
        except (ValueError, TypeError):
            timestamps = tcol.to_numpy()
    if schema is None:
        schema = {c: None for c in raw.columns}
    unknown = [c for c in raw.columns if c not in schema]
    if unknown:
        raise SchemaError(f"columns not declared in schema: {unknown}")
    absent = [c for c in schema if c not in raw.columns]
    if absent:
        raise SchemaError(f"schema columns missing from {os.fspath(path)!r}: {absent}")

    features, cols = [], []
    for name in raw.columns:
        cells = raw[name].to_numpy()
        miss = np.array([c in tokens or c.strip() in tokens for c in cells])
        decl = schema[name]
        if decl is None:
            col = np.full(len(cells), np.nan)
            for t, c in enumerate(cells):
                if miss[t]:
                    continue
                try:
                    col[t] = float(c)
                except ValueError:
                    # +2: header row plus 1-based numbering
                    raise ParseError(
                        f"row {t + 2}, column {name!r}: cannot parse {c!r} as a number"
                    ) from None
            features.append(Feature(name))
        else:
            labels = [c.strip() for c in cells]
            levels = decl or tuple(sorted({lab for lab, m in zip(labels, miss) if not m}))
            index = {v: i for i, v in enumerate(levels)}
            col = np.full(len(cells), np.nan)
            for t, lab in enumerate(labels):
                if miss[t]:
                    continue
                if lab not in index:
                    raise ParseError(f"row {t + 2}, column {name!r}: {lab!r} is not a declared level")
                col[t] = index[lab]
            if not levels:
                raise SchemaError(f"categorical column {name!r} has no observed labels")
            features.append(Feature(name, levels))
        cols.append(col)
    return MixedSeries(tuple(features), np.column_stack(cols), timestamps)


def write_csv(series: MixedSeries, path: str | os.PathLike, time_column: str = "time") -> None:
    """Write a series with decoded labels; missing cells are written as ``NA``."""
    frame = series.to_frame()
    frame.to_csv(path, index=series.timestamps is not None, index_label=time_column,
                 na_rep="NA", float_format="%.17g")
