"""Air-quality regime pipeline.

Daily pollutant and weather data are turned into a mixed-type design matrix
(raw values, 7-day trailing means and correlations, calendar and threshold
indicators), the jump penalty is chosen by GIC, the jump model is fitted and
its regimes are summarized next to the conventional AQI.
"""
from __future__ import annotations

import configparser
import datetime as dt
import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from ._validation import count_jumps
from .dataset import Feature, MixedSeries, SchemaError
from .jumpmodel import FitResult, fit
from .selection import DEFAULT_K_GRID, DEFAULT_LAMBDA_GRID, select

logger = logging.getLogger(__name__)

DEFAULT_LABELS = ("Good", "Moderate", "US", "Unhealthy")
DEFAULT_CATEGORIES = (
    (50.0, "Good"),
    (100.0, "Moderate"),
    (150.0, "Unhealthy for Sensitive Groups"),
    (math.inf, "Unhealthy"),
)


class ConfigError(ValueError):
    """Pipeline configuration is invalid or refers to missing files."""


def rolling_mean(x, window: int = 7) -> np.ndarray:
    """Trailing mean over the observed values in the last ``window`` days.

    The first ``window - 1`` entries use the available prefix; a window with no
    observed value gives NaN.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    return pd.Series(np.asarray(x, float)).rolling(window, min_periods=1).mean().to_numpy()


def rolling_correlation(x, y, window: int = 7, min_pairs: int = 3) -> np.ndarray:
    """Trailing Pearson correlation over pairwise-complete observations.

    NaN where the window has fewer than ``min_pairs`` complete pairs or either
    slice is constant.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    out = np.full(x.shape, np.nan)
    for t in range(len(x)):
        lo = max(0, t - window + 1)
        xs, ys = x[lo:t + 1], y[lo:t + 1]
        ok = ~(np.isnan(xs) | np.isnan(ys))
        if ok.sum() < min_pairs:
            continue
        dx = xs[ok] - xs[ok].mean()
        dy = ys[ok] - ys[ok].mean()
        sxx, syy = dx @ dx, dy @ dy
        if sxx == 0 or syy == 0:
            continue
        out[t] = np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0)
    return out


def load_holidays(path: str | os.PathLike | None = None) -> set[dt.date]:
    """Read one ISO date per line (``#`` comments allowed); default is the Italian calendar."""
    if path is None:
        text = resources.files("jumpmix.data").joinpath("holidays_it.txt").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError:
            raise ConfigError(f"cannot read holiday file {os.fspath(path)!r}") from None
    out = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.add(dt.date.fromisoformat(line))
    return out


def _yes_no(flag: np.ndarray, missing: np.ndarray) -> np.ndarray:
    codes = flag.astype(float)
    codes[missing] = np.nan
    return codes


def indicator_features(
    series: MixedSeries,
    windy_threshold: float = 0.7,
    rainy_threshold: float = 0.0,
    holidays: Iterable[dt.date] = (),
    wind_column: str | None = "WS",
    rain_column: str | None = "RF",
    calendar: bool = True,
) -> MixedSeries:
    """Append Windy, Rainy, Month, Weekend and Holiday categorical columns.

    Windy/Rainy are "Yes" when the source value strictly exceeds the
    threshold and missing when the source is missing.
    """
    feats = list(series.features)
    cols = [series.values[:, p] for p in range(series.n_features)]
    yes_no = ("No", "Yes")
    for new, src, thr in (("Windy", wind_column, windy_threshold), ("Rainy", rain_column, rainy_threshold)):
        if src is None:
            continue
        if src not in series.names:
            raise SchemaError(f"column {src!r} needed for {new} is not in the series")
        x = series.values[:, series.names.index(src)]
        miss = np.isnan(x)
        feats.append(Feature(new, yes_no))
        cols.append(_yes_no(np.where(miss, 0, x) > thr, miss))
    if calendar:
        if series.timestamps is None:
            raise ConfigError("calendar indicators need timestamps")
        dates = pd.DatetimeIndex(series.timestamps)
        hol = {pd.Timestamp(d).date() for d in holidays}
        none = np.zeros(len(dates), bool)
        feats.append(Feature("Month", tuple(str(m) for m in range(1, 13))))
        cols.append((dates.month - 1).to_numpy(float))
        feats.append(Feature("Weekend", yes_no))
        cols.append(_yes_no(dates.dayofweek.to_numpy() >= 5, none))
        feats.append(Feature("Holiday", yes_no))
        cols.append(_yes_no(np.array([d.date() in hol for d in dates]), none))
    return MixedSeries(tuple(feats), np.column_stack(cols), series.timestamps)


@dataclass(frozen=True)
class PollutantBreakpoints:
    """Per-pollutant ``(c_low, c_high, i_low, i_high)`` segments, ordered by concentration."""

    segments: Mapping[str, tuple[tuple[float, float, float, float], ...]]

    def __post_init__(self):
        clean = {}
        for name, segs in self.segments.items():
            segs = tuple(sorted(tuple(float(v) for v in s) for s in segs))
            if not segs:
                raise ConfigError(f"pollutant {name!r} has no segments")
            for c_lo, c_hi, i_lo, i_hi in segs:
                if not (c_lo < c_hi and i_lo < i_hi):
                    raise ConfigError(f"pollutant {name!r}: degenerate segment {(c_lo, c_hi, i_lo, i_hi)}")
            for a, b in zip(segs, segs[1:]):
                if a[1] != b[0] or a[3] != b[2]:
                    raise ConfigError(f"pollutant {name!r}: segments are not contiguous at {a[1]}")
            clean[name] = segs
        object.__setattr__(self, "segments", clean)

    @property
    def pollutants(self) -> list[str]:
        return list(self.segments)


def load_breakpoints(path: str | os.PathLike | None = None) -> PollutantBreakpoints:
    """Read ``pollutant, c_low, c_high, i_low, i_high`` lines; ``#`` starts a comment."""
    if path is None:
        text = resources.files("jumpmix.data").joinpath("breakpoints_default.csv").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError:
            raise ConfigError(f"cannot read breakpoint file {os.fspath(path)!r}") from None
    segs: dict[str, list] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5:
            raise ConfigError(f"breakpoint line {n}: expected 5 fields, got {len(parts)}")
        segs.setdefault(parts[0], []).append(tuple(float(v) for v in parts[1:]))
    return PollutantBreakpoints(segs)


def aqi_category(value: float, categories=DEFAULT_CATEGORIES) -> str | None:
    """Label of the first category whose upper bound is at least ``value``."""
    if value is None or np.isnan(value):
        return None
    for upper, label in categories:
        if value <= upper:
            return label
    return categories[-1][1]


@dataclass
class AQIResult:
    overall: float
    per_pollutant: dict[str, float]
    category: str | None
    clamped: bool = False


def sub_index(concentration: float, segments) -> tuple[float, bool]:
    """Piecewise-linear index of one pollutant; returns ``(value, clamped)``."""
    c = float(concentration)
    if c < 0:
        raise ValueError(f"negative concentration {c}")
    for c_lo, c_hi, i_lo, i_hi in segments:
        if c_lo <= c <= c_hi:
            if c == c_hi:
                return i_hi, False
            return (i_hi - i_lo) / (c_hi - c_lo) * (c - c_lo) + i_lo, False
    if c > segments[-1][1]:
        return segments[-1][3], True
    raise ValueError(f"concentration {c} is below the first breakpoint")


def aqi(concentrations: Mapping[str, float], breakpoints: PollutantBreakpoints,
        categories=DEFAULT_CATEGORIES) -> AQIResult:
    """Overall AQI as the maximum sub-index over the pollutants given.

    Missing (NaN) concentrations are skipped. Values above the last segment are
    clamped to its top index and flagged.
    """
    per, clamped = {}, False
    for name, c in concentrations.items():
        if c is None or np.isnan(c):
            continue
        if name not in breakpoints.segments:
            raise ConfigError(f"no breakpoints for pollutant {name!r}")
        per[name], hit = sub_index(c, breakpoints.segments[name])
        clamped |= hit
    if not per:
        return AQIResult(np.nan, per, None, False)
    overall = max(per.values())
    return AQIResult(overall, per, aqi_category(overall, categories), clamped)


def _partial_from_corr(corr: np.ndarray) -> np.ndarray:
    prec = np.linalg.inv(corr)
    d = np.sqrt(np.diag(prec))
    partial = -prec / np.outer(d, d)
    np.fill_diagonal(partial, 1.0)
    return partial


def partial_correlation(data) -> np.ndarray:
    """Partial correlations from the inverse of the Pearson correlation matrix."""
    corr = np.corrcoef(np.asarray(data, float), rowvar=False)
    return _partial_from_corr(corr)


@dataclass
class RegimeReport:
    """State summaries of a decoded regime sequence.

    ``labels`` maps state index to a name; states are ranked by their mean of
    the ordering column (ascending).
    """

    states: np.ndarray
    labels: dict[int, str]
    means_modes: pd.DataFrame
    visits: pd.Series
    correlations: dict[int, pd.DataFrame]
    partial_correlations: dict[int, pd.DataFrame | None]
    daily: pd.DataFrame | None = None
    meta: dict = field(default_factory=dict)
    gic_table: pd.DataFrame | None = None

    @property
    def state_labels(self) -> list[str]:
        return [self.labels[int(s)] for s in self.states]

    def correlation_table(self) -> pd.DataFrame:
        """Long table: one row per state and variable pair."""
        rows = []
        for k, corr in self.correlations.items():
            part = self.partial_correlations.get(k)
            cols = list(corr.columns)
            for i, a in enumerate(cols):
                for b in cols[i + 1:]:
                    rows.append({"state": k, "label": self.labels[k], "var1": a, "var2": b,
                                 "correlation": corr.loc[a, b],
                                 "partial_correlation": np.nan if part is None else part.loc[a, b]})
        return pd.DataFrame(rows)

    def to_text(self) -> str:
        lines = ["# Regime report", ""]
        for key, value in self.meta.items():
            lines.append(f"{key}: {value}")
        lines += ["", "## State conditional means and modes", self.means_modes.to_string(), ""]
        lines += ["## Percentage of visits", self.visits.round(2).to_string(), ""]
        lines += ["## State conditional correlation and partial correlation",
                  self.correlation_table().round(4).to_string(index=False), ""]
        return "\n".join(lines)

    def save(self, out_dir: str | os.PathLike) -> dict[str, str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "report": out / "report.txt",
            "means_modes": out / "state_means_modes.csv",
            "visits": out / "state_visits.csv",
            "correlations": out / "state_correlations.csv",
        }
        files["report"].write_text(self.to_text())
        self.means_modes.to_csv(files["means_modes"])
        self.visits.rename("percent").to_csv(files["visits"], index_label="state")
        self.correlation_table().to_csv(files["correlations"], index=False, float_format="%.10g")
        if self.daily is not None:
            files["daily"] = out / "daily.csv"
            self.daily.to_csv(files["daily"], index=False, float_format="%.10g")
        if self.gic_table is not None:
            files["gic"] = out / "gic.csv"
            self.gic_table.to_csv(files["gic"], index=False, float_format="%.17g")
        files["meta"] = out / "report.json"
        files["meta"].write_text(json.dumps(self.meta, indent=2, default=str))
        return {k: str(v) for k, v in files.items()}


def conditional_stats(
    series: MixedSeries,
    states,
    correlation_columns: Sequence[str] | None = None,
    order_column: str | None = "PM2.5",
    labels: Sequence[str] = DEFAULT_LABELS,
) -> RegimeReport:
    """Per-state means/modes, visit percentages, correlations and partial correlations.

    ``series`` should be fully observed (e.g. the imputed series of a fit).
    States are labeled in ascending order of the mean of ``order_column``;
    ``labels`` is used when it has one entry per state, otherwise names
    ``S1..SK`` are generated in that order. Partial correlations are ``None``
    for a state with fewer rows than variables + 1 or a singular correlation matrix.
    """
    states = np.asarray(states, np.int64)
    if states.shape != (series.n_times,):
        raise ValueError("states must have one entry per row")
    K = int(states.max()) + 1
    present = [k for k in range(K) if np.any(states == k)]
    T = series.n_times

    frame = series.to_frame().reset_index(drop=True)
    table = {}
    for k in present:
        rows = frame[states == k]
        col = {}
        for f in series.features:
            if f.is_categorical:
                codes = series.values[states == k, series.names.index(f.name)]
                codes = codes[~np.isnan(codes)].astype(int)
                col[f.name] = f.levels[np.bincount(codes, minlength=len(f.levels)).argmax()] if codes.size else None
            else:
                col[f.name] = rows[f.name].mean()
        table[k] = col

    if order_column is not None and order_column in series.names:
        order = sorted(present, key=lambda k: (table[k][order_column], k))
    else:
        order = list(present)
    names = list(labels) if len(labels) == len(order) else [f"S{i + 1}" for i in range(len(order))]
    label_of = {k: names[i] for i, k in enumerate(order)}

    means_modes = pd.DataFrame({label_of[k]: pd.Series(table[k], dtype=object) for k in order})
    visits = pd.Series({label_of[k]: 100.0 * np.sum(states == k) / T for k in order})

    if correlation_columns is None:
        correlation_columns = [f.name for f in series.features if not f.is_categorical]
    idx = [series.names.index(c) for c in correlation_columns]
    corrs, partials = {}, {}
    for k in order:
        sub = series.values[states == k][:, idx]
        with warnings.catch_warnings(), np.errstate(invalid="ignore", divide="ignore"):
            warnings.simplefilter("ignore", RuntimeWarning)
            corr = np.corrcoef(sub, rowvar=False) if sub.shape[0] > 1 else np.full((len(idx),) * 2, np.nan)
        corr = np.atleast_2d(corr)
        np.fill_diagonal(corr, 1.0)
        corrs[k] = pd.DataFrame(corr, index=correlation_columns, columns=correlation_columns)
        partial = None
        if sub.shape[0] >= len(idx) + 1 and np.all(np.isfinite(corr)):
            try:
                if np.linalg.cond(corr) < 1e12:
                    partial = pd.DataFrame(_partial_from_corr(corr), index=correlation_columns,
                                           columns=correlation_columns)
            except np.linalg.LinAlgError:
                partial = None
        partials[k] = partial
    return RegimeReport(states, label_of, means_modes, visits, corrs, partials)


@dataclass
class PipelineConfig:
    """Settings of :func:`run_pipeline`; see :func:`load_pipeline_config` for the file grammar."""

    date_column: str = "date"
    pollutants: tuple[str, ...] = ("PM2.5", "PM10", "O3", "NO2")
    weather: tuple[str, ...] = ("Temp", "RH", "WS", "RF", "GR")
    extra_columns: tuple[str, ...] = ()
    wind_column: str = "WS"
    rain_column: str = "RF"
    windy_threshold: float = 0.7
    rainy_threshold: float = 0.0
    window: int = 7
    order_column: str = "PM2.5"
    aqi_columns: dict = field(default_factory=lambda: {"PM2.5": "pm25", "PM10": "pm10",
                                                       "O3": "o3", "NO2": "no2"})
    categories: tuple = DEFAULT_CATEGORIES
    labels: tuple[str, ...] = DEFAULT_LABELS
    breakpoints: str | None = None
    holidays: str | None = None
    n_states: int = 4
    select_k: bool = False
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    k_saturated: int = 6
    n_init: int = 10
    max_iter: int = 10
    seed: int | None = 0
    missing_tokens: tuple[str, ...] = ("", "NA", "NaN")


def _list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    if ":" in text and "," not in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(round((stop - start) / step))
        return tuple(round(start + i * step, 10) for i in range(n + 1))
    return tuple(float(v) for v in _list(text))


def load_pipeline_config(path: str | os.PathLike) -> PipelineConfig:
    """Read an INI pipeline configuration.

    ::

        [pipeline]
        date_column = date
        pollutants = PM2.5, PM10, O3, NO2
        weather = Temp, RH, WS, RF, GR
        windy_threshold = 0.7
        rainy_threshold = 0
        window = 7
        breakpoints = breakpoints.csv   ; relative to this file, "default" for the shipped table
        holidays = default              ; or a path, or "none"
        n_states = 4
        select_k = no
        k_grid = 2, 3, 4, 5, 6
        lambda_grid = 0:1:0.05
        k_saturated = 6
        n_init = 10
        max_iter = 10
        seed = 0

        [aqi_columns]                   ; data column = breakpoint pollutant key
        PM2.5 = pm25

        [categories]                    ; label = upper index bound, in order
        Good = 50
        Unhealthy = inf
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    if not parser.read(path):
        raise ConfigError(f"cannot read pipeline config {os.fspath(path)!r}")
    base = Path(path).parent
    cfg = PipelineConfig()
    if parser.has_section("pipeline"):
        p = parser["pipeline"]
        for key in ("date_column", "wind_column", "rain_column", "order_column"):
            if key in p:
                setattr(cfg, key, p[key].strip())
        for key in ("pollutants", "weather", "extra_columns", "labels", "missing_tokens"):
            if key in p:
                setattr(cfg, key, _list(p[key]))
        for key in ("windy_threshold", "rainy_threshold"):
            if key in p:
                setattr(cfg, key, p.getfloat(key))
        for key in ("window", "n_states", "k_saturated", "n_init", "max_iter", "seed"):
            if key in p:
                setattr(cfg, key, p.getint(key))
        if "select_k" in p:
            cfg.select_k = p.getboolean("select_k")
        if "k_grid" in p:
            cfg.k_grid = tuple(int(v) for v in _grid(p["k_grid"]))
        if "lambda_grid" in p:
            cfg.lambda_grid = _grid(p["lambda_grid"])
        for key in ("breakpoints", "holidays"):
            if key in p:
                v = p[key].strip()
                if v.lower() not in ("default", "none"):
                    v = str(base / v)
                setattr(cfg, key, v)
    if parser.has_section("aqi_columns"):
        cfg.aqi_columns = dict(parser["aqi_columns"].items())
    if parser.has_section("categories"):
        cfg.categories = tuple((float(v), k) for k, v in parser["categories"].items())
    return cfg


def read_daily_csv(path, config: PipelineConfig) -> pd.DataFrame:
    """Load the raw daily CSV, index it by date and keep the configured columns."""
    frame = pd.read_csv(path, na_values=list(config.missing_tokens), keep_default_na=False)
    if config.date_column not in frame.columns:
        raise SchemaError(f"date column {config.date_column!r} not found in {os.fspath(path)!r}")
    needed = list(config.pollutants) + list(config.weather) + list(config.extra_columns)
    absent = [c for c in needed if c not in frame.columns]
    if absent:
        raise SchemaError(f"columns {absent} named in the config are missing from {os.fspath(path)!r}")
    frame.index = pd.DatetimeIndex(pd.to_datetime(frame[config.date_column]), name="date")
    frame = frame[needed].apply(pd.to_numeric, errors="raise").astype(float)
    return frame.sort_index()


def engineer_features(raw: pd.DataFrame, config: PipelineConfig,
                      holidays: Iterable[dt.date] = ()) -> tuple[MixedSeries, list[str]]:
    """Build the model's design matrix from the raw daily table.

    Columns: raw pollutant/weather (and extra) variables, their trailing means,
    trailing correlations of every weather variable with every pollutant and
    the categorical indicators. Columns that end up entirely missing are
    dropped; their names are returned alongside the series.
    """
    w = config.window
    cols: dict[str, np.ndarray] = {}
    base = list(config.pollutants) + list(config.weather)
    for c in base + list(config.extra_columns):
        cols[c] = raw[c].to_numpy(float)
    for c in base:
        cols[f"{c}_ma{w}"] = rolling_mean(raw[c], w)
    for a in config.weather:
        for b in config.pollutants:
            cols[f"corr{w}_{a}_{b}"] = rolling_correlation(raw[a], raw[b], w)
    dropped = [c for c, v in cols.items() if np.all(np.isnan(v))]
    for c in dropped:
        logger.warning("dropping feature %s: no observed values", c)
        del cols[c]
    names = list(cols)
    series = MixedSeries(tuple(Feature(c) for c in names), np.column_stack([cols[c] for c in names]),
                         raw.index.to_numpy())
    series = indicator_features(
        series, config.windy_threshold, config.rainy_threshold, holidays,
        config.wind_column if config.wind_column in names else None,
        config.rain_column if config.rain_column in names else None,
    )
    return series, dropped


def aqi_series(raw: pd.DataFrame, config: PipelineConfig,
               breakpoints: PollutantBreakpoints) -> pd.DataFrame:
    """Daily overall AQI and its category from the configured pollutant columns."""
    rows = []
    for _, r in raw.iterrows():
        res = aqi({config.aqi_columns[c]: r[c] for c in config.aqi_columns if c in raw.columns},
                  breakpoints, config.categories)
        rows.append({"aqi": res.overall, "aqi_category": res.category, "aqi_clamped": res.clamped})
    return pd.DataFrame(rows, index=raw.index)


def run_pipeline(csv_path, config: PipelineConfig | None = None,
                 out_dir: str | os.PathLike | None = None) -> RegimeReport:
    """Raw CSV to regime report: features, GIC choice of lambda (and optionally K), fit, AQI."""
    config = config or PipelineConfig()
    bp_path = None if config.breakpoints in (None, "default") else config.breakpoints
    if bp_path is not None and not Path(bp_path).is_file():
        raise ConfigError(f"breakpoint file not found: {bp_path}")
    breakpoints = load_breakpoints(bp_path)
    if config.holidays == "none":
        holidays: set = set()
    else:
        holidays = load_holidays(None if config.holidays in (None, "default") else config.holidays)
    unknown = {v for v in config.aqi_columns.values()} - set(breakpoints.pollutants)
    if unknown:
        raise ConfigError(f"no breakpoints for pollutants {sorted(unknown)}")

    raw = read_daily_csv(csv_path, config)
    series, dropped = engineer_features(raw, config, holidays)

    k_grid = tuple(config.k_grid) if config.select_k else (config.n_states,)
    k_sat = max(config.k_saturated, max(k_grid))
    report_gic = select(series, k_grid, config.lambda_grid, k_sat, config.n_init,
                        config.max_iter, config.seed)
    K, lam = report_gic.chosen
    result: FitResult = report_gic.best_fit
    if result is None:
        result = fit(series, K, lam, config.n_init, config.max_iter, config.seed)

    order = config.order_column if config.order_column in series.names else None
    corr_cols = [c for c in list(config.pollutants) + list(config.weather) if c in series.names]
    report = conditional_stats(result.imputed, result.states, corr_cols, order, config.labels)
    aqi_df = aqi_series(raw, config, breakpoints)
    report.daily = pd.DataFrame({
        "date": [pd.Timestamp(d).date().isoformat() for d in raw.index],
        "state": result.states,
        "label": report.state_labels,
        "aqi": aqi_df["aqi"].to_numpy(),
        "aqi_category": aqi_df["aqi_category"].to_numpy(),
    })
    report.gic_table = report_gic.candidates
    cats = aqi_df["aqi_category"].dropna().to_numpy()
    report.meta = {
        "n_days": series.n_times,
        "n_features": series.n_features,
        "features": series.names,
        "dropped_features": dropped,
        "K": int(K),
        "lambda": float(lam),
        "selected_by": "GIC",
        "seed": config.seed,
        "objective": result.objective,
        "regime_jumps": result.jumps,
        "aqi_category_jumps": count_jumps(cats) if cats.size else 0,
        "aqi_clamped_days": int(aqi_df["aqi_clamped"].sum()),
        "labels": {int(k): v for k, v in report.labels.items()},
    }
    if out_dir is not None:
        report.save(out_dir)
    return report


REGIME_PROFILES = {
    # daily means per regime, roughly matching typical Milan conditions
    "PM2.5": (12.0, 15.0, 23.0, 32.0),
    "PM10": (21.0, 24.0, 36.0, 42.0),
    "O3": (83.0, 58.0, 30.0, 11.0),
    "NO2": (22.0, 31.0, 41.0, 48.0),
    "Temp": (26.0, 15.5, 15.0, 7.0),
    "RH": (57.0, 64.0, 81.0, 86.0),
    "WS": (1.0, 1.0, 0.77, 0.77),
    "RF": (1.7, 3.2, 3.5, 1.7),
    "GR": (260.0, 192.0, 110.0, 59.0),
}
REGIME_NOISE = {"PM2.5": 6.0, "PM10": 8.0, "O3": 15.0, "NO2": 8.0, "Temp": 4.0, "RH": 10.0,
                "WS": 0.25, "RF": 4.0, "GR": 50.0}


def synthetic_airquality(T: int = 365, seed=None, self_prob: float = 0.97,
                         start: str = "2021-06-05", n_regimes: int = 4,
                         constant: bool = False) -> tuple[pd.DataFrame, np.ndarray]:
    """Daily pollutant/weather table driven by a persistent hidden regime chain.

    Returns the raw frame (with a ``date`` column) and the true 0-based regime
    sequence. ``constant=True`` gives identical rows (a degenerate input).
    """
    from .simulate import simulate_chain

    rng = np.random.default_rng(seed)
    dates = pd.date_range(start, periods=T, freq="D")
    if constant:
        states = np.zeros(T, np.int64)
        data = {c: np.full(T, v[0]) for c, v in REGIME_PROFILES.items()}
    else:
        states = simulate_chain(T, n_regimes, self_prob, rng)
        data = {}
        for c, means in REGIME_PROFILES.items():
            m = np.asarray(means[:n_regimes] if n_regimes <= 4 else np.resize(means, n_regimes))
            x = m[states] + REGIME_NOISE[c] * rng.standard_normal(T)
            data[c] = np.maximum(x, 0.0)
        data["RF"] = np.where(rng.random(T) < 0.3, data["RF"], 0.0)
    frame = pd.DataFrame({"date": dates.strftime("%Y-%m-%d"), **{c: np.round(v, 2) for c, v in data.items()}})
    return frame, states
