"""Command-line entry point: ``jumpmix {fit,select,bench,aqi,simulate}``.

Every run writes ``manifest.json`` next to its outputs with the resolved
configuration (including the seed actually used) and the wall-clock time.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import pandas as pd

from . import airquality, dataset, jumpmodel, selection, simulate

log = logging.getLogger("jumpmix")


def _version() -> str:
    try:
        return metadata.version("jumpmix")
    except metadata.PackageNotFoundError:
        return "unknown"


def _grid(text: str) -> list[float]:
    text = text.strip()
    if ":" in text and "," not in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(round((stop - start) / step))
        return [round(start + i * step, 10) for i in range(n + 1)]
    return [float(v) for v in text.split(",") if v.strip()]


def _int_grid(text: str) -> list[int]:
    return [int(v) for v in _grid(text)]


def _write_manifest(out: Path, command: str, config: dict, started: float, outputs: dict) -> None:
    manifest = {
        "subcommand": command,
        "config": config,
        "version": _version(),
        "duration_seconds": round(time.perf_counter() - started, 3),
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _load_series(args) -> dataset.MixedSeries:
    tokens = set(args.missing_tokens.split(",")) if args.missing_tokens is not None else dataset.DEFAULT_MISSING_TOKENS
    return dataset.load_csv(args.csv, args.schema, tokens, args.time_column)


def cmd_fit(args) -> int:
    started = time.perf_counter()
    series = _load_series(args)
    seed = args.seed if args.seed is not None else jumpmodel.draw_seed()
    res = jumpmodel.fit(series, args.k, args.lam, args.n_init, args.max_iter, seed,
                        centroid=args.centroid, n_jobs=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "fit.json").write_text(res.to_json(indent=2) + "\n")
    states = pd.DataFrame({"t": np.arange(series.n_times), "state": res.states})
    if series.timestamps is not None:
        states.insert(1, "time", series.timestamps)
    states.to_csv(out / "states.csv", index=False)
    dataset.write_csv(res.imputed, out / "imputed.csv")
    config = {"csv": args.csv, "schema": args.schema, "K": args.k, "lambda": args.lam,
              "n_init": args.n_init, "max_iter": args.max_iter, "seed": seed,
              "centroid": args.centroid, "threads": args.threads, "time_column": args.time_column,
              "missing_tokens": args.missing_tokens}
    if args.lam == 0:
        config["label"] = "k-prototypes-equivalent"
    _write_manifest(out, "fit", config, started,
                    {"fit": "fit.json", "states": "states.csv", "imputed": "imputed.csv"})
    print(f"objective {res.objective:.10g}")
    print(f"jumps {res.jumps}")
    return 0


def cmd_select(args) -> int:
    started = time.perf_counter()
    series = _load_series(args)
    seed = args.seed if args.seed is not None else jumpmodel.draw_seed()
    report = selection.select(series, args.k_grid, args.lambda_grid, args.k_saturated,
                              args.n_init, args.max_iter, seed, args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "gic.csv")
    K, lam = report.chosen
    config = {"csv": args.csv, "schema": args.schema, "K_grid": args.k_grid,
              "lambda_grid": args.lambda_grid, "K_saturated": args.k_saturated,
              "n_init": args.n_init, "max_iter": args.max_iter, "seed": seed,
              "threads": args.threads, "chosen": {"K": K, "lambda": lam}}
    _write_manifest(out, "select", config, started, {"report": "gic.csv"})
    print(report.candidates.to_string(index=False))
    print(f"chosen K={K} lambda={lam:g}")
    return 0


def cmd_bench(args) -> int:
    started = time.perf_counter()
    kwargs = simulate.load_scenario(args.scenario) if args.scenario else {}
    if args.replicates is not None:
        kwargs["replicates"] = args.replicates
    if args.seed is not None:
        kwargs["seed"] = args.seed
    kwargs.setdefault("seed", jumpmodel.draw_seed())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = simulate.run_benchmark(n_jobs=args.threads, **kwargs)
    result.to_csv(out / "bench.csv")
    result.records.to_csv(out / "replicates.csv", index=False, float_format="%.10g")
    _write_manifest(out, "bench", {**kwargs, "scenario": args.scenario, "threads": args.threads},
                    started, {"table": "bench.csv", "replicates": "replicates.csv"})
    print(result.table.to_string(index=False))
    return 0


def cmd_aqi(args) -> int:
    started = time.perf_counter()
    cfg = airquality.load_pipeline_config(args.config) if args.config else airquality.PipelineConfig()
    if args.breakpoints is not None:
        if not Path(args.breakpoints).is_file():
            raise airquality.ConfigError(f"breakpoint file not found: {args.breakpoints}")
        cfg.breakpoints = args.breakpoints
    if args.holidays is not None:
        cfg.holidays = args.holidays
    if args.seed is not None:
        cfg.seed = args.seed
    if cfg.seed is None:
        cfg.seed = jumpmodel.draw_seed()
    if args.n_init is not None:
        cfg.n_init = args.n_init
    if args.k is not None:
        cfg.n_states = args.k
    if args.lambda_grid is not None:
        cfg.lambda_grid = tuple(args.lambda_grid)
    out = Path(args.out)
    report = airquality.run_pipeline(args.csv, cfg, out)
    config = {k: v for k, v in vars(cfg).items()}
    config["lambda_selected_by_gic"] = report.meta["lambda"]
    config["K_used"] = report.meta["K"]
    _write_manifest(out, "aqi", config, started,
                    {"report": "report.txt", "daily": "daily.csv", "gic": "gic.csv"})
    print(report.to_text())
    return 0


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    seed = args.seed if args.seed is not None else jumpmodel.draw_seed()
    params = simulate.SETUPS[args.setup]
    cfg = simulate.SimConfig(T=args.T, P=args.P, seed=seed, **params)
    series, truth = simulate.simulate(cfg)
    if args.missing != "none":
        series = simulate.inject_missing(series, args.fraction, args.missing, seed + 1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series.to_frame().to_csv(out / "data.csv", index=False, na_rep="NA", float_format="%.17g")
    lines = ["[columns]"]
    for f in series.features:
        lines.append(f"{f.name} = categorical: {', '.join(f.levels)}" if f.is_categorical
                     else f"{f.name} = continuous")
    (out / "schema.ini").write_text("\n".join(lines) + "\n")
    pd.DataFrame({"t": np.arange(len(truth)), "state": truth}).to_csv(out / "truth.csv", index=False)
    config = {"setup": args.setup, "T": args.T, "P": args.P, "seed": seed,
              "missing": args.missing, "fraction": args.fraction}
    _write_manifest(out, "simulate", config, started,
                    {"data": "data.csv", "schema": "schema.ini", "truth": "truth.csv"})
    print(f"wrote {out / 'data.csv'} ({args.T} rows, {args.P} features)")
    return 0


def _add_data_args(p) -> None:
    p.add_argument("--csv", required=True, help="input CSV, one row per time point")
    p.add_argument("--schema", help="INI schema declaring column kinds")
    p.add_argument("--time-column", help="column holding timestamps (not a feature)")
    p.add_argument("--missing-tokens", help='comma-separated missing-cell strings (default ",NA,NaN")')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumpmix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the jump model with fixed K and lambda")
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--centroid", choices=jumpmodel.CENTROID_MODES, default="mean")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1, help="workers for the restarts")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="choose K and lambda by GIC")
    _add_data_args(p)
    p.add_argument("--k-grid", type=_int_grid, default=list(selection.DEFAULT_K_GRID))
    p.add_argument("--lambda-grid", type=_grid, default=list(selection.DEFAULT_LAMBDA_GRID),
                   help="comma list or start:stop:step (default 0:1:0.05)")
    p.add_argument("--k-saturated", type=int, default=selection.DEFAULT_K_SATURATED)
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("bench", help="Monte Carlo benchmark on simulated data")
    p.add_argument("--scenario", help="INI scenario file")
    p.add_argument("--replicates", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("aqi", help="air-quality regime pipeline")
    p.add_argument("--csv", required=True, help="daily CSV with a date column")
    p.add_argument("--config", help="INI pipeline config")
    p.add_argument("--breakpoints", help="AQI breakpoint file (default: shipped table)")
    p.add_argument("--holidays", help="holiday file, one ISO date per line")
    p.add_argument("--k", type=int)
    p.add_argument("--lambda-grid", type=_grid)
    p.add_argument("--n-init", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aqi)

    p = sub.add_parser("simulate", help="write a simulated mixed-type dataset")
    p.add_argument("--setup", type=int, choices=sorted(simulate.SETUPS), default=1)
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--P", type=int, default=50)
    p.add_argument("--missing", choices=simulate.SCHEMES, default="none")
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"jumpmix {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
