"""Command-line front end for the maskchannel experiment sweeps.

Subcommands map one-to-one onto the library's experiments plus three
information utilities.  Every run resolves its parameters from, in
increasing precedence, built-in desk-scale defaults, an optional INI
config file (one section per subcommand, keys named like the long
flags), and explicit flags.  Each run writes one flat result table (CSV
or JSON) and a JSON manifest that records the resolved parameters;
``maskchannel rerun manifest.json`` reproduces the table byte for byte.
Worker count only affects speed, never output bytes.

Exit codes: 0 success, 2 argument or config validation failure, 1
runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import InvalidArgumentError, MaskChannelError
from .information import (capacity_envelope, critical_resolution, dense_query_lower_bound,
                          explanation_rate, sparse_query_lower_bound, support_entropy)
from .mi import MiConfig, estimate_mutual_information, find_information_threshold
from .experiments import (run_achievability_sweep, run_curvature_sweep, run_noise_sweep,
                          run_resolution_sweep)

OUTPUT_DIR_ENV = "MASKCHANNEL_OUT"

SUBCOMMANDS = ("achievability", "noise-sweep", "curvature-sweep", "resolution-sweep",
               "mi-estimate", "threshold", "bounds")

DEFAULTS: dict[str, dict] = {
    "achievability": dict(d=12, k=2, sigma=0.1, p=0.5, t_grid="2:60", trials=500,
                          n_outer=2000, n_inner=2000),
    "noise-sweep": dict(d=40, k=3, t=25, p=0.5, sigma_grid="geom:0.05:6:12", trials=400),
    "curvature-sweep": dict(d=40, k=3, t=25, p=0.5,
                            alpha_grid="0.05,0.1,0.2,0.4,0.7,1,1.5,2,3,4,6,8",
                            trials=400, q_seed=1),
    "resolution-sweep": dict(width=64, height=64, rect="4,4,33,33",
                             d_grid="4,9,16,25,36,64,100,144,196,240", t=120, sigma=80.0,
                             p=0.5, lambda_=2.0, trials=200, n_outer=500, n_inner=500),
    "mi-estimate": dict(d=12, k=2, sigma=0.1, p=0.5, t=25, n_outer=2000, n_inner=2000),
    "threshold": dict(d=12, k=2, sigma=0.1, p=0.5, t_grid="1:40", n_outer=2000, n_inner=2000),
    "bounds": dict(d=12, k=2, sigma=0.1, p=0.5, t=25, dynamic_range_bits=8.0),
}
for _sub in SUBCOMMANDS:
    DEFAULTS[_sub].setdefault("seed", 0)
    DEFAULTS[_sub].setdefault("workers", 1)
    DEFAULTS[_sub].setdefault("format", "csv")


@dataclass
class RunConfig:
    """Fully resolved run: subcommand, parameters, and output routing."""

    subcommand: str
    params: dict
    out_dir: str
    format: str = "csv"
    workers: int = 1
    seed: int = 0


def parse_int_grid(text: str) -> tuple[int, ...]:
    """Parse ``lo:hi[:step]`` (inclusive) or a comma list of integers."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(v) for v in text.split(":")]
            if len(parts) == 2:
                lo, hi, step = parts[0], parts[1], 1
            elif len(parts) == 3:
                lo, hi, step = parts
            else:
                raise ValueError
            if step < 1 or hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1, step))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise InvalidArgumentError(
            f"cannot parse integer grid {text!r}; use lo:hi[:step] or v1,v2,...") from None


def parse_float_grid(text: str) -> tuple[float, ...]:
    """Parse ``geom:lo:hi:n`` (log-spaced) or a comma list of floats."""
    text = text.strip()
    try:
        if text.startswith("geom:"):
            lo, hi, n = text[5:].split(":")
            return tuple(float(v) for v in np.geomspace(float(lo), float(hi), int(n)))
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise InvalidArgumentError(
            f"cannot parse float grid {text!r}; use geom:lo:hi:n or v1,v2,...") from None


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, help="master seed; every stream derives from it")
    sp.add_argument("--workers", type=int,
                    help="worker threads (speed only; output is worker-count invariant)")
    sp.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or ./results)")
    sp.add_argument("--format", choices=("csv", "json"), help="result table format")
    sp.add_argument("--config", help="INI config file with one section per subcommand")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskchannel",
        description="Masked-query channel experiments: how many noisy mask probes "
                    "does it take to pin down a sparse ground truth?")
    parser.add_argument("--version", action="version", version=f"maskchannel {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    sp = subs.add_parser("achievability",
                         help="decoder success and extracted bits across query budgets")
    sp.add_argument("--d", type=int, help="feature dimension (number of maskable features)")
    sp.add_argument("--k", type=int, help="true support size")
    sp.add_argument("--sigma", type=float, help="oracle noise standard deviation")
    sp.add_argument("--p", type=float, help="per-feature mask inclusion probability")
    sp.add_argument("--t-grid", help="query budgets, lo:hi[:step] or comma list")
    sp.add_argument("--trials", type=int, help="decoding trials per budget")
    sp.add_argument("--n-outer", type=int, help="outer Monte Carlo samples for the MI estimate")
    sp.add_argument("--n-inner", type=int, help="inner marginal samples for the MI estimate")
    _add_common(sp)

    sp = subs.add_parser("noise-sweep",
                         help="sparse vs dense block-error waterfall against noise")
    sp.add_argument("--d", type=int, help="feature dimension")
    sp.add_argument("--k", type=int, help="true support size")
    sp.add_argument("--t", type=int, help="query budget (fixed across the sweep)")
    sp.add_argument("--p", type=float, help="mask inclusion probability")
    sp.add_argument("--sigma-grid", help="noise levels, geom:lo:hi:n or comma list")
    sp.add_argument("--trials", type=int, help="decoding trials per noise level")
    _add_common(sp)

    sp = subs.add_parser("curvature-sweep",
                         help="error floor against oracle curvature, noiseless channel")
    sp.add_argument("--d", type=int, help="feature dimension")
    sp.add_argument("--k", type=int, help="true support size")
    sp.add_argument("--t", type=int, help="query budget")
    sp.add_argument("--p", type=float, help="mask inclusion probability")
    sp.add_argument("--alpha-grid", help="curvature strengths, geom:lo:hi:n or comma list")
    sp.add_argument("--trials", type=int, help="decoding trials per curvature level")
    sp.add_argument("--q-seed", type=int,
                    help="seed for the shared interaction matrix (drawn once per sweep)")
    _add_common(sp)

    sp = subs.add_parser("resolution-sweep",
                         help="recovery quality vs segmentation resolution on a synthetic image")
    sp.add_argument("--width", type=int, help="image width in pixels")
    sp.add_argument("--height", type=int, help="image height in pixels")
    sp.add_argument("--rect", help="salient rectangle x0,y0,x1,y1 (inclusive pixel bounds)")
    sp.add_argument("--d-grid", help="superpixel counts, comma list (snapped to grid-expressible)")
    sp.add_argument("--t", type=int, help="query budget")
    sp.add_argument("--sigma", type=float, help="oracle noise standard deviation")
    sp.add_argument("--p", type=float, help="mask inclusion probability")
    sp.add_argument("--lambda", dest="lambda_", type=float, help="ridge penalty for the decoder")
    sp.add_argument("--trials", type=int, help="correlation trials per resolution")
    sp.add_argument("--n-outer", type=int, help="outer Monte Carlo samples for the MI estimate")
    sp.add_argument("--n-inner", type=int, help="inner marginal samples for the MI estimate")
    _add_common(sp)

    sp = subs.add_parser("mi-estimate", help="one Monte Carlo information estimate")
    sp.add_argument("--d", type=int, help="feature dimension")
    sp.add_argument("--k", type=int, help="true support size")
    sp.add_argument("--sigma", type=float, help="oracle noise standard deviation")
    sp.add_argument("--p", type=float, help="mask inclusion probability")
    sp.add_argument("--t", type=int, help="query budget")
    sp.add_argument("--n-outer", type=int, help="outer Monte Carlo samples")
    sp.add_argument("--n-inner", type=int, help="inner marginal samples")
    _add_common(sp)

    sp = subs.add_parser("threshold",
                         help="smallest budget whose estimate reaches the support entropy")
    sp.add_argument("--d", type=int, help="feature dimension")
    sp.add_argument("--k", type=int, help="true support size")
    sp.add_argument("--sigma", type=float, help="oracle noise standard deviation")
    sp.add_argument("--p", type=float, help="mask inclusion probability")
    sp.add_argument("--t-grid", help="query budgets to scan, lo:hi[:step] or comma list")
    sp.add_argument("--n-outer", type=int, help="outer Monte Carlo samples per budget")
    sp.add_argument("--n-inner", type=int, help="inner marginal samples per budget")
    _add_common(sp)

    sp = subs.add_parser("bounds",
                         help="closed-form entropy, capacity envelope, and query thresholds")
    sp.add_argument("--d", type=int, help="feature dimension")
    sp.add_argument("--k", type=int, help="true support size")
    sp.add_argument("--sigma", type=float, help="oracle noise standard deviation")
    sp.add_argument("--p", type=float, help="mask inclusion probability")
    sp.add_argument("--t", type=int, help="query budget for the rate and resolution limit")
    sp.add_argument("--dynamic-range-bits", type=float,
                    help="per-coordinate precision log2(B/delta) for the dense threshold")
    _add_common(sp)

    sp = subs.add_parser("rerun", help="reproduce a previous run from its manifest")
    sp.add_argument("manifest", help="path to a manifest JSON emitted by a previous run")
    sp.add_argument("--out", help="output directory (defaults to the manifest's directory)")
    sp.add_argument("--workers", type=int, help="worker threads (output is invariant)")
    return parser


def _resolve(subcommand: str, cli_args: dict, config_path: str | None) -> dict:
    """Merge defaults, config-file section, and CLI flags (increasing precedence)."""
    resolved = dict(DEFAULTS[subcommand])
    if config_path:
        ini = configparser.ConfigParser()
        read = ini.read(config_path)
        if not read:
            raise InvalidArgumentError(f"config file {config_path!r} cannot be read")
        if ini.has_section(subcommand):
            for key, value in ini.items(subcommand):
                key = key.replace("-", "_")
                if key == "lambda":
                    key = "lambda_"
                if key not in resolved:
                    raise InvalidArgumentError(
                        f"unknown config key {key!r} in section [{subcommand}]")
                resolved[key] = value
    for key, value in cli_args.items():
        if value is not None and key in resolved:
            resolved[key] = value
    return resolved


_INT_KEYS = {"d", "k", "t", "trials", "n_outer", "n_inner", "width", "height",
             "seed", "workers", "q_seed"}
_FLOAT_KEYS = {"sigma", "p", "lambda_", "dynamic_range_bits"}


def _coerce(params: dict) -> dict:
    """Cast config-file strings to their parameter types; validate basics."""
    out = {}
    try:
        for key, value in params.items():
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            else:
                out[key] = value
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"parameter {key!r} has invalid value {value!r}") from None
    return out


def parse_and_validate(argv, config_path: str | None = None) -> RunConfig:
    """Resolve argv plus optional config file into a validated RunConfig."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    cli_args = {k: v for k, v in vars(ns).items() if k not in ("subcommand",)}
    if ns.subcommand == "rerun":
        return _rerun_config(ns)
    config_path = cli_args.pop("config", None) or config_path
    out_dir = cli_args.pop("out", None)
    params = _coerce(_resolve(ns.subcommand, cli_args, config_path))
    out_dir = out_dir or os.environ.get(OUTPUT_DIR_ENV) or "results"
    fmt = params.pop("format")
    if fmt not in ("csv", "json"):
        raise InvalidArgumentError(f"format must be csv or json, got {fmt!r}")
    workers = params.pop("workers")
    seed = params.pop("seed")
    if workers < 0:
        raise InvalidArgumentError(f"workers must be >= 0, got {workers}")
    if seed < 0:
        raise InvalidArgumentError(f"seed must be >= 0, got {seed}")
    return RunConfig(ns.subcommand, params, out_dir, fmt, workers, seed)


def _rerun_config(ns) -> RunConfig:
    with open(ns.manifest) as fh:
        manifest = json.load(fh)
    for key in ("subcommand", "parameters", "seed", "format"):
        if key not in manifest:
            raise InvalidArgumentError(f"manifest is missing the {key!r} field")
    out_dir = ns.out or os.path.dirname(os.path.abspath(ns.manifest))
    workers = ns.workers if ns.workers is not None else manifest.get("workers", 1)
    return RunConfig(manifest["subcommand"], dict(manifest["parameters"]), out_dir,
                     manifest["format"], workers, manifest["seed"])


# --------------------------------------------------------------------------
# execution and serialization


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str, rows: list[dict]) -> None:
    """Header plus one newline-terminated row per record, 12 significant digits."""
    header = list(rows[0]) if rows else []
    lines = [",".join(header)]
    lines += [",".join(_fmt(row[col]) for col in header) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: str, rows: list[dict]) -> None:
    _atomic_write(path, json.dumps(rows, indent=2) + "\n")


def _decoder_columns(row, names) -> dict:
    out = {}
    for public, internal in names.items():
        stat = row.decoder_stats[internal]
        out[f"{public}_err"] = 1.0 - stat.rate
        out[f"{public}_stderr"] = stat.std_error
    return out


def execute(run: RunConfig) -> tuple[list[dict], dict]:
    """Run the resolved subcommand; return (table rows, summary)."""
    p = dict(run.params)
    summary: dict = {}
    rows: list[dict] = []

    if run.subcommand == "achievability":
        result = run_achievability_sweep(
            d=p["d"], k=p["k"], sigma=p["sigma"], p=p["p"],
            t_grid=parse_int_grid(p["t_grid"]), n_trials=p["trials"],
            n_outer=p["n_outer"], n_inner=p["n_inner"], seed=run.seed, workers=run.workers)
        for row in result.rows:
            rows.append({
                "t": int(row.sweep_value),
                "mi_bits": row.mi_estimate.value_bits,
                "mi_stderr": row.mi_estimate.std_error_bits,
                "entropy_bits": row.entropy_bits,
                "ml_rate": row.decoder_stats["ml"].rate,
                "ml_stderr": row.decoder_stats["ml"].std_error,
                "lasso_rate": row.decoder_stats["lasso"].rate,
                "lasso_stderr": row.decoder_stats["lasso"].std_error,
                "ols_rate": row.decoder_stats["ols"].rate,
                "ols_stderr": row.decoder_stats["ols"].std_error,
            })
        summary = {"t_it": result.t_it, "entropy_bits": result.entropy_bits,
                   "analytic_marker_queries": result.analytic_marker_queries}

    elif run.subcommand == "noise-sweep":
        result = run_noise_sweep(
            d=p["d"], k=p["k"], t=p["t"], p=p["p"],
            sigma_grid=parse_float_grid(p["sigma_grid"]), n_trials=p["trials"],
            seed=run.seed, workers=run.workers)
        for row in result:
            rows.append({
                "sigma": row.sweep_value,
                "p_s": row.power_stats.p_s,
                "p_n": row.power_stats.p_n,
                "snr_db": row.power_stats.snr_db,
                **_decoder_columns(row, {"sparse": "sparse", "dense": "dense"}),
            })

    elif run.subcommand == "curvature-sweep":
        result = run_curvature_sweep(
            d=p["d"], k=p["k"], t=p["t"], p=p["p"],
            alpha_grid=parse_float_grid(p["alpha_grid"]), n_trials=p["trials"],
            q_seed=p["q_seed"], seed=run.seed, workers=run.workers)
        for row in result:
            rows.append({
                "alpha": row.sweep_value,
                "p_s": row.power_stats.p_s,
                "p_i": row.power_stats.p_i,
                "sir_db": row.power_stats.sir_db,
                **_decoder_columns(row, {"sparse": "sparse", "dense": "dense"}),
            })

    elif run.subcommand == "resolution-sweep":
        rect = tuple(int(v) for v in str(p["rect"]).split(","))
        if len(rect) != 4:
            raise InvalidArgumentError(f"rect must be x0,y0,x1,y1, got {p['rect']!r}")
        result = run_resolution_sweep(
            width=p["width"], height=p["height"], salient_rect=rect,
            d_grid=parse_int_grid(p["d_grid"]), t=p["t"], sigma=p["sigma"], p=p["p"],
            lambda_ridge=p["lambda_"], n_trials=p["trials"], mi_n_outer=p["n_outer"],
            mi_n_inner=p["n_inner"], seed=run.seed, workers=run.workers)
        for row in result:
            rows.append({
                "d": int(row.sweep_value),
                "requested_d": row.metadata["requested_d"],
                "k": row.metadata["k"],
                "entropy_bits": row.entropy_bits,
                "mi_bits": row.mi_estimate.value_bits,
                "mi_stderr": row.mi_estimate.std_error_bits,
                "mi_truncated": row.metadata["mi_truncated"],
                "feasible": row.metadata["feasible"],
                "correlation": row.correlation,
                "correlation_stderr": row.correlation_std_error,
                "correlation_degenerate": row.correlation_degenerate,
            })

    elif run.subcommand == "mi-estimate":
        config = MiConfig(d=p["d"], k=p["k"], sigma=p["sigma"], p=p["p"],
                          n_outer=p["n_outer"], n_inner=p["n_inner"], seed=run.seed)
        est = estimate_mutual_information(config, p["t"], workers=run.workers)
        rows.append({"t": est.t, "mi_bits": est.value_bits, "mi_stderr": est.std_error_bits,
                     "n_outer": est.n_outer, "n_inner": est.n_inner})

    elif run.subcommand == "threshold":
        config = MiConfig(d=p["d"], k=p["k"], sigma=p["sigma"], p=p["p"],
                          n_outer=p["n_outer"], n_inner=p["n_inner"],
                          t_grid=parse_int_grid(p["t_grid"]), seed=run.seed)
        scan = find_information_threshold(config, workers=run.workers)
        for est in scan.estimates:
            rows.append({"t": est.t, "mi_bits": est.value_bits,
                         "mi_stderr": est.std_error_bits,
                         "entropy_bits": scan.entropy_bits,
                         "met": est.value_bits >= scan.entropy_bits})
        summary = {"t_it": scan.t_it, "entropy_bits": scan.entropy_bits}

    elif run.subcommand == "bounds":
        d, k, sigma, pp, t = p["d"], p["k"], p["sigma"], p["p"], p["t"]
        entropy = support_entropy(d, k)
        c_env = capacity_envelope(k, sigma, pp)
        rows.append({
            "d": d, "k": k, "sigma": sigma, "p": pp, "t": t,
            "entropy_bits": entropy,
            "c_env_bits": c_env,
            "rate_bits_per_query": explanation_rate(entropy, t),
            "dense_min_queries": dense_query_lower_bound(d, c_env, p["dynamic_range_bits"]),
            "sparse_min_queries": sparse_query_lower_bound(d, k, c_env) if k >= 1 else None,
            "d_crit": critical_resolution(t, k, c_env) if k >= 1 else None,
            "dynamic_range_bits": p["dynamic_range_bits"],
        })

    else:  # pragma: no cover - parser restricts choices
        raise InvalidArgumentError(f"unknown subcommand {run.subcommand!r}")

    return rows, summary


def run_and_write(run: RunConfig) -> str:
    """Execute and persist table plus manifest; returns the table path."""
    started = time.monotonic()
    rows, summary = execute(run)
    os.makedirs(run.out_dir, exist_ok=True)
    table_name = f"{run.subcommand}.{run.format}"
    table_path = os.path.join(run.out_dir, table_name)
    if run.format == "csv":
        write_csv(table_path, rows)
    else:
        write_json(table_path, rows)
    manifest = {
        "tool": "maskchannel",
        "version": __version__,
        "subcommand": run.subcommand,
        "parameters": run.params,
        "seed": run.seed,
        "format": run.format,
        "workers": run.workers,
        "table": table_name,
        "summary": summary,
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    _atomic_write(os.path.join(run.out_dir, f"{run.subcommand}-manifest.json"),
                  json.dumps(manifest, indent=2) + "\n")
    for key, value in summary.items():
        print(f"{key}: {value}")
    print(f"wrote {table_path}")
    return table_path


def main(argv=None) -> int:
    try:
        run = parse_and_validate(sys.argv[1:] if argv is None else list(argv))
    except (InvalidArgumentError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        run_and_write(run)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MaskChannelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
