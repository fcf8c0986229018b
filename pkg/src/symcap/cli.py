"""Command-line entry point.

Exit codes: 0 success, 2 config or input error, 3 numerical error,
4 partial failure (failed cells, an incomplete pipeline, or flagged report rows).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from symcap import __version__
from symcap.bodies import body_from_dict
from symcap.capacity import (
    _jsonable,
    ellipsoid_capacity,
    inradius_lower_bound,
    lowner_baseline,
    random_plane_search,
)
from symcap.config import DEFAULT_GRID, DEFAULT_POSITION_BUDGET, DEFAULT_TRIALS, DEFAULT_WIDTH_SAMPLES
from symcap.errors import ConfigError, InputError, NumericalError, SchemaError, SymcapError
from symcap.experiment import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    RunRecord,
    make_body,
    report,
    rows_csv,
    run,
    summary_table,
    sweep,
)
from symcap.positions import main_pipeline
from symcap.symplect import symplectic_spectrum, wds_decompose
from symcap.widths import mean_norm, mean_width, rademacher_average

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4


def _read_json_arg(text: str, what: str):
    """JSON given inline, or the path of a file holding it."""
    if os.path.isfile(text):
        with open(text) as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} is not valid JSON: {exc}", what) from None


def parse_body(text: str):
    d = _read_json_arg(text, "body")
    if not isinstance(d, dict):
        raise ConfigError("body must be a JSON object", "body")
    if "family" in d:
        if "dim" not in d:
            raise ConfigError("a family body needs 'dim'", "body")
        return make_body(d, int(d["dim"]), int(d.get("seed", 0)))
    return body_from_dict(d)


def parse_matrix(text: str) -> np.ndarray:
    A = np.asarray(_read_json_arg(text, "matrix"), dtype=float)
    if A.ndim == 1:
        k = math.isqrt(A.size)
        if k * k != A.size:
            raise InputError(f"flat matrix of length {A.size} is not square")
        A = A.reshape(k, k)
    return A


def _emit(args, payload: str):
    out = getattr(args, "output", None)
    if out:
        with open(out, "w") as fh:
            fh.write(payload if payload.endswith("\n") else payload + "\n")
    else:
        print(payload)


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1)


# -- subcommands -------------------------------------------------------------------------

def cmd_bound(args) -> int:
    K = parse_body(args.body)
    if args.method == "plane-search":
        b, _ = random_plane_search(K, args.trials, "cube_vertices", args.seed, args.grid)
    elif args.method == "lowner":
        b = lowner_baseline(K)
    elif args.method == "ellipsoid":
        M = K.ellipsoid_matrix()
        if M is None:
            raise InputError(f"{K.kind} is not an ellipsoid")
        b = ellipsoid_capacity(M)
    else:
        b = inradius_lower_bound(K, args.seed)
    _emit(args, _dump(b.to_dict()))
    return EXIT_OK


def cmd_width(args) -> int:
    K = parse_body(args.body)
    if args.kind == "sstar":
        w = rademacher_average(K, "exact" if args.exact else "mc", args.samples, args.seed, args.threads)
    elif args.exact:
        raise InputError(f"--exact only applies to sstar, not {args.kind}")
    elif args.kind == "mstar":
        w = mean_width(K, args.samples, args.seed, args.threads)
    else:
        w = mean_norm(K, args.samples, args.seed, args.threads)
    d = w.to_dict()
    _emit(args, _dump({k: d[k] for k in ("value", "stderr", "samples", "seed", "exact")}))
    return EXIT_OK


def cmd_decompose(args) -> int:
    T = parse_matrix(args.matrix)
    wds = wds_decompose(T)
    _emit(args, _dump({**wds.to_dict(), "r": wds.r, "residuals": wds.residuals(T)}))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    M = parse_matrix(args.matrix)
    spec = symplectic_spectrum(M)
    cap = ellipsoid_capacity(M)
    _emit(args, _dump({"radii": spec.radii, "S": spec.S, "capacity": cap.value}))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    K = parse_body(args.body)
    rep = main_pipeline(K, args.budget, args.trials, args.seed, args.grid, volume_budget=args.samples)
    _emit(args, _dump(rep.to_dict()))
    if rep.error:
        print(f"pipeline incomplete: {rep.error}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.family.lstrip().startswith("{") or os.path.isfile(args.family):
        spec = _read_json_arg(args.family, "family")
    else:
        spec = {"family": args.family}
        if args.p is not None:
            spec["p"] = args.p
    dims = args.dims
    for d in dims:
        if d < 2 or d % 2:
            raise ConfigError(f"dimension must be an even integer >= 2, got {d}", "dims")
    budget = {"position_budget": args.budget, "search_trials": args.trials,
              "grid_m": args.grid, "mc_samples": args.samples}
    rows = sweep(spec, dims, args.seed, budget)
    _emit(args, rows_csv(rows, SWEEP_COLUMNS).rstrip("\n"))
    return EXIT_OK


def cmd_report(args) -> int:
    records = []
    for path in args.records:
        try:
            with open(path) as fh:
                records.append(RunRecord.from_dict(json.load(fh)))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read run record {path}: {exc}") from None
    rep = report(records)
    if args.format == "csv":
        _emit(args, rep.to_csv().rstrip("\n"))
    else:
        _emit(args, rep.tables())
    for r in rep.flagged:
        print(f"flag: gamma {r['gamma']:.6g} exceeds 2n = {r['two_n']} for "
              f"{r['family']} / {r['method']} at n = {r['n']}", file=sys.stderr)
    return EXIT_PARTIAL if rep.flagged else EXIT_OK


def cmd_run(args) -> int:
    if not getattr(args, "config", None):
        raise ConfigError("run needs --config", "config")
    cfg = ExperimentConfig.load(args.config)
    if getattr(args, "output", None):
        cfg.output["path"] = args.output
    record = run(cfg, args.threads)
    print(summary_table(record))
    print(f"{len(record.cells)} cells, {len(record.failures)} failed, {record.wall_time:.2f} s")
    return EXIT_PARTIAL if record.failures else EXIT_OK


# -- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--output", default=argparse.SUPPRESS, help="write the result here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="symcap", parents=[common],
                                description="Certified bounds on the linear cylindrical capacity of convex bodies.")
    p.add_argument("--version", action="version", version=f"symcap {__version__}")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("bound", parents=[common], help="one capacity bound with its certificate")
    s.add_argument("--body", required=True, help="body JSON, inline or a file path")
    s.add_argument("--method", choices=["plane-search", "lowner", "ellipsoid", "inradius"],
                   default="plane-search")
    s.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    s.add_argument("--grid", type=int, default=DEFAULT_GRID)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("width", parents=[common], help="M*, M or s* of a body")
    s.add_argument("--body", required=True)
    s.add_argument("--kind", choices=["mstar", "m", "sstar"], default="mstar")
    s.add_argument("--samples", type=int, default=DEFAULT_WIDTH_SAMPLES)
    s.add_argument("--exact", action="store_true", help="enumerate all cube vertices (sstar only)")
    s.set_defaults(func=cmd_width)

    s = sub.add_parser("decompose", parents=[common], help="T = W D S split of a matrix")
    s.add_argument("--matrix", required=True, help="row-major JSON matrix, inline or a file path")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("spectrum", parents=[common], help="symplectic radii of {<Mx, x> <= 1}")
    s.add_argument("--matrix", required=True)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("pipeline", parents=[common], help="position, split, plane, bound, gamma")
    s.add_argument("--body", required=True)
    s.add_argument("--budget", type=int, default=DEFAULT_POSITION_BUDGET)
    s.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    s.add_argument("--grid", type=int, default=DEFAULT_GRID)
    s.add_argument("--samples", type=int, default=200_000, help="volume Monte Carlo budget")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("sweep", parents=[common], help="pipeline over a family and dimensions (CSV)")
    s.add_argument("--family", required=True, help="family name or family JSON")
    s.add_argument("--p", type=float, default=None, help="exponent for lp_ball / schatten_ball")
    s.add_argument("--dims", type=int, nargs="+", required=True)
    s.add_argument("--budget", type=int, default=DEFAULT_POSITION_BUDGET)
    s.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    s.add_argument("--grid", type=int, default=DEFAULT_GRID)
    s.add_argument("--samples", type=int, default=200_000)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", parents=[common], help="gamma-vs-n tables from run records")
    s.add_argument("records", nargs="+", help="RunRecord JSON files")
    s.add_argument("--format", choices=["table", "csv"], default="table")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("run", parents=[common], help="run an experiment config")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed = getattr(args, "seed", 0)
    args.threads = max(1, getattr(args, "threads", 1))
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = getattr(args, "func", None)
    if func is None:
        if getattr(args, "config", None):
            func = cmd_run
        else:
            parser.print_help(sys.stderr)
            return EXIT_CONFIG
    try:
        return func(args)
    except (ConfigError, InputError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SymcapError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
