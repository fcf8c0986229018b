"""Experiment configs, run records, and gamma-vs-n reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from symcap import __version__
from symcap.bodies import (
    Ball,
    ConvexBody,
    CrossPolytope,
    Cube,
    Ellipsoid,
    LinearImage,
    LpBall,
    SchattenBall,
    VertexPolytope,
    Zonotope,
    body_from_dict,
    volume,
)
from symcap.capacity import (
    ellipsoid_capacity,
    gamma_ratio,
    inradius_lower_bound,
    lowner_baseline,
    random_plane_search,
)
from symcap.errors import ConfigError, InputError, SchemaError, SymcapError
from symcap.positions import main_pipeline

SCHEMA = "symcap.runrecord/1"
METHODS = ("plane-search", "lowner", "ellipsoid", "inradius", "pipeline")
FAMILIES = (
    "ball", "cube", "cross_polytope", "lp_ball", "random_ellipsoid",
    "distorted_cross_polytope", "distorted_cube", "random_zonotope", "schatten_ball", "simplex",
)
DEFAULT_BUDGETS = {"mc_samples": 200_000, "search_trials": 200, "position_budget": 400, "grid_m": 720}


# -- body families -------------------------------------------------------------------

def _pair_diagonal(rng, n: int, spread: float = 0.5) -> np.ndarray:
    log_a = rng.uniform(-spread, spread, size=n)
    log_a -= log_a.mean()
    return np.repeat(np.exp(log_a), 2)


def make_body(spec: dict, dim: int | None, seed: int = 0) -> ConvexBody:
    """Instantiate a family description at one dimension.

    A description with ``kind`` is a literal body and ignores ``dim``;
    a description with ``family`` is built at ``dim`` (random families draw
    their parameters from ``seed``).
    """
    if "kind" in spec:
        return body_from_dict(spec)
    fam = spec.get("family")
    if fam not in FAMILIES:
        raise ConfigError(f"unknown body family {fam!r}", "bodies")
    rng = np.random.default_rng([seed, dim or 0, 99])
    if fam == "ball":
        return Ball(dim, spec.get("r", 1.0))
    if fam == "cube":
        return Cube(dim, spec.get("a", 1.0))
    if fam == "cross_polytope":
        return CrossPolytope(dim)
    if fam == "lp_ball":
        p = spec["p"]
        return LpBall(dim, math.inf if p in ("inf", math.inf) else float(p))
    if fam == "random_ellipsoid":
        A = rng.standard_normal((dim, dim))
        return Ellipsoid(A.T @ A + 0.5 * np.eye(dim))
    if fam == "distorted_cross_polytope":
        return LinearImage(np.diag(_pair_diagonal(rng, dim // 2)), CrossPolytope(dim))
    if fam == "distorted_cube":
        return LinearImage(np.diag(np.exp(rng.uniform(-0.5, 0.5, size=dim))), Cube(dim))
    if fam == "random_zonotope":
        m = spec.get("segments_per_n", 4) * (dim // 2)
        return Zonotope(rng.standard_normal((m, dim)) / math.sqrt(dim))
    if fam == "schatten_ball":
        m = math.isqrt(dim)
        if m * m != dim:
            raise ConfigError(f"schatten_ball needs a square dimension, got {dim}", "dims")
        return SchattenBall(spec.get("p", 2.0), m)
    if fam == "simplex":
        V = np.vstack([np.zeros(dim), np.eye(dim)])
        return VertexPolytope(V - V.mean(axis=0))
    raise AssertionError(fam)


def family_label(spec: dict) -> str:
    if "label" in spec:
        return str(spec["label"])
    if "kind" in spec:
        return spec["kind"]
    extra = "".join(f"_{k}{spec[k]}" for k in sorted(spec) if k != "family")
    return spec["family"] + extra


# -- config ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    bodies: list = field(default_factory=list)
    dims: list = field(default_factory=list)
    methods: list = field(default_factory=lambda: ["plane-search"])
    seeds: list = field(default_factory=lambda: [0])
    budgets: dict = field(default_factory=lambda: dict(DEFAULT_BUDGETS))
    output: dict = field(default_factory=lambda: {"path": None, "format": "json"})

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.bodies, list):
            raise ConfigError("must be a list", "bodies")
        for b in self.bodies:
            if not isinstance(b, dict) or not ("kind" in b or "family" in b):
                raise ConfigError(f"entry needs 'kind' or 'family': {b!r}", "bodies")
            if "family" in b and b["family"] not in FAMILIES:
                raise ConfigError(f"unknown body family {b['family']!r}", "bodies")
            if "kind" in b:
                try:
                    body_from_dict(b)
                except (InputError, KeyError, TypeError) as exc:
                    raise ConfigError(f"bad body description: {exc}", "bodies") from None
        for d in self.dims:
            if not isinstance(d, int) or d < 2 or d % 2:
                raise ConfigError(f"dimension must be an even integer >= 2, got {d!r}", "dims")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}", "methods")
        for s in self.seeds:
            if not isinstance(s, int):
                raise ConfigError(f"seed must be an integer, got {s!r}", "seeds")
        unknown = set(self.budgets) - set(DEFAULT_BUDGETS)
        if unknown:
            raise ConfigError(f"unknown budget keys {sorted(unknown)}", "budgets")
        fmt = self.output.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {fmt!r}", "output")

    @property
    def budget(self) -> dict:
        return {**DEFAULT_BUDGETS, **self.budgets}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - {"bodies", "dims", "methods", "seeds", "budgets", "output"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", "config")
        out = {"path": None, "format": "json", **d.get("output", {})}
        return cls(
            bodies=list(d.get("bodies", [])),
            dims=list(d.get("dims", [])),
            methods=list(d.get("methods", ["plane-search"])),
            seeds=list(d.get("seeds", [0])),
            budgets=dict(d.get("budgets", {})),
            output=out,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(str(exc), "config") from None

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# -- running -----------------------------------------------------------------------------

@dataclass
class RunRecord:
    config: dict
    config_hash: str
    timestamp: str
    tool_version: str
    cells: list = field(default_factory=list)
    wall_time: float = 0.0
    schema: str = SCHEMA

    @property
    def failures(self) -> list:
        return [c for c in self.cells if c["status"] != "ok"]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        required = {"config", "config_hash", "timestamp", "tool_version", "cells", "schema"}
        missing = required - set(d)
        if missing:
            raise SchemaError(f"run record missing fields {sorted(missing)}")
        if d["schema"] != SCHEMA:
            raise SchemaError(f"unsupported run record schema {d['schema']!r}")
        return cls(**{k: d[k] for k in required | {"wall_time"} if k in d})

    def save(self, path, fmt: str = "json"):
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                fh.write(cells_csv(self.cells))
            else:
                json.dump(self.to_dict(), fh, indent=1, sort_keys=True)


def _cell_dims(spec: dict, dims: list) -> list:
    if "kind" in spec:
        return [spec.get("dim") or body_from_dict(spec).dim]
    return dims


def _evaluate(method: str, K: ConvexBody, seed: int, budget: dict) -> dict:
    grid = budget["grid_m"]
    stage = {}
    t0 = time.perf_counter()
    extra = {}
    if method == "plane-search":
        bound, rate = random_plane_search(K, budget["search_trials"], "cube_vertices", seed, grid)
        extra["success_rate"] = rate
    elif method == "lowner":
        bound = lowner_baseline(K)
    elif method == "ellipsoid":
        M = K.ellipsoid_matrix()
        if M is None:
            raise InputError(f"{K.kind} is not an ellipsoid")
        bound = ellipsoid_capacity(M)
    elif method == "inradius":
        bound = inradius_lower_bound(K, seed)
    elif method == "pipeline":
        rep = main_pipeline(K, budget["position_budget"], budget["search_trials"], seed, grid,
                            volume_budget=budget["mc_samples"])
        if rep.error:
            raise SymcapError(f"pipeline failed after {rep.stages}: {rep.error}")
        bound = rep.bound
        extra["mstar_before"] = rep.position.mstar_before.value
        extra["mstar_after"] = rep.position.mstar_after.value
        extra["position_kind"] = rep.bound.certificate.get("position_kind")
        stage.update({f"pipeline.{k}": v for k, v in rep.wall_time.items()})
    else:
        raise ConfigError(f"unknown method {method!r}", "methods")
    stage["bound"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    vol = volume(K, budget["mc_samples"], seed)
    stage["volume"] = time.perf_counter() - t0
    gamma = gamma_ratio(K, bound, vol) if bound.is_upper else None
    return {"bound": bound.to_dict(), "volume": vol.to_dict(), "gamma": gamma,
            "extra": extra, "wall_time": stage}


def _run_cell(spec: dict, label: str, dim: int, seed: int, method: str, budget: dict) -> dict:
    cell = {"family": label, "dim": dim, "n": dim // 2, "seed": seed, "method": method, "status": "ok"}
    try:
        K = make_body(spec, dim, seed)
        cell["body_id"] = K.body_id
        cell.update(_evaluate(method, K, seed, budget))
    except (SymcapError, NotImplementedError, np.linalg.LinAlgError) as exc:
        cell["status"] = "error"
        cell["error"] = f"{type(exc).__name__}: {exc}"
    return cell


def run(config: ExperimentConfig, threads: int = 1) -> RunRecord:
    """Evaluate every (body, dim, seed, method) cell; failures stay per-cell.

    Cells are independent and keep their config order, so ``threads`` only
    changes the wall time.
    """
    t_start = time.perf_counter()
    record = RunRecord(
        config=config.to_dict(),
        config_hash=config.config_hash(),
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        tool_version=__version__,
    )
    budget = config.budget
    jobs = []
    for spec in config.bodies:
        label = family_label(spec)
        for dim in _cell_dims(spec, config.dims):
            for seed in config.seeds:
                for method in config.methods:
                    jobs.append((spec, label, dim, seed, method, budget))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            record.cells = list(pool.map(lambda j: _run_cell(*j), jobs))
    else:
        record.cells = [_run_cell(*j) for j in jobs]
    record.wall_time = time.perf_counter() - t_start
    path = config.output.get("path")
    if path:
        record.save(path, config.output.get("format", "json"))
    return record


def certified_values(record: RunRecord) -> list:
    """The parts of a record that replay must reproduce bit for bit."""
    out = []
    for c in record.cells:
        b = c.get("bound") or {}
        out.append((c["family"], c["dim"], c["seed"], c["method"], c["status"], b.get("kind"),
                    b.get("value"), (c.get("volume") or {}).get("value") if
                    (c.get("volume") or {}).get("exactness") == "exact" else None))
    return out


def replay(record: RunRecord, threads: int = 1) -> tuple[RunRecord, bool]:
    cfg = ExperimentConfig.from_dict({**record.config, "output": {"path": None, "format": "json"}})
    again = run(cfg, threads)
    return again, certified_values(again) == certified_values(record)


def summary_table(record: RunRecord) -> str:
    lines = [f"{'family':<28} {'n':>3} {'method':<13} {'bound':>12} {'gamma':>9}  status"]
    for c in record.cells:
        b = c.get("bound") or {}
        val = f"{b['value']:.6g}" if "value" in b else "-"
        g = f"{c['gamma']:.4f}" if c.get("gamma") is not None else "-"
        lines.append(f"{c['family']:<28} {c['n']:>3} {c['method']:<13} {val:>12} {g:>9}  {c['status']}")
    return "\n".join(lines)


CELL_COLUMNS = ["family", "dim", "n", "seed", "method", "status", "bound_kind", "bound",
                "volume", "volume_exactness", "gamma"]


def cells_csv(cells: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(CELL_COLUMNS)
    for c in cells:
        b = c.get("bound") or {}
        v = c.get("volume") or {}
        w.writerow([c["family"], c["dim"], c["n"], c["seed"], c["method"], c["status"],
                    b.get("kind", ""), b.get("value", ""), v.get("value", ""),
                    v.get("exactness", ""), "" if c.get("gamma") is None else c["gamma"]])
    return buf.getvalue()


# -- reports ----------------------------------------------------------------------------

REPORT_COLUMNS = ["family", "method", "n", "gamma", "two_n", "log_sq_n", "flag"]


@dataclass
class Report:
    rows: list

    @property
    def flagged(self) -> list:
        return [r for r in self.rows if r["flag"]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for r in self.rows:
            w.writerow(r)
        return buf.getvalue()

    def tables(self) -> str:
        out = []
        by_family = {}
        for r in self.rows:
            by_family.setdefault((r["family"], r["method"]), []).append(r)
        for (fam, method), rows in sorted(by_family.items()):
            out.append(f"# {fam} / {method}")
            out.append(f"{'n':>4} {'gamma':>10} {'2n':>6} {'log^2 n':>9}")
            for r in sorted(rows, key=lambda r: r["n"]):
                mark = "  <-- gamma > 2n" if r["flag"] else ""
                out.append(f"{r['n']:>4} {r['gamma']:>10.5f} {r['two_n']:>6} {r['log_sq_n']:>9.4f}{mark}")
            out.append("")
        return "\n".join(out)


def report(records: list) -> Report:
    """Gamma-vs-n rows per family; ``flag`` marks gamma > 2n.

    gamma > 2n cannot happen for a symmetric body with a correct bound, so a
    flagged row points at a bug.
    """
    if not records:
        raise SchemaError("report needs at least one run record")
    recs = [r if isinstance(r, RunRecord) else RunRecord.from_dict(r) for r in records]
    rows = []
    for rec in recs:
        for c in rec.cells:
            for key in ("family", "dim", "n", "method", "status"):
                if key not in c:
                    raise SchemaError(f"cell missing field {key!r}")
            if c["dim"] != 2 * c["n"]:
                raise SchemaError(f"cell has dim {c['dim']} but n {c['n']}")
            if c["status"] != "ok" or c.get("gamma") is None:
                continue
            n = int(c["n"])
            gamma = float(c["gamma"])
            rows.append({
                "family": c["family"],
                "method": c["method"],
                "n": n,
                "gamma": gamma,
                "two_n": 2 * n,
                "log_sq_n": math.log(n) ** 2 if n > 1 else 0.0,
                "flag": gamma > 2 * n,
            })
    return Report(rows)


# -- sweep --------------------------------------------------------------------------------

SWEEP_COLUMNS = ["family", "n", "bound", "volume", "gamma", "two_n_baseline"]


def sweep(spec: dict, dims: list, seed: int = 0, budget: dict | None = None) -> list:
    """Pipeline over one family and a range of dimensions; one row per n."""
    budget = {**DEFAULT_BUDGETS, **(budget or {})}
    label = family_label(spec)
    rows = []
    for dim in dims:
        K = make_body(spec, dim, seed)
        rep = main_pipeline(K, budget["position_budget"], budget["search_trials"], seed,
                            budget["grid_m"], volume_budget=budget["mc_samples"])
        if rep.error:
            raise SymcapError(f"{label} dim {dim}: {rep.error}")
        rows.append({"family": label, "n": dim // 2, "bound": rep.bound.value,
                     "volume": rep.volume.value, "gamma": rep.gamma,
                     "two_n_baseline": rep.overlays["two_n_baseline"]})
    return rows


def rows_csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
