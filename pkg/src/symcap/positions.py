"""Position search and the end-to-end capacity pipeline.

The pipeline looks for a volume-preserving T with small mean width of T K,
splits T = W D S, moves K to the symplectic position S K, and picks a
holomorphic plane from the cube-vertex search on D S K. Width estimates only
steer the search: the reported bound is recomputed from support values of
S K on the chosen plane.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from symcap.bodies import ConvexBody, LinearImage, VolumeResult, difference_body, volume
from symcap.capacity import (
    CapacityBound,
    candidate_directions,
    cylinder_bound,
    gamma_ratio,
    planar_radius,
    polish_pair,
    symplectic_completion,
)
from symcap.config import (
    DEFAULT_GRID,
    DEFAULT_POSITION_BUDGET,
    DEFAULT_POSITION_SAMPLES,
    DEFAULT_TRIALS,
)
from symcap.errors import InputError, SymcapError
from symcap.symplect import (
    HolomorphicPlane,
    WdsDecomposition,
    apply_j,
    holomorphic_plane_from,
    symplectic_spectrum,
    wds_decompose,
)
from symcap.widths import WidthEstimate, cube_vertex_points, sphere_points, sstar_auto

log = logging.getLogger(__name__)

ROGERS_SHEPHARD_FACTOR = 16.0
MAX_PROP_CANDIDATES = 16


@dataclass
class PositionSearchResult:
    T: np.ndarray
    mstar_before: WidthEstimate
    mstar_after: WidthEstimate
    trace: list = field(default_factory=list)
    seed: int = 0
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "T": self.T.tolist(),
            "det": float(np.linalg.det(self.T)),
            "mstar_before": self.mstar_before.to_dict(),
            "mstar_after": self.mstar_after.to_dict(),
            "trace": [list(t) for t in self.trace],
            "seed": self.seed,
            "evaluations": self.evaluations,
        }


class _Objective:
    """M*(T K) on a fixed sphere sample, counting evaluations."""

    def __init__(self, K: ConvexBody, samples: int, seed: int):
        self.K = K
        self.X = sphere_points(K.dim, samples, seed)
        self.calls = 0
        self.seed = seed

    def values(self, T: np.ndarray) -> np.ndarray:
        self.calls += 1
        return self.K.support_many(self.X @ T)

    def __call__(self, T: np.ndarray) -> float:
        return float(self.values(T).mean())

    def estimate(self, T: np.ndarray) -> WidthEstimate:
        h = self.K.support_many(self.X @ T)
        return WidthEstimate("mstar", float(h.mean()), float(h.std(ddof=1) / math.sqrt(len(h))),
                             len(h), self.seed, False, self.K.dim)


def _unit_det(T: np.ndarray) -> np.ndarray:
    det = np.linalg.det(T)
    if det < 0:
        T = T.copy()
        T[0] = -T[0]
        det = -det
    return T / det ** (1.0 / len(T))


def _ellipsoid_start(K: ConvexBody) -> np.ndarray | None:
    """T with T K a ball, det T = 1, when K is an ellipsoid."""
    M = K.ellipsoid_matrix()
    if M is None:
        return None
    w, V = np.linalg.eigh(M)
    return _unit_det((V * np.sqrt(w)) @ V.T)


def optimize_position(K: ConvexBody, budget: int = DEFAULT_POSITION_BUDGET, seed: int = 0,
                      samples: int = DEFAULT_POSITION_SAMPLES) -> PositionSearchResult:
    """Derivative-free descent of M*(T K) over det T = 1.

    T = diag(exp(l)) G B with sum(l) = 0, G a product of accepted two-plane
    rotations and B the starting matrix. Moves alternate between one
    coordinate of l and one random rotation; step sizes shrink on rejection.
    Every objective value uses the same sphere sample, so an accepted move is
    a strict improvement of the same estimator.
    """
    if budget < 1:
        raise InputError("budget must be >= 1")
    if not K.symmetric:
        raise InputError("optimize_position needs a symmetric body")
    d = K.dim
    obj = _Objective(K, samples, seed)
    rng = np.random.default_rng([seed, 11])
    identity = np.eye(d)
    best_val = obj(identity)
    trace = [(0, best_val)]
    base = identity
    start = _ellipsoid_start(K)
    if start is not None and obj.calls < budget:
        val = obj(start)
        if val < best_val:
            base, best_val = start, val
            trace.append((obj.calls, best_val))

    ell = np.zeros(d)
    G = np.eye(d)
    delta = np.full(d, 0.3)
    theta = 0.3
    step = 0

    def assemble(ell_, G_):
        return (np.exp(ell_ - ell_.mean())[:, None] * G_) @ base

    while obj.calls < budget:
        step += 1
        if step % 2:
            i = (step // 2) % d
            improved = False
            for sgn in (1.0, -1.0):
                if obj.calls >= budget:
                    break
                trial = ell.copy()
                trial[i] += sgn * delta[i]
                val = obj(assemble(trial, G))
                if val < best_val:
                    ell, best_val, improved = trial - trial.mean(), val, True
                    delta[i] *= 1.5
                    break
            if not improved:
                delta[i] *= 0.5
        else:
            i, j = rng.choice(d, size=2, replace=False)
            ang = theta * rng.choice((-1.0, 1.0))
            R = np.eye(d)
            c, s = math.cos(ang), math.sin(ang)
            R[i, i] = R[j, j] = c
            R[i, j], R[j, i] = -s, s
            val = obj(assemble(ell, R @ G))
            if val < best_val:
                G, best_val = R @ G, val
                theta = min(1.0, theta * 1.2)
            else:
                theta = max(1e-3, theta * 0.9)
        trace.append((obj.calls, best_val))

    T = _unit_det(assemble(ell, G))
    before = obj.estimate(identity)
    after = obj.estimate(T)
    if after.value > before.value:
        T, after = identity, before
    return PositionSearchResult(T, before, after, trace, seed, obj.calls)


# -- plane from a good cube vertex -------------------------------------------------

def _check_pair_diagonal(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim == 1:
        r = D
    else:
        if not np.allclose(D, np.diag(np.diag(D)), atol=1e-12):
            raise InputError("D must be diagonal")
        diag = np.diag(D)
        if not np.allclose(diag[0::2], diag[1::2], rtol=1e-12, atol=0):
            raise InputError("D must have the pattern diag(r1, r1, ..., rn, rn)")
        r = diag[0::2]
    if not np.all(r > 0):
        raise InputError("D must be positive")
    if abs(np.prod(r) - 1.0) > 1e-9:
        raise InputError(f"D needs prod r_i = 1, got {np.prod(r)!r}")
    return r


@dataclass
class PlaneChoice:
    plane: HolomorphicPlane
    radius: float
    source: str
    sstar: WidthEstimate
    qualified: bool        # a cube vertex met both Markov thresholds
    vertex_radius: float   # radius of the plane built from that vertex

    def to_dict(self) -> dict:
        return {
            "plane": self.plane.to_dict(),
            "radius": self.radius,
            "source": self.source,
            "sstar_DK": self.sstar.to_dict(),
            "qualified": self.qualified,
            "vertex_radius": self.vertex_radius,
        }


def proposition_search(K: ConvexBody, D, trials: int = DEFAULT_TRIALS, seed: int = 0,
                       grid_m: int = DEFAULT_GRID) -> PlaneChoice:
    """Plane for K built from a good cube vertex of D K.

    A vertex v of {+-1/sqrt(2n)}^{2n} with h_{DK}(v), h_{DK}(Jv) <= 3 s*(DK)
    gives v' = Dv / |Dv|; since |Dv| >= 1 (AM-GM on the r_i^2), the
    projection of K onto span{v', Jv'} lies in a disc of radius
    sqrt(2) * 3 s*(DK). The deterministic candidate planes of K compete with
    the vertex planes and the smallest certified radius on K wins.
    """
    r = _check_pair_diagonal(D)
    dvec = np.repeat(r, 2)
    DK = LinearImage(np.diag(dvec), K)
    s = sstar_auto(DK, seed=seed)
    d = K.dim
    V = np.vstack([np.ones((1, d)) / math.sqrt(d), cube_vertex_points(d, max(trials, 1), [seed, 2])])
    hv = DK.support_many(V)
    hjv = DK.support_many(apply_j(V))
    worst = np.maximum(hv, hjv)
    qualified = bool((worst <= 3.0 * s.value).any())
    order = np.argsort(worst, kind="stable")[:MAX_PROP_CANDIDATES]

    cands = []
    for rank, k in enumerate(order):
        cands.append((f"vertex{int(k)}", dvec * V[k]))
    # deterministic planes of D K, mapped by v -> Dv, then those of K itself
    cands += [(f"D:{label}", dvec * w) for label, w in candidate_directions(DK)]
    cands += candidate_directions(K)
    best = None
    vertex_radius = math.inf
    for label, w in cands:
        E = holomorphic_plane_from(w)
        R, _ = planar_radius(K, E.basis, grid_m)
        if label == f"vertex{int(order[0])}":
            vertex_radius = R
        if best is None or R < best[1]:
            best = (E, R, label)
    E, R, label = best
    return PlaneChoice(E, R, label, s, qualified, vertex_radius)


def proposition_plane(K: ConvexBody, D, trials: int = DEFAULT_TRIALS, seed: int = 0,
                      grid_m: int = DEFAULT_GRID) -> HolomorphicPlane:
    return proposition_search(K, D, trials, seed, grid_m).plane


# -- pipeline --------------------------------------------------------------------

@dataclass
class PipelineReport:
    body_id: str
    dim: int
    stages: list = field(default_factory=list)
    symmetrized: bool = False
    rogers_shephard_factor: float = 1.0
    position: PositionSearchResult | None = None
    T: np.ndarray | None = None
    wds: WdsDecomposition | None = None
    sstar_DK: WidthEstimate | None = None
    plane: HolomorphicPlane | None = None
    bound: CapacityBound | None = None
    candidates: dict = field(default_factory=dict)
    volume: VolumeResult | None = None
    gamma: float | None = None
    overlays: dict = field(default_factory=dict)
    error: str | None = None
    wall_time: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.error is None and self.gamma is not None

    def to_dict(self) -> dict:
        return {
            "body_id": self.body_id,
            "dim": self.dim,
            "stages": list(self.stages),
            "symmetrized": self.symmetrized,
            "rogers_shephard_factor": self.rogers_shephard_factor,
            "position": None if self.position is None else self.position.to_dict(),
            "T": None if self.T is None else self.T.tolist(),
            "wds": None if self.wds is None else self.wds.to_dict(),
            "sstar_DK": None if self.sstar_DK is None else self.sstar_DK.to_dict(),
            "plane": None if self.plane is None else self.plane.to_dict(),
            "bound": None if self.bound is None else self.bound.to_dict(),
            "candidates": dict(self.candidates),
            "volume": None if self.volume is None else self.volume.to_dict(),
            "gamma": self.gamma,
            "overlays": dict(self.overlays),
            "error": self.error,
            "wall_time": dict(self.wall_time),
        }


def _positioned_bound(K: ConvexBody, S: np.ndarray, choice: PlaneChoice, grid_m: int,
                      label: str) -> CapacityBound:
    body = LinearImage(S, K)
    b = cylinder_bound(body, choice.plane, grid_m, choice.source)
    cert = dict(b.certificate)
    cert.update({"position": S, "position_kind": label})
    return CapacityBound(b.kind, b.value, cert, K.body_id)


def main_pipeline(K: ConvexBody, budget: int = DEFAULT_POSITION_BUDGET, trials: int = DEFAULT_TRIALS,
                  seed: int = 0, grid_m: int = DEFAULT_GRID,
                  samples: int = DEFAULT_POSITION_SAMPLES,
                  volume_budget: int = 200_000, polish: int = 2000) -> PipelineReport:
    """Position search, WDS split, plane choice, certified bound, gamma.

    Three symplectic positions compete and the smallest certified bound is
    reported: the searched position S (from T = W D S) with the plane from
    the cube-vertex search on D S K, the identity with D = I, and for
    ellipsoids the Williamson normal form with its smallest coordinate plane.
    Each is a valid certificate for c^Z_lin(K) on its own. The winners are
    then polished as symplectic pairs (a, b) = (S^T v, S^T Jv) and the
    polished pair is re-certified through a symplectic completion.
    """
    original = K
    report = PipelineReport(body_id=K.body_id, dim=K.dim)
    n = K.dim // 2
    report.overlays = {"two_n_baseline": float(2 * n),
                       "log_sq_curve": math.log(n) ** 2 if n > 1 else 0.0}
    clock = time.perf_counter()

    def mark(stage):
        nonlocal clock
        now = time.perf_counter()
        report.wall_time[stage] = now - clock
        clock = now
        report.stages.append(stage)

    try:
        if not K.symmetric:
            K = difference_body(K)
            report.symmetrized = True
            report.rogers_shephard_factor = ROGERS_SHEPHARD_FACTOR
            mark("symmetrize")

        pos = optimize_position(K, budget, seed, samples)
        report.position, report.T = pos, pos.T
        mark("position")

        wds = wds_decompose(pos.T)
        report.wds = wds
        mark("wds")

        positioned = LinearImage(wds.S, K)
        choice = proposition_search(positioned, wds.D, trials, seed, grid_m)
        report.sstar_DK = choice.sstar
        bounds = {"optimized": _positioned_bound(K, wds.S, choice, grid_m, "optimized")}
        report.candidates["optimized"] = choice.to_dict()

        ident = proposition_search(K, np.ones(n), trials, seed, grid_m)
        bounds["identity"] = _positioned_bound(K, np.eye(K.dim), ident, grid_m, "identity")
        report.candidates["identity"] = ident.to_dict()

        M = K.ellipsoid_matrix()
        if M is not None:
            spec = symplectic_spectrum(M)
            e0 = holomorphic_plane_from(np.eye(K.dim)[0])
            R, _ = planar_radius(LinearImage(spec.S, K), e0.basis, grid_m)
            wchoice = PlaneChoice(e0, R, "E0", choice.sstar, True, R)
            bounds["williamson"] = _positioned_bound(K, spec.S, wchoice, grid_m, "williamson")
            report.candidates["williamson"] = {"radius": R, "radii": spec.radii.tolist()}
        mark("plane")

        if polish > 0:
            polished = []
            for key, b in sorted(bounds.items(), key=lambda kv: kv[1].value):
                S = np.asarray(b.certificate["position"])
                p = b.certificate["plane"]
                a0, b0 = S.T @ np.asarray(p["v"]), S.T @ np.asarray(p["jv"])
                polished.append(polish_pair(K, a0, b0, maxfev=polish))
            a1, b1, _ = min(polished, key=lambda t: t[2])
            Sp = symplectic_completion(a1, b1)
            e0 = holomorphic_plane_from(np.eye(K.dim)[0])
            R, _ = planar_radius(LinearImage(Sp, K), e0.basis, grid_m)
            pchoice = PlaneChoice(e0, R, "polished", choice.sstar, choice.qualified, R)
            bounds["polished"] = _positioned_bound(K, Sp, pchoice, grid_m, "polished")
            mark("polish")

        label = min(bounds, key=lambda k: bounds[k].value)
        report.bound = bounds[label]
        p = report.bound.certificate["plane"]
        report.plane = HolomorphicPlane(np.asarray(p["v"]), np.asarray(p["jv"]))
        mark("bound")

        report.volume = volume(original, volume_budget, seed)
        report.gamma = gamma_ratio(original, report.bound, report.volume)
        mark("gamma")
    except SymcapError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        log.warning("pipeline stopped after %s: %s", report.stages, exc)
    return report
