"""Capacity bounds with certificates.

Upper bounds come from holomorphic planes E = span{v, Jv}: if the orthogonal
projection of K onto E sits in a disc of radius R, then K lies in the
cylinder (disc) x E^perp, a unitary image of Z^{2n}(R), so
c^Z_lin(K) <= pi R^2. Lower bounds come from inscribed balls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from symcap.bodies import (
    ConvexBody,
    CrossPolytope,
    LinearImage,
    LpBall,
    VertexPolytope,
    VolumeResult,
    ball_volume,
)
from symcap.config import DEFAULT_GRID, DEFAULT_WIDTH_SAMPLES, TOL
from symcap.errors import InputError, NumericalError
from symcap.symplect import (
    HolomorphicPlane,
    apply_j,
    holomorphic_plane_from,
    omega,
    symplectic_spectrum,
)
from symcap.widths import cube_vertex_points, mean_width, sphere_points, sstar_auto

UPPER_KINDS = ("upper_cylinder", "exact_ellipsoid", "upper_lowner")
MIN_GRID = 8


@dataclass(frozen=True)
class CapacityBound:
    kind: str  # upper_cylinder | lower_ball | exact_ellipsoid | upper_lowner
    value: float
    certificate: dict = field(default_factory=dict)
    body_id: str = ""
    certified: bool = True

    @property
    def is_upper(self) -> bool:
        return self.kind in UPPER_KINDS

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "certified": self.certified,
            "body_id": self.body_id,
            "certificate": _jsonable(self.certificate),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return obj


# -- projection radius -----------------------------------------------------------

def _grid_directions(Q: np.ndarray, grid_m: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(grid_m) / grid_m
    return np.cos(theta)[:, None] * Q[:, 0] + np.sin(theta)[:, None] * Q[:, 1]


def planar_radius(K: ConvexBody, Q: np.ndarray, grid_m: int = DEFAULT_GRID) -> tuple[float, str]:
    """Certified bound on max_{x in K} |Q^T x| for a dim x 2 matrix Q.

    Uses the exact hook of the body when it has one. Otherwise every point p
    of the planar image lies within angle pi/m of one of the m grid normals
    u_k, so |p| cos(pi/m) <= <p, u_k> <= h(u_k) <= max_k h(u_k).
    """
    if grid_m < MIN_GRID:
        raise InputError(f"grid_m must be >= {MIN_GRID}, got {grid_m}")
    exact = K.max_planar_norm(Q)
    if exact is not None:
        return float(exact), "exact"
    h = K.support_many(_grid_directions(Q, grid_m))
    return float(h.max()) / math.cos(math.pi / grid_m), "grid"


def projection_circumradius(K: ConvexBody, E: HolomorphicPlane, grid_m: int = DEFAULT_GRID) -> float:
    return planar_radius(K, E.basis, grid_m)[0]


def cylinder_bound(K: ConvexBody, E: HolomorphicPlane, grid_m: int = DEFAULT_GRID,
                   source: str = "") -> CapacityBound:
    R, mode = planar_radius(K, E.basis, grid_m)
    cert = {"plane": E.to_dict(), "radius": R, "grid_m": grid_m, "mode": mode}
    if source:
        cert["source"] = source
    return CapacityBound("upper_cylinder", math.pi * R * R, cert, K.body_id)


def verify_certificate(K: ConvexBody, bound: CapacityBound) -> float:
    """Recompute an upper_cylinder value from its certificate alone.

    A certificate may carry a symplectic ``position`` S; the plane then refers
    to S K.
    """
    if bound.kind != "upper_cylinder":
        raise InputError("only upper_cylinder certificates are re-evaluated here")
    cert = bound.certificate
    body = K
    if "inclusion_scale" in cert:
        base = CrossPolytope(K.dim)
        plane = cert["plane"]
        E = HolomorphicPlane(np.asarray(plane["v"], float), np.asarray(plane["jv"], float))
        R, _ = planar_radius(base, E.basis, cert["grid_m"])
        return math.pi * (cert["inclusion_scale"] * R) ** 2
    if cert.get("position") is not None:
        body = LinearImage(np.asarray(cert["position"], dtype=float), K)
    plane = cert["plane"]
    E = HolomorphicPlane(np.asarray(plane["v"], float), np.asarray(plane["jv"], float))
    R, _ = planar_radius(body, E.basis, cert["grid_m"])
    return math.pi * R * R


# -- symplectic pairs ------------------------------------------------------------------

def pair_value(K: ConvexBody, a, b, grid_m: int = DEFAULT_GRID) -> float:
    """pi R^2 / omega(a, b), R the planar radius of K under x -> (<a,x>, <b,x>).

    Any pair with omega(a, b) > 0 is the first row pair of a symplectic map
    up to scaling, so this is a valid cylinder bound for c^Z_lin(K).
    """
    w = omega(a, b)
    if not w > 0:
        return math.inf
    R, _ = planar_radius(K, np.stack([a, b], axis=1), grid_m)
    return math.pi * R * R / w


def symplectic_completion(a, b) -> np.ndarray:
    """Symplectic S whose first two rows are a and b; needs omega(a, b) = 1.

    Symplectic Gram-Schmidt on the columns of S^T: the remaining pairs are
    built from coordinate vectors projected off the pairs already chosen.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if abs(omega(a, b) - 1.0) > 1e-9:
        raise InputError("symplectic completion needs omega(a, b) = 1")
    dim = len(a)
    pairs = [(a, b)]

    def project(x):
        for p, q in pairs:
            x = x - omega(x, q) * p + omega(x, p) * q
        return x

    pool = [project(e) for e in np.eye(dim)]
    while len(pairs) < dim // 2:
        pool = [project(x) for x in pool]
        pool = [x for x in pool if np.linalg.norm(x) > 1e-9]
        best = None
        for i in range(len(pool)):
            for j in range(i + 1, len(pool)):
                w = omega(pool[i], pool[j])
                if best is None or abs(w) > abs(best[2]):
                    best = (i, j, w)
        i, j, w = best
        p, q = pool[i], pool[j] / w
        s = math.sqrt(np.linalg.norm(q) / np.linalg.norm(p))
        pairs.append((p * s, q / s))
        pool = [x for k, x in enumerate(pool) if k not in (i, j)]
    return np.vstack([v for pq in pairs for v in pq])


def polish_pair(K: ConvexBody, a, b, grid_m: int = 90, maxfev: int = 2000) -> tuple[np.ndarray, np.ndarray, float]:
    """Nelder-Mead descent of pi R(a, b)^2 / omega(a, b) from a starting pair.

    The returned pair is rescaled to omega = 1. The value is measured on the
    (coarse) polishing grid; callers re-certify on their own grid.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = len(a)
    f = lambda z: pair_value(K, z[:d], z[d:], grid_m)
    z0 = np.concatenate([a, b])
    res = minimize(f, z0, method="Nelder-Mead",
                   options={"maxfev": maxfev, "xatol": 1e-9, "fatol": 1e-12, "adaptive": True})
    z = res.x if res.fun < f(z0) else z0
    a, b = z[:d], z[d:]
    w = omega(a, b)
    a, b = a / math.sqrt(w), b / math.sqrt(w)
    return a, b, pair_value(K, a, b, grid_m)


# -- deterministic and random planes -----------------------------------------------

def candidate_directions(K: ConvexBody) -> list[tuple[str, np.ndarray]]:
    """Planes tried before any random trial.

    Coordinate planes span{e_{2k-1}, e_{2k}}, the all-ones diagonal, and for
    diagonal images of a body the direction with entries 1/t_i (plus its
    pairwise geometric-mean variant).
    """
    d = K.dim
    out = []
    for k in range(d // 2):
        e = np.zeros(d)
        e[2 * k] = 1.0
        out.append((f"E{k}", e))
    out.append(("diagonal", np.ones(d) / math.sqrt(d)))
    if isinstance(K, LinearImage):
        T = K.T
        if np.allclose(T, np.diag(np.diag(T))):
            t = np.abs(np.diag(T))
            out.append(("harmonic", 1.0 / t))
            g = np.repeat(1.0 / np.sqrt(t[0::2] * t[1::2]), 2)
            out.append(("harmonic_pairs", g))
    return out


def _pick_best(bounds: list[CapacityBound]) -> CapacityBound:
    return min(bounds, key=lambda b: b.value)


def random_plane_search(K: ConvexBody, trials: int, sampler: str = "sphere", seed: int = 0,
                        grid_m: int = DEFAULT_GRID, width_samples: int = DEFAULT_WIDTH_SAMPLES,
                        width=None) -> tuple[CapacityBound, float]:
    """Best cylinder bound over deterministic candidates plus random planes.

    Also returns the fraction of random trials whose v and Jv both satisfy
    h_K <= 3 W, with W the mean width (sphere sampler) or the Rademacher
    average (cube_vertices sampler). Markov's inequality puts that fraction
    at >= 1/3 in expectation.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    if sampler == "sphere":
        W = width if width is not None else mean_width(K, width_samples, seed)
        V = sphere_points(K.dim, trials, [seed, 1])
    elif sampler == "cube_vertices":
        W = width if width is not None else sstar_auto(K, seed=seed)
        V = cube_vertex_points(K.dim, trials, [seed, 1])
    else:
        raise InputError(f"unknown sampler {sampler!r}")
    V = V[:trials]
    JV = apply_j(V)
    hv = K.support_many(V)
    hjv = K.support_many(JV)
    ok = (hv <= 3.0 * W.value) & (hjv <= 3.0 * W.value)

    bounds = [cylinder_bound(K, holomorphic_plane_from(v), grid_m, label)
              for label, v in candidate_directions(K)]
    # the trial plane only needs the smallest radius; track the index
    radii = np.array([planar_radius(K, np.stack([v, jv], axis=1), grid_m)[0] for v, jv in zip(V, JV)])
    k = int(np.argmin(radii))
    bounds.append(cylinder_bound(K, holomorphic_plane_from(V[k]), grid_m, f"trial{k}"))
    best = _pick_best(bounds)
    rate = float(ok.mean())
    cert = dict(best.certificate)
    cert.update({"sampler": sampler, "trials": trials, "seed": seed, "success_rate": rate,
                 "width": W.to_dict()})
    return CapacityBound(best.kind, best.value, cert, best.body_id), rate


# -- ellipsoids, inradius, Loewner baseline ------------------------------------------

def ellipsoid_capacity(M) -> CapacityBound:
    """pi r1^2 for {<Mx, x> <= 1}, r1 the smallest symplectic radius."""
    spec = symplectic_spectrum(M)
    r1 = float(spec.radii[0])
    return CapacityBound("exact_ellipsoid", math.pi * r1 * r1,
                         {"radii": spec.radii, "S": spec.S})


def _witness_direction(K: ConvexBody, seed: int = 0) -> np.ndarray:
    d = K.dim
    cands = [np.eye(d), np.ones((1, d)) / math.sqrt(d), sphere_points(d, 2000, [seed, 7])]
    M = K.ellipsoid_matrix()
    if M is not None:
        cands.append(np.linalg.eigh(M)[1][:, -1][None, :])
    U = np.vstack(cands)
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    return U[int(np.argmin(K.support_many(U)))]


def inradius_lower_bound(K: ConvexBody, seed: int = 0) -> CapacityBound:
    """pi r^2 for a ball r B inside K.

    Bodies without an inscribed-ball hook fall back to the smallest support
    value over sampled directions; that value is flagged non-certified.
    """
    witness = _witness_direction(K, seed)
    got = K.inscribed_radius()
    if got is None:
        U = sphere_points(K.dim, 20_000, [seed, 8])
        r, quality, certified = float(K.support_many(U).min()), "estimate", False
    else:
        (r, quality), certified = got, True
    cert = {"inradius": r, "quality": quality, "witness_direction": witness,
            "witness_support": float(K.support_many(witness[None, :])[0])}
    return CapacityBound("lower_ball", math.pi * r * r, cert, K.body_id, certified)


def mvee(points: np.ndarray, eps: float = 0.01, centered: bool | None = None,
         max_iter: int = TOL.mvee_max_iter) -> tuple[np.ndarray, np.ndarray, int]:
    """(1+eps)-approximate minimum-volume enclosing ellipsoid.

    Khachiyan's barycentric coordinate ascent. Returns (A, c, iterations)
    with every point satisfying (x - c)^T A (x - c) <= 1; A is rescaled at
    the end so the containment holds exactly, not only up to eps.
    """
    X = np.asarray(points, dtype=float)
    k, d = X.shape
    if centered is None:
        centered = VertexPolytope._is_symmetric(X)
    P = X if centered else np.hstack([X, np.ones((k, 1))])
    q = P.shape[1]
    u = np.full(k, 1.0 / k)
    for it in range(max_iter):
        Sigma = (P * u[:, None]).T @ P
        g = np.einsum("ij,ji->i", P, np.linalg.solve(Sigma, P.T))
        j = int(np.argmax(g))
        if g[j] <= q * (1.0 + eps):
            break
        step = (g[j] - q) / (q * (g[j] - 1.0))
        u *= 1.0 - step
        u[j] += step
    else:
        raise NumericalError("MVEE did not converge", duality_gap=float(g.max() / q - 1.0),
                             iterations=max_iter)
    if centered:
        c = np.zeros(d)
        A = np.linalg.inv((X * u[:, None]).T @ X) / d
    else:
        c = u @ X
        Y = X - c
        A = np.linalg.inv((Y * u[:, None]).T @ Y) / d
    Y = X - c
    A = A / np.einsum("ij,jk,ik->i", Y, A, Y).max()
    return 0.5 * (A + A.T), c, it


def lowner_baseline(K: ConvexBody, eps: float = 0.01) -> CapacityBound:
    """Capacity of an enclosing ellipsoid of the vertex set (monotonicity)."""
    if not 0 < eps < 0.5:
        raise InputError("eps must lie in (0, 0.5)")
    V = K.vertices()
    if V is None:
        raise InputError(f"{K.kind}: the Loewner baseline needs a vertex description")
    A, c, iters = mvee(V, eps)
    inner = ellipsoid_capacity(A)
    cert = dict(inner.certificate)
    cert.update({"shape": A, "center": c, "eps": eps, "iterations": iters})
    return CapacityBound("upper_lowner", inner.value, cert, K.body_id)


def gamma_ratio(K: ConvexBody, bound: CapacityBound, vol: VolumeResult) -> float:
    """Smallest gamma certified by ``bound``: (c/pi) / (Vol(K)/kappa_2n)^{1/n}."""
    if not bound.is_upper:
        raise InputError("gamma needs an upper bound")
    n = K.dim // 2
    return (bound.value / math.pi) / (vol.value / ball_volume(K.dim)) ** (1.0 / n)


def lp_composed_bound(dim: int, p: float) -> CapacityBound:
    """B_p inside (2n)^{1-1/p} B_1 for 1 <= p <= 2, so c <= (2n)^{2-2/p} pi/n."""
    if not 1.0 <= p <= 2.0:
        raise InputError("the composed l_p bound needs 1 <= p <= 2")
    scale = dim ** (1.0 - 1.0 / p)
    base = cylinder_bound(CrossPolytope(dim), holomorphic_plane_from(np.ones(dim)), source="diagonal")
    cert = dict(base.certificate)
    cert.update({"inclusion_scale": scale, "base_body": "cross_polytope"})
    return CapacityBound("upper_cylinder", scale * scale * base.value, cert, LpBall(dim, p).body_id)
