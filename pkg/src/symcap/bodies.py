"""Convex bodies in R^{2n} given by support-function oracles.

Every body exposes a vectorised support function ``support_many`` and gauge
``gauge_many`` acting on the rows of a 2-d array, plus optional exact hooks
(volume, inscribed radius, planar projection radius, vertex list) that the
capacity code uses whenever they are available.

Linear images are lazy: ``LinearImage(T, K)`` evaluates ``h_K(T^T u)`` and
never materialises T K, so repeated symplectic and diagonal transforms stay
exact.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from math import comb, lgamma

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from symcap.config import CHUNK, ZONOTOPE_SUBSET_CAP
from symcap.errors import InputError, NumericalError

HULL_MAX_DIM = 10
VERTEX_ENUM_MAX_DIM = 20


def ball_volume(dim: int) -> float:
    """Volume of the Euclidean unit ball, kappa_dim."""
    return math.exp(0.5 * dim * math.log(math.pi) - lgamma(0.5 * dim + 1.0))


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _as_matrix(data, dim=None, name="matrix") -> np.ndarray:
    """Accept a nested list of rows or a flat row-major list."""
    a = np.asarray(data, dtype=float)
    if a.ndim == 1:
        side = math.isqrt(a.size)
        if side * side != a.size:
            raise InputError(f"{name}: flat data of length {a.size} is not square")
        a = a.reshape(side, side)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"{name}: expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise InputError(f"{name}: expected {dim}x{dim}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name}: non-finite entries")
    return a


def _check_dim(dim) -> int:
    if int(dim) != dim or dim < 2 or dim % 2:
        raise InputError(f"dimension must be an even integer >= 2, got {dim}")
    return int(dim)


def _rows(K: "ConvexBody", U, name="u") -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if U.ndim != 2 or U.shape[1] != K.dim:
        raise InputError(f"{name}: expected length {K.dim}, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise InputError(f"{name}: non-finite entries")
    return U


def _conjugate(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _lp_norm(X: np.ndarray, p: float) -> np.ndarray:
    A = np.abs(X)
    if math.isinf(p):
        return A.max(axis=1)
    if p == 1.0:
        return A.sum(axis=1)
    if p == 2.0:
        return np.sqrt((A * A).sum(axis=1))
    # scale by the max entry to avoid overflow for large p
    m = A.max(axis=1)
    safe = np.where(m > 0, m, 1.0)
    return m * ((A / safe[:, None]) ** p).sum(axis=1) ** (1.0 / p)


def zonogon_max_norm(G: np.ndarray) -> float:
    """Largest Euclidean norm over the planar zonotope sum_i [-g_i, g_i].

    The maximum of a convex function sits at a vertex; vertices of a zonogon
    are sign patterns that stay constant between consecutive critical angles
    (directions orthogonal to some generator).
    """
    G = np.asarray(G, dtype=float)
    G = G[np.linalg.norm(G, axis=1) > 0]
    if len(G) == 0:
        return 0.0
    crit = np.arctan2(G[:, 1], G[:, 0]) + 0.5 * np.pi
    crit = np.sort(np.mod(np.concatenate([crit, crit + np.pi]), 2 * np.pi))
    mids = 0.5 * (crit + np.roll(crit, -1))
    mids[-1] += np.pi  # wrap-around arc
    dirs = np.stack([np.cos(mids), np.sin(mids)], axis=1)
    signs = np.sign(dirs @ G.T)
    verts = signs @ G
    return float(np.sqrt((verts * verts).sum(axis=1)).max())


@dataclass(frozen=True)
class VolumeResult:
    value: float
    exactness: str  # "exact" | "monte_carlo"
    stderr: float
    samples: int
    seed: int | None
    fallback: bool = False
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "exactness": self.exactness,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "fallback": self.fallback,
            "method": self.method,
        }


class ConvexBody:
    """Base oracle. Subclasses fill in ``support_many`` and ``gauge_many``."""

    kind = "abstract"
    dim: int
    symmetric: bool

    # oracle surface -------------------------------------------------------
    def support_many(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gauge_many(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # optional exact hooks ---------------------------------------------------
    def exact_volume(self) -> float | None:
        return None

    def max_planar_norm(self, Q: np.ndarray) -> float | None:
        """max over x in K of |Q^T x|_2 for a dim x 2 matrix Q, if exact."""
        return None

    def inscribed_radius(self) -> tuple[float, str] | None:
        """Radius of an origin-centred ball inside K and its quality.

        Quality is "exact" (largest such ball) or "certified" (a valid but
        possibly smaller ball).
        """
        return None

    def ellipsoid_matrix(self) -> np.ndarray | None:
        """M with K = {x : <Mx, x> <= 1} when K is an ellipsoid."""
        return None

    def vertices(self) -> np.ndarray | None:
        return None

    # serialisation ------------------------------------------------------------
    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, **self.params()}

    @property
    def body_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return f"{self.kind}-{self.dim}-" + hashlib.sha256(blob.encode()).hexdigest()[:10]

    def __eq__(self, other):
        return isinstance(other, ConvexBody) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.body_id)

    def __repr__(self):
        return f"<{type(self).__name__} dim={self.dim} id={self.body_id}>"


class Ball(ConvexBody):
    kind = "ball"

    def __init__(self, dim: int, r: float = 1.0):
        self.dim = _check_dim(dim)
        if not r > 0:
            raise InputError("ball radius must be positive")
        self.r = float(r)
        self.symmetric = True

    def support_many(self, U):
        return self.r * np.linalg.norm(U, axis=1)

    def gauge_many(self, X):
        return np.linalg.norm(X, axis=1) / self.r

    def exact_volume(self):
        return ball_volume(self.dim) * self.r**self.dim

    def max_planar_norm(self, Q):
        return self.r * float(np.linalg.norm(Q, 2))

    def inscribed_radius(self):
        return self.r, "exact"

    def ellipsoid_matrix(self):
        return np.eye(self.dim) / self.r**2

    def params(self):
        return {"r": self.r}


class Cube(ConvexBody):
    """Box prod [-a_i, a_i]; a scalar ``a`` gives the cube [-a, a]^dim."""

    kind = "cube"

    def __init__(self, dim: int, a=1.0):
        self.dim = _check_dim(dim)
        a = np.broadcast_to(np.asarray(a, dtype=float), (self.dim,))
        if not np.all(a > 0):
            raise InputError("cube half-widths must be positive")
        self.a = _readonly(a)
        self.symmetric = True

    def support_many(self, U):
        return np.abs(U) @ self.a

    def gauge_many(self, X):
        return (np.abs(X) / self.a).max(axis=1)

    def exact_volume(self):
        return float(np.prod(2 * self.a))

    def max_planar_norm(self, Q):
        return zonogon_max_norm(self.a[:, None] * Q)

    def inscribed_radius(self):
        return float(self.a.min()), "exact"

    def vertices(self):
        if self.dim > VERTEX_ENUM_MAX_DIM:
            return None
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim)))
        return signs * self.a

    def params(self):
        a = self.a
        return {"a": float(a[0]) if np.all(a == a[0]) else a.tolist()}


class CrossPolytope(ConvexBody):
    """Unit ball of the l1 norm, conv{+-e_i}."""

    kind = "cross_polytope"

    def __init__(self, dim: int):
        self.dim = _check_dim(dim)
        self.symmetric = True

    def support_many(self, U):
        return np.abs(U).max(axis=1)

    def gauge_many(self, X):
        return np.abs(X).sum(axis=1)

    def exact_volume(self):
        return math.exp(self.dim * math.log(2.0) - lgamma(self.dim + 1.0))

    def max_planar_norm(self, Q):
        return float(np.linalg.norm(Q, axis=1).max())

    def inscribed_radius(self):
        return 1.0 / math.sqrt(self.dim), "exact"

    def vertices(self):
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye])


class LpBall(ConvexBody):
    kind = "lp_ball"

    def __init__(self, dim: int, p: float):
        self.dim = _check_dim(dim)
        p = float(p)
        if not p >= 1.0:
            raise InputError(f"lp_ball needs p >= 1, got {p}")
        self.p = p
        self.q = _conjugate(p)
        self.symmetric = True

    def support_many(self, U):
        return _lp_norm(U, self.q)

    def gauge_many(self, X):
        return _lp_norm(X, self.p)

    def exact_volume(self):
        d, p = self.dim, self.p
        if math.isinf(p):
            return 2.0**d
        return math.exp(d * (math.log(2.0) + lgamma(1.0 / p + 1.0)) - lgamma(d / p + 1.0))

    def max_planar_norm(self, Q):
        if self.p == 1.0:
            return CrossPolytope(self.dim).max_planar_norm(Q)
        if math.isinf(self.p):
            return Cube(self.dim).max_planar_norm(Q)
        if self.p == 2.0:
            return Ball(self.dim).max_planar_norm(Q)
        return None

    def inscribed_radius(self):
        if self.p <= 2.0:
            return self.dim ** (0.5 - 1.0 / self.p), "exact"
        return 1.0, "exact"

    def vertices(self):
        if self.p == 1.0:
            return CrossPolytope(self.dim).vertices()
        if math.isinf(self.p):
            return Cube(self.dim).vertices()
        return None

    def params(self):
        return {"p": "inf" if math.isinf(self.p) else self.p}


class Ellipsoid(ConvexBody):
    """{x : <Mx, x> <= 1} for symmetric positive-definite M."""

    kind = "ellipsoid"

    def __init__(self, M):
        M = _as_matrix(M, name="ellipsoid M")
        self.dim = _check_dim(M.shape[0])
        if np.abs(M - M.T).max() > 1e-10 * max(1.0, np.abs(M).max()):
            raise InputError("ellipsoid M must be symmetric")
        M = 0.5 * (M + M.T)
        w = np.linalg.eigvalsh(M)
        if w[0] <= 0:
            raise InputError("ellipsoid M must be positive definite")
        self.M = _readonly(M)
        self._Minv = np.linalg.inv(M)
        self._Minv = 0.5 * (self._Minv + self._Minv.T)
        self._eig = w
        self.symmetric = True

    def support_many(self, U):
        return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", U, self._Minv, U), 0.0))

    def gauge_many(self, X):
        return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, self.M, X), 0.0))

    def exact_volume(self):
        return ball_volume(self.dim) / math.sqrt(float(np.prod(self._eig)))

    def max_planar_norm(self, Q):
        return math.sqrt(float(np.linalg.eigvalsh(Q.T @ self._Minv @ Q)[-1]))

    def inscribed_radius(self):
        return 1.0 / math.sqrt(self._eig[-1]), "exact"

    def ellipsoid_matrix(self):
        return np.array(self.M)

    def params(self):
        return {"M": self.M.tolist()}


class Zonotope(ConvexBody):
    """Minkowski sum of segments [-s_i, s_i]."""

    kind = "zonotope"

    def __init__(self, segments):
        S = np.atleast_2d(np.asarray(segments, dtype=float))
        self.dim = _check_dim(S.shape[1])
        if not np.all(np.isfinite(S)):
            raise InputError("zonotope segments must be finite")
        if np.linalg.matrix_rank(S) < self.dim:
            raise InputError("zonotope segments do not span the space (empty interior)")
        self.S = _readonly(S)
        self.symmetric = True

    def support_many(self, U):
        return np.abs(U @ self.S.T).sum(axis=1)

    def gauge_many(self, X):
        m, d = self.S.shape
        # variables (lambda_1..lambda_m, t); minimise t, |lambda_i| <= t, S^T lambda = x
        c = np.zeros(m + 1)
        c[-1] = 1.0
        A_ub = np.block([[np.eye(m), -np.ones((m, 1))], [-np.eye(m), -np.ones((m, 1))]])
        b_ub = np.zeros(2 * m)
        A_eq = np.hstack([self.S.T, np.zeros((d, 1))])
        out = np.empty(len(X))
        for k, x in enumerate(X):
            res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=x,
                          bounds=[(None, None)] * m + [(0, None)], method="highs")
            if res.status != 0:
                raise NumericalError("zonotope gauge LP failed", status=res.status, message=res.message)
            out[k] = res.fun
        return out

    def exact_volume(self):
        m, d = self.S.shape
        if comb(m, d) > ZONOTOPE_SUBSET_CAP:
            return None
        idx = np.array(list(itertools.combinations(range(m), d)))
        total = 0.0
        for start in range(0, len(idx), CHUNK):
            blocks = self.S[idx[start:start + CHUNK]]
            total += np.abs(np.linalg.det(blocks)).sum()
        return float(2.0**d * total)

    def max_planar_norm(self, Q):
        return zonogon_max_norm(self.S @ Q)

    def inscribed_radius(self):
        # S^T B^m lies inside the zonotope since |lambda|_inf <= |lambda|_2
        return float(np.linalg.svd(self.S, compute_uv=False)[-1]), "certified"

    def params(self):
        return {"segments": self.S.tolist()}


class VertexPolytope(ConvexBody):
    kind = "vertex_polytope"

    def __init__(self, vertices):
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        self.dim = _check_dim(V.shape[1])
        if not np.all(np.isfinite(V)):
            raise InputError("vertices must be finite")
        if np.linalg.matrix_rank(V - V.mean(axis=0)) < self.dim:
            raise InputError("vertices are affinely degenerate (empty interior)")
        self.V = _readonly(V)
        self.symmetric = self._is_symmetric(V)

    @staticmethod
    def _is_symmetric(V) -> bool:
        key = lambda a: tuple(np.round(a, 12) + 0.0)
        pts = {key(v) for v in V}
        return all(key(-v) in pts for v in V)

    def support_many(self, U):
        return (U @ self.V.T).max(axis=1)

    def gauge_many(self, X):
        k, d = self.V.shape
        out = np.empty(len(X))
        for i, x in enumerate(X):
            res = linprog(np.ones(k), A_eq=self.V.T, b_eq=x, bounds=[(0, None)] * k, method="highs")
            if res.status == 2:
                out[i] = math.inf  # x outside the cone over K: origin not interior
            elif res.status != 0:
                raise NumericalError("polytope gauge LP failed", status=res.status, message=res.message)
            else:
                out[i] = res.fun
        return out

    def _hull(self):
        if self.dim > HULL_MAX_DIM:
            return None
        return ConvexHull(self.V)

    def exact_volume(self):
        hull = self._hull()
        return None if hull is None else float(hull.volume)

    def max_planar_norm(self, Q):
        P = self.V @ Q
        return float(np.sqrt((P * P).sum(axis=1)).max())

    def inscribed_radius(self):
        hull = self._hull()
        if hull is None:
            return None
        # qhull equations: normal . x + offset <= 0 inside, unit normals
        r = float((-hull.equations[:, -1]).min())
        return (r, "exact") if r > 0 else None

    def vertices(self):
        return np.array(self.V)

    def params(self):
        return {"vertices": self.V.tolist()}


class SchattenBall(ConvexBody):
    """Unit ball of the Schatten p-norm on m x m matrices, flattened row-major."""

    kind = "schatten_ball"

    def __init__(self, p: float, m: int):
        if int(m) != m or m < 1:
            raise InputError("schatten_ball needs a positive integer m")
        self.m = int(m)
        self.dim = _check_dim(self.m * self.m)
        p = float(p)
        if not p >= 1.0:
            raise InputError(f"schatten_ball needs p >= 1, got {p}")
        self.p = p
        self.q = _conjugate(p)
        self.symmetric = True

    def _singular(self, X):
        return np.linalg.svd(X.reshape(-1, self.m, self.m), compute_uv=False)

    def support_many(self, U):
        if self.p == 2.0:  # Frobenius ball, no SVD needed
            return np.linalg.norm(U, axis=1)
        return _lp_norm(self._singular(U), self.q)

    def gauge_many(self, X):
        if self.p == 2.0:
            return np.linalg.norm(X, axis=1)
        return _lp_norm(self._singular(X), self.p)

    def exact_volume(self):
        return ball_volume(self.dim) if self.p == 2.0 else None

    def ellipsoid_matrix(self):
        return np.eye(self.dim) if self.p == 2.0 else None

    def max_planar_norm(self, Q):
        return Ball(self.dim).max_planar_norm(Q) if self.p == 2.0 else None

    def inscribed_radius(self):
        if self.p <= 2.0:
            return self.m ** (0.5 - 1.0 / self.p), "exact"
        return 1.0, "exact"

    def params(self):
        return {"p": "inf" if math.isinf(self.p) else self.p, "m": self.m}


class LinearImage(ConvexBody):
    """T K, evaluated lazily through h_{TK}(u) = h_K(T^T u)."""

    kind = "linear_image"

    def __init__(self, T, inner: ConvexBody):
        T = _as_matrix(T, dim=inner.dim, name="linear_image T")
        det = np.linalg.det(T)
        if not abs(det) > 1e-12:
            raise InputError("linear_image T must be invertible")
        self.T = _readonly(T)
        self._Tinv = np.linalg.inv(T)
        self._det = float(det)
        self.inner = inner
        self.dim = inner.dim
        self.symmetric = inner.symmetric

    def support_many(self, U):
        return self.inner.support_many(U @ self.T)

    def gauge_many(self, X):
        return self.inner.gauge_many(X @ self._Tinv.T)

    def exact_volume(self):
        v = self.inner.exact_volume()
        return None if v is None else abs(self._det) * v

    def max_planar_norm(self, Q):
        return self.inner.max_planar_norm(self.T.T @ Q)

    def ellipsoid_matrix(self):
        M = self.inner.ellipsoid_matrix()
        if M is None:
            return None
        A = self._Tinv.T @ M @ self._Tinv
        return 0.5 * (A + A.T)

    def inscribed_radius(self):
        M = self.ellipsoid_matrix()
        if M is not None:
            return 1.0 / math.sqrt(float(np.linalg.eigvalsh(M)[-1])), "exact"
        V = self.vertices()
        if V is not None and self.dim <= HULL_MAX_DIM:
            return VertexPolytope(V).inscribed_radius()
        got = self.inner.inscribed_radius()
        if got is None:
            return None
        return got[0] * float(np.linalg.svd(self.T, compute_uv=False)[-1]), "certified"

    def vertices(self):
        V = self.inner.vertices()
        return None if V is None else V @ self.T.T

    def params(self):
        return {"T": self.T.tolist(), "inner": self.inner.to_dict()}


class DifferenceBody(ConvexBody):
    """K - K, with h(u) = h_K(u) + h_K(-u)."""

    kind = "difference_body"

    def __init__(self, inner: ConvexBody):
        self.inner = inner
        self.dim = inner.dim
        self.symmetric = True
        self._poly = None
        if not inner.symmetric:
            V = inner.vertices()
            if V is not None:
                diffs = (V[:, None, :] - V[None, :, :]).reshape(-1, self.dim)
                diffs = diffs[np.linalg.norm(diffs, axis=1) > 0]
                if self.dim <= HULL_MAX_DIM:
                    diffs = diffs[ConvexHull(diffs).vertices]
                self._poly = VertexPolytope(diffs)

    def support_many(self, U):
        return self.inner.support_many(U) + self.inner.support_many(-U)

    def gauge_many(self, X):
        if self.inner.symmetric:
            return 0.5 * self.inner.gauge_many(X)
        if self._poly is not None:
            return self._poly.gauge_many(X)
        raise NotImplementedError("gauge of K - K needs a symmetric or vertex-described K")

    def exact_volume(self):
        if self.inner.symmetric:
            v = self.inner.exact_volume()
            return None if v is None else 2.0**self.dim * v
        return None if self._poly is None else self._poly.exact_volume()

    def max_planar_norm(self, Q):
        if self.inner.symmetric:
            r = self.inner.max_planar_norm(Q)
            return None if r is None else 2.0 * r
        return None if self._poly is None else self._poly.max_planar_norm(Q)

    def inscribed_radius(self):
        if self.inner.symmetric:
            got = self.inner.inscribed_radius()
            return None if got is None else (2.0 * got[0], got[1])
        return None if self._poly is None else self._poly.inscribed_radius()

    def ellipsoid_matrix(self):
        M = self.inner.ellipsoid_matrix() if self.inner.symmetric else None
        return None if M is None else M / 4.0

    def vertices(self):
        if self._poly is not None:
            return self._poly.vertices()
        V = self.inner.vertices() if self.inner.symmetric else None
        return None if V is None else 2.0 * V

    def params(self):
        return {"inner": self.inner.to_dict()}


# -- public oracle functions ---------------------------------------------------

def support(K: ConvexBody, u) -> float:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise InputError("support expects a single vector")
    return float(K.support_many(_rows(K, u))[0])


def gauge(K: ConvexBody, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("gauge expects a single vector")
    return float(K.gauge_many(_rows(K, x, "x"))[0])


def support_many(K: ConvexBody, U) -> np.ndarray:
    return K.support_many(_rows(K, U))


def gauge_many(K: ConvexBody, X) -> np.ndarray:
    return K.gauge_many(_rows(K, X, "x"))


def linear_image(T, K: ConvexBody) -> LinearImage:
    return LinearImage(T, K)


def scaled(K: ConvexBody, lam: float) -> LinearImage:
    if not lam > 0:
        raise InputError("scale factor must be positive")
    return LinearImage(lam * np.eye(K.dim), K)


def difference_body(K: ConvexBody) -> DifferenceBody:
    return DifferenceBody(K)


def bounding_box(K: ConvexBody) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate box [lo, hi] containing K, from 2 * dim support calls."""
    eye = np.eye(K.dim)
    hi = K.support_many(eye)
    lo = -K.support_many(-eye)
    return lo, hi


def _zonotope_mc_volume(Z: Zonotope, budget: int, seed: int) -> VolumeResult:
    m, d = Z.S.shape
    rng = np.random.default_rng(seed)
    dets = np.empty(budget)
    for start in range(0, budget, CHUNK):
        k = min(CHUNK, budget - start)
        idx = np.argsort(rng.random((k, m)), axis=1)[:, :d]
        dets[start:start + k] = np.abs(np.linalg.det(Z.S[idx]))
    scale = 2.0**d * comb(m, d)
    return VolumeResult(
        value=float(scale * dets.mean()),
        exactness="monte_carlo",
        stderr=float(scale * dets.std(ddof=1) / math.sqrt(budget)),
        samples=budget,
        seed=seed,
        fallback=True,
        method="random_subsets",
    )


def _box_mc_volume(K: ConvexBody, budget: int, seed: int) -> VolumeResult:
    lo, hi = bounding_box(K)
    box = float(np.prod(hi - lo))
    children = np.random.SeedSequence(seed).spawn((budget + CHUNK - 1) // CHUNK)
    hits = 0
    for c, ss in enumerate(children):
        k = min(CHUNK, budget - c * CHUNK)
        X = lo + (hi - lo) * np.random.default_rng(ss).random((k, K.dim))
        hits += int((K.gauge_many(X) <= 1.0).sum())
    frac = hits / budget
    return VolumeResult(
        value=box * frac,
        exactness="monte_carlo",
        stderr=box * math.sqrt(frac * (1.0 - frac) / budget),
        samples=budget,
        seed=seed,
        method="box_rejection",
    )


def volume(K: ConvexBody, budget: int = 0, seed: int = 0) -> VolumeResult:
    """Exact volume when a closed form exists, else seeded Monte Carlo."""
    v = K.exact_volume()
    if v is not None:
        return VolumeResult(v, "exact", 0.0, 0, None, method="closed_form")
    if budget <= 0:
        raise InputError(f"{K.kind}: no exact volume; a positive Monte-Carlo budget is required")
    if isinstance(K, Zonotope):
        return _zonotope_mc_volume(K, budget, seed)
    if isinstance(K, LinearImage):
        inner = volume(K.inner, budget, seed)
        f = abs(K._det)
        return VolumeResult(f * inner.value, inner.exactness, f * inner.stderr,
                            inner.samples, inner.seed, inner.fallback, inner.method)
    return _box_mc_volume(K, budget, seed)


# -- JSON ----------------------------------------------------------------------

def _parse_p(p) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity"):
            return math.inf
        return float(p)
    return float(p)


def body_from_dict(d: dict) -> ConvexBody:
    try:
        kind = d["kind"]
    except (KeyError, TypeError):
        raise InputError("body description needs a 'kind'") from None
    dim = d.get("dim")
    if kind == "ball":
        K = Ball(dim, d.get("r", 1.0))
    elif kind == "cube":
        K = Cube(dim, d.get("a", 1.0))
    elif kind == "cross_polytope":
        K = CrossPolytope(dim)
    elif kind == "lp_ball":
        K = LpBall(dim, _parse_p(d["p"]))
    elif kind == "ellipsoid":
        K = Ellipsoid(_as_matrix(d["M"], dim, "ellipsoid M"))
    elif kind == "zonotope":
        K = Zonotope(d["segments"])
    elif kind == "vertex_polytope":
        K = VertexPolytope(d["vertices"])
    elif kind == "schatten_ball":
        K = SchattenBall(_parse_p(d["p"]), d["m"])
    elif kind == "linear_image":
        inner = body_from_dict(d["inner"])
        K = LinearImage(_as_matrix(d["T"], inner.dim, "linear_image T"), inner)
    elif kind == "difference_body":
        K = DifferenceBody(body_from_dict(d["inner"]))
    else:
        raise InputError(f"unknown body kind {kind!r}")
    if dim is not None and K.dim != dim:
        raise InputError(f"{kind}: declared dim {dim} but parameters give {K.dim}")
    return K


def body_from_json(text: str) -> ConvexBody:
    return body_from_dict(json.loads(text))


def body_to_json(K: ConvexBody) -> str:
    return json.dumps(K.to_dict(), sort_keys=True)
