"""Symplectic linear algebra in interleaved coordinates (x1, y1, ..., xn, yn).

The complex structure is J(x1, y1, ...) = (-y1, x1, ...), the symplectic
form is omega(u, v) = <Ju, v>, and S is symplectic when S^T J S = J.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from symcap.config import TOL
from symcap.errors import ConditioningError, InputError, NumericalError


def complex_structure(n: int) -> np.ndarray:
    if n < 1:
        raise InputError("n must be >= 1")
    J = np.zeros((2 * n, 2 * n))
    for k in range(n):
        J[2 * k, 2 * k + 1] = -1.0
        J[2 * k + 1, 2 * k] = 1.0
    return J


def apply_j(X: np.ndarray) -> np.ndarray:
    """J applied to a vector or to each row of a 2-d array."""
    X = np.asarray(X, dtype=float)
    out = np.empty_like(X)
    out[..., 0::2] = -X[..., 1::2]
    out[..., 1::2] = X[..., 0::2]
    return out


def omega(u, v) -> float:
    return float(np.dot(apply_j(u), v))


@dataclass(frozen=True)
class SymplecticContext:
    n: int

    @property
    def J(self) -> np.ndarray:
        return complex_structure(self.n)

    def omega(self, u, v) -> float:
        return omega(u, v)


def symplectic_defect(S: np.ndarray) -> float:
    S = np.asarray(S, dtype=float)
    J = complex_structure(S.shape[0] // 2)
    return float(np.abs(S.T @ J @ S - J).max())


def is_symplectic(S, tol: float = TOL.symplectic) -> bool:
    return symplectic_defect(S) <= tol


def symplectic_inverse(S: np.ndarray) -> np.ndarray:
    """S^{-1} = -J S^T J, exact for symplectic S."""
    J = complex_structure(S.shape[0] // 2)
    return -J @ S.T @ J


def pair_diag(r) -> np.ndarray:
    """diag(r1, r1, ..., rn, rn)."""
    return np.diag(np.repeat(np.asarray(r, dtype=float), 2))


def williamson(M, tol=TOL) -> tuple[np.ndarray, np.ndarray]:
    """Symplectic S and d (ascending) with M = S^T diag(d1, d1, ..., dn, dn) S.

    The d_j are the moduli of the eigenvalues of J M. They come from the
    Hermitian matrix iH, H = M^{1/2} J M^{1/2}: for an eigenpair
    (d, a + ib) with d > 0 we have H a = d b and H b = -d a, so the real
    and imaginary parts give an orthonormal basis O with
    H = O diag(d) J O^T, and S = diag(d)^{-1/2} O^T M^{1/2}.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise InputError(f"williamson needs an even square matrix, got {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > tol.symmetric * scale:
        raise InputError("williamson needs a symmetric matrix")
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    if w[0] < tol.min_eigenvalue:
        raise ConditioningError("matrix is not positive definite", min_eigenvalue=float(w[0]))
    root = (V * np.sqrt(w)) @ V.T
    S, d, _ = _williamson_from_root(root, M, scale, tol)
    return S, d


def _williamson_from_root(root, M, scale, tol):
    n = M.shape[0] // 2
    H = root @ complex_structure(n) @ root
    lam, Z = np.linalg.eigh(1j * H)
    # eigenvalues come in +-d pairs; the top n are the positive ones, ascending
    d = lam[n:]
    Zp = Z[:, n:]
    O = np.empty((2 * n, 2 * n))
    O[:, 0::2] = np.sqrt(2.0) * Zp.real
    O[:, 1::2] = np.sqrt(2.0) * Zp.imag
    S = (O.T @ root) / np.sqrt(np.repeat(d, 2))[:, None]
    resid = float(np.abs(S.T @ pair_diag(d) @ S - M).max())
    if resid > tol.williamson_residual * scale:
        raise NumericalError("williamson reconstruction residual too large", residual=resid)
    return S, d, O


@dataclass(frozen=True)
class SymplecticSpectrum:
    radii: np.ndarray  # ascending r1 <= ... <= rn
    S: np.ndarray      # S E = diag(r1, r1, ..., rn, rn) B


def symplectic_spectrum(M) -> SymplecticSpectrum:
    """Symplectic radii of the ellipsoid {x : <Mx, x> <= 1}."""
    S, d = williamson(M)
    order = np.argsort(-d)  # largest d = smallest radius
    n = len(d)
    perm = np.empty(2 * n, dtype=int)
    perm[0::2] = 2 * order
    perm[1::2] = 2 * order + 1
    return SymplecticSpectrum(radii=1.0 / np.sqrt(d[order]), S=S[perm])


@dataclass(frozen=True)
class WdsDecomposition:
    W: np.ndarray
    D: np.ndarray
    S: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return np.diag(self.D)[0::2].copy()

    def product(self) -> np.ndarray:
        return self.W @ self.D @ self.S

    def residuals(self, T) -> dict:
        T = np.asarray(T, dtype=float)
        I = np.eye(T.shape[0])
        return {
            "reconstruction": float(np.abs(self.product() - T).max() / np.abs(T).max()),
            "orthogonality": float(np.abs(self.W.T @ self.W - I).max()),
            "symplectic": symplectic_defect(self.S),
            "det_product_minus_one": float(abs(np.prod(self.r) - 1.0)),
        }

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "D": np.diag(self.D).tolist(), "S": self.S.tolist()}


def wds_decompose(T, tol=TOL) -> WdsDecomposition:
    """T = W D S with W orthogonal, D = diag(r1, r1, ...) > 0, S symplectic."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] % 2:
        raise InputError(f"wds_decompose needs an even square matrix, got {T.shape}")
    if not abs(np.linalg.det(T)) > tol.min_abs_det:
        raise InputError("wds_decompose needs an invertible matrix")
    # (T^T T)^{1/2} from the SVD keeps the conditioning of T, not its square,
    # and W = T S^{-1} D^{-1} collapses to the product of orthogonal factors
    U, sv, Vt = np.linalg.svd(T)
    root = (Vt.T * sv) @ Vt
    M = root @ root
    S, d, O = _williamson_from_root(root, M, max(1.0, float(np.abs(M).max())), tol)
    D = pair_diag(np.sqrt(d))
    W = (U @ Vt) @ O
    err = float(np.abs(W.T @ W - np.eye(len(W))).max())
    if err > tol.orthogonality:
        raise NumericalError("W is not orthogonal", orthogonality=err)
    return WdsDecomposition(W=W, D=D, S=S)


@dataclass(frozen=True)
class HolomorphicPlane:
    v: np.ndarray
    jv: np.ndarray

    def __post_init__(self):
        v, jv = np.asarray(self.v, float), np.asarray(self.jv, float)
        G = np.array([[v @ v, v @ jv], [jv @ v, jv @ jv]])
        if np.abs(G - np.eye(2)).max() > 10 * TOL.plane or abs(omega(v, jv) - 1.0) > 10 * TOL.plane:
            raise InputError("plane basis is not an orthonormal (v, Jv) pair")

    @property
    def basis(self) -> np.ndarray:
        """dim x 2 matrix with columns v, Jv."""
        return np.stack([self.v, self.jv], axis=1)

    def to_dict(self) -> dict:
        return {"v": np.asarray(self.v).tolist(), "jv": np.asarray(self.jv).tolist()}


def holomorphic_plane_from(v) -> HolomorphicPlane:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or len(v) % 2:
        raise InputError("holomorphic_plane_from needs a vector of even length")
    if not np.all(np.isfinite(v)):
        raise InputError("non-finite vector")
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise InputError("cannot build a plane from the zero vector")
    v = v / norm
    return HolomorphicPlane(v=v, jv=apply_j(v))


def complex_to_real(U: np.ndarray) -> np.ndarray:
    """Real 2n x 2n form of a complex n x n matrix, z_k = x_k + i y_k."""
    n = U.shape[0]
    R = np.empty((2 * n, 2 * n))
    R[0::2, 0::2] = U.real
    R[0::2, 1::2] = -U.imag
    R[1::2, 0::2] = U.imag
    R[1::2, 1::2] = U.real
    return R


def random_unitary(n: int, seed: int) -> np.ndarray:
    """Haar-random element of U(n) acting on R^{2n}; orthogonal and symplectic."""
    if n < 1:
        raise InputError("n must be >= 1")
    rng = np.random.default_rng(seed)
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return complex_to_real(Q * ph[None, :])


def random_symplectic(n: int, seed: int, squeeze: float = 0.5) -> np.ndarray:
    """U1 diag(e^{s1}, e^{-s1}, ...) U2 with |s_k| <= squeeze (Euler form)."""
    rng = np.random.default_rng(seed)
    s = rng.uniform(-squeeze, squeeze, size=n)
    sq = np.empty(2 * n)
    sq[0::2] = np.exp(s)
    sq[1::2] = np.exp(-s)
    U1 = random_unitary(n, int(rng.integers(2**32)))
    U2 = random_unitary(n, int(rng.integers(2**32)))
    return U1 @ np.diag(sq) @ U2


def random_sl(dim: int, seed: int) -> np.ndarray:
    """Gaussian matrix rescaled to determinant +1."""
    rng = np.random.default_rng(seed)
    while True:
        A = rng.standard_normal((dim, dim))
        det = np.linalg.det(A)
        if abs(det) > 1e-3:
            break
    if det < 0:
        A[0] = -A[0]
        det = -det
    return A / det ** (1.0 / dim)


def expm_hamiltonian(H) -> np.ndarray:
    """exp(J H) for symmetric H, a symplectic matrix."""
    H = np.asarray(H, dtype=float)
    return sla.expm(complex_structure(H.shape[0] // 2) @ (0.5 * (H + H.T)))
