"""Numerical tolerances shared by every module.

Acceptance tests pin these values; change them here and nowhere else.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    symmetric: float = 1e-10          # ||M - M^T||_max for SPD inputs
    min_eigenvalue: float = 1e-12     # below this an SPD matrix is rejected
    williamson_residual: float = 1e-8  # relative, ||S^T diag(d) S - M||_max
    orthogonality: float = 1e-8       # ||W^T W - I||_max accepted in WDS
    symplectic: float = 1e-9          # ||S^T J S - J||_max
    plane: float = 1e-12              # orthonormality of a holomorphic plane
    min_abs_det: float = 1e-12
    svd: float = 1e-10
    gauge_bisection: float = 1e-12
    gauge_max_iter: int = 200
    mvee_max_iter: int = 100_000


TOL = Tolerances()

DEFAULT_GRID = 720
DEFAULT_WIDTH_SAMPLES = 200_000
DEFAULT_SSTAR_SAMPLES = 100_000
DEFAULT_POSITION_BUDGET = 400
DEFAULT_POSITION_SAMPLES = 20_000
DEFAULT_TRIALS = 200
EXACT_SSTAR_MAX_DIM = 22
ZONOTOPE_SUBSET_CAP = 200_000
CHUNK = 8192
