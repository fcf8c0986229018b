"""Width functionals: mean width M*, mean norm M, Rademacher average s*.

Sample points are generated in fixed-size chunks, each from its own child of
``SeedSequence(seed)``. The points therefore depend only on (dim, samples,
seed), so every comparison between bodies on one seed uses common random
numbers, and parallel evaluation cannot change the result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from symcap.bodies import ConvexBody
from symcap.config import (
    CHUNK,
    DEFAULT_SSTAR_SAMPLES,
    DEFAULT_WIDTH_SAMPLES,
    EXACT_SSTAR_MAX_DIM,
)
from symcap.errors import InputError

MIN_SAMPLES = 100


@dataclass(frozen=True)
class WidthEstimate:
    kind: str  # "mstar" | "m" | "sstar"
    value: float
    stderr: float
    samples: int
    seed: int | None
    exact: bool
    dim: int = 0

    @property
    def rel_stderr(self) -> float:
        return self.stderr / self.value if self.value else math.inf

    @property
    def r_star(self) -> float | None:
        """Non-normalised Rademacher average sqrt(2n) s*; sstar only."""
        return math.sqrt(self.dim) * self.value if self.kind == "sstar" else None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "value": self.value,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "exact": self.exact,
        }
        if self.kind == "sstar":
            out["r_star"] = self.r_star
        return out


def _chunks(samples: int, seed: int) -> list[tuple[int, np.random.SeedSequence]]:
    n_chunks = (samples + CHUNK - 1) // CHUNK
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    return [(min(CHUNK, samples - i * CHUNK), ss) for i, ss in enumerate(children)]


def sphere_chunks(dim: int, samples: int, seed: int) -> Iterator[np.ndarray]:
    """Uniform points on S^{dim-1}, as normalised Gaussians, chunk by chunk."""
    for k, ss in _chunks(samples, seed):
        G = np.random.default_rng(ss).standard_normal((k, dim))
        yield G / np.linalg.norm(G, axis=1, keepdims=True)


def sphere_points(dim: int, samples: int, seed: int) -> np.ndarray:
    return np.vstack(list(sphere_chunks(dim, samples, seed)))


def cube_vertex_chunks(dim: int, samples: int, seed: int) -> Iterator[np.ndarray]:
    """Uniform vertices of {+-1/sqrt(dim)}^dim."""
    for k, ss in _chunks(samples, seed):
        bits = np.random.default_rng(ss).integers(0, 2, size=(k, dim))
        yield (2.0 * bits - 1.0) / math.sqrt(dim)


def cube_vertex_points(dim: int, samples: int, seed: int) -> np.ndarray:
    return np.vstack(list(cube_vertex_chunks(dim, samples, seed)))


def all_cube_vertices(dim: int) -> Iterator[np.ndarray]:
    """Every vertex of {+-1/sqrt(dim)}^dim, in chunks, lexicographic order."""
    total = 1 << dim
    shifts = np.arange(dim - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, CHUNK * 8):
        idx = np.arange(start, min(total, start + CHUNK * 8), dtype=np.int64)
        bits = (idx[:, None] >> shifts[None, :]) & 1
        yield (2.0 * bits - 1.0) / math.sqrt(dim)


def _moments(fn: Callable[[np.ndarray], np.ndarray], chunks, threads: int = 1) -> tuple[float, float, int]:
    """Mean and sample standard deviation of fn over all chunk rows."""
    chunks = list(chunks)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    vals = np.concatenate(parts)
    sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return float(vals.mean()), sd, len(vals)


def _check_samples(samples: int):
    if samples < MIN_SAMPLES:
        raise InputError(f"need at least {MIN_SAMPLES} samples, got {samples}")


def mean_width(K: ConvexBody, samples: int = DEFAULT_WIDTH_SAMPLES, seed: int = 0,
               threads: int = 1) -> WidthEstimate:
    """M*(K): average of h_K over the unit sphere."""
    _check_samples(samples)
    mean, sd, count = _moments(K.support_many, sphere_chunks(K.dim, samples, seed), threads)
    return WidthEstimate("mstar", mean, sd / math.sqrt(count), count, seed, False, K.dim)


def mean_norm(K: ConvexBody, samples: int = DEFAULT_WIDTH_SAMPLES, seed: int = 0,
              threads: int = 1) -> WidthEstimate:
    """M(K): average of the gauge of K over the unit sphere."""
    _check_samples(samples)
    mean, sd, count = _moments(K.gauge_many, sphere_chunks(K.dim, samples, seed), threads)
    return WidthEstimate("m", mean, sd / math.sqrt(count), count, seed, False, K.dim)


def rademacher_average(K: ConvexBody, mode: str = "exact", samples: int = DEFAULT_SSTAR_SAMPLES,
                       seed: int = 0, threads: int = 1) -> WidthEstimate:
    """s*(K): average of h_K over the vertices of {+-1/sqrt(2n)}^{2n}.

    ``mode="exact"`` enumerates all 2^{2n} vertices and is refused above
    2n = 22; ``mode="mc"`` samples vertices uniformly.
    """
    if mode == "exact":
        if K.dim > EXACT_SSTAR_MAX_DIM:
            raise InputError(
                f"exact s* enumerates 2^{K.dim} vertices; refused above dim "
                f"{EXACT_SSTAR_MAX_DIM}, use mode='mc'"
            )
        mean, _, count = _moments(K.support_many, all_cube_vertices(K.dim), threads)
        return WidthEstimate("sstar", mean, 0.0, count, None, True, K.dim)
    if mode == "mc":
        _check_samples(samples)
        mean, sd, count = _moments(K.support_many, cube_vertex_chunks(K.dim, samples, seed), threads)
        return WidthEstimate("sstar", mean, sd / math.sqrt(count), count, seed, False, K.dim)
    raise InputError(f"unknown mode {mode!r}; expected 'exact' or 'mc'")


def sstar_auto(K: ConvexBody, samples: int = DEFAULT_SSTAR_SAMPLES, seed: int = 0) -> WidthEstimate:
    """Exact s* when enumeration is allowed, otherwise Monte Carlo."""
    mode = "exact" if K.dim <= EXACT_SSTAR_MAX_DIM and (1 << K.dim) <= 4 * samples else "mc"
    return rademacher_average(K, mode, samples, seed)
