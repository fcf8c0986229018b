import math

import numpy as np
import pytest
from scipy.special import gammaln

from symcap.bodies import Ball, CrossPolytope, Cube, Ellipsoid, LinearImage, LpBall, ball_volume, scaled, volume
from symcap.errors import InputError
from symcap.widths import (
    all_cube_vertices,
    cube_vertex_points,
    mean_norm,
    mean_width,
    rademacher_average,
    sphere_points,
    sstar_auto,
)

SAMPLES = 50_000


def expected_l1_on_sphere(d):
    """E |x|_1 for x uniform on S^{d-1}: d Gamma(d/2) / (sqrt(pi) Gamma((d+1)/2))."""
    return d * math.exp(gammaln(d / 2) - gammaln((d + 1) / 2)) / math.sqrt(math.pi)


def test_sampler_shapes_and_determinism():
    P = sphere_points(6, 20_000, 3)
    assert P.shape == (20_000, 6)
    np.testing.assert_allclose(np.linalg.norm(P, axis=1), 1.0, rtol=1e-14)
    np.testing.assert_array_equal(P, sphere_points(6, 20_000, 3))
    assert not np.array_equal(P, sphere_points(6, 20_000, 4))
    # a longer run extends a shorter one chunk by chunk
    np.testing.assert_array_equal(sphere_points(6, 8192, 3), P[:8192])
    V = cube_vertex_points(6, 1000, 0)
    np.testing.assert_allclose(np.abs(V), 1 / math.sqrt(6))


def test_all_cube_vertices():
    V = np.vstack(list(all_cube_vertices(4)))
    assert V.shape == (16, 4)
    assert len({tuple(v) for v in V}) == 16


def test_mean_width_ball():
    for dim in (4, 10):
        w = mean_width(Ball(dim), SAMPLES, 1)
        assert abs(w.value - 1) <= 4 * w.stderr + 1e-12
        w = mean_width(Ball(dim, 2.5), SAMPLES, 1)
        assert abs(w.value - 2.5) <= 4 * w.stderr + 1e-12


@pytest.mark.parametrize("n", [5, 10])
def test_mean_width_cube(n):
    w = mean_width(Cube(2 * n), SAMPLES, 0)
    exact = expected_l1_on_sphere(2 * n)
    assert abs(w.value - exact) <= 4 * w.stderr
    assert w.value == pytest.approx(2 * math.sqrt(n / math.pi), rel=0.05)


def test_mean_norm_ball_and_polar_pair():
    w = mean_norm(Ball(6), SAMPLES, 2)
    assert w.value == pytest.approx(1.0, abs=1e-12)
    # |x|_cube = |x|_inf = h_cross(x), sample by sample
    m = mean_norm(Cube(8), SAMPLES, 5)
    ms = mean_width(CrossPolytope(8), SAMPLES, 5)
    assert m.value == pytest.approx(ms.value, rel=1e-14)


def test_holder_on_random_ellipsoids(rng):
    for _ in range(5):
        A = rng.standard_normal((6, 6))
        K = Ellipsoid(A.T @ A + 0.2 * np.eye(6))
        m = mean_norm(K, 20_000, 0)
        vr = (volume(K).value / ball_volume(6)) ** (1 / 6)
        assert 1 / m.value <= vr * (1 + 4 * m.rel_stderr)


def test_rademacher_examples():
    for dim in (4, 6, 10):
        s = rademacher_average(Cube(dim))
        assert s.exact and s.stderr == 0 and s.samples == 2**dim
        assert s.value == pytest.approx(math.sqrt(dim), rel=1e-12)
        assert rademacher_average(Ball(dim)).value == pytest.approx(1.0, rel=1e-12)
    s = rademacher_average(CrossPolytope(6))
    assert s.value == pytest.approx(1 / math.sqrt(6), rel=1e-12)
    assert s.r_star == pytest.approx(1.0, rel=1e-12)


def test_rademacher_mc_matches_exact():
    K = LpBall(10, 1.5)
    exact = rademacher_average(K, "exact")
    mc = rademacher_average(K, "mc", 20_000, 3)
    assert not mc.exact and abs(mc.value - exact.value) <= 4 * mc.stderr


def test_rademacher_refuses_large_exact():
    with pytest.raises(InputError, match="mc"):
        rademacher_average(Cube(24), "exact")
    assert not sstar_auto(Cube(24), 1000, 0).exact
    assert sstar_auto(Cube(6)).exact
    with pytest.raises(InputError):
        rademacher_average(Cube(4), "bogus")


def test_min_samples():
    with pytest.raises(InputError):
        mean_width(Ball(4), 99)
    with pytest.raises(InputError):
        mean_norm(Ball(4), 10)


def test_homogeneity_is_exact_per_sample():
    for K in (Cube(6), CrossPolytope(6), LpBall(6, 3.0)):
        for lam in (0.3, 2.0, 7.5):
            L = scaled(K, lam)
            assert mean_width(L, 5000, 9).value == pytest.approx(lam * mean_width(K, 5000, 9).value, rel=1e-12)
            assert mean_norm(L, 5000, 9).value == pytest.approx(mean_norm(K, 5000, 9).value / lam, rel=1e-12)
            assert rademacher_average(L).value == pytest.approx(lam * rademacher_average(K).value, rel=1e-12)


def test_monotonicity_common_random_numbers():
    # cross-polytope in B_p in ball in B_3 in cube, support dominance on every direction
    chain = [CrossPolytope(8), LpBall(8, 1.5), Ball(8), LpBall(8, 3.0), Cube(8)]
    mw = [mean_width(K, 2000, 4).value for K in chain]
    ss = [rademacher_average(K).value for K in chain]
    assert mw == sorted(mw) and ss == sorted(ss)
    # and for a pair that differs by less than the stderr
    K, L = Cube(8), LinearImage(np.diag([1.0001] + [1.0] * 7), Cube(8))
    a, b = mean_width(K, 2000, 4), mean_width(L, 2000, 4)
    assert b.value - a.value < a.stderr
    assert a.value <= b.value


def test_threads_do_not_change_results():
    K = LpBall(8, 1.5)
    a = mean_width(K, 40_000, 11, threads=1)
    b = mean_width(K, 40_000, 11, threads=4)
    assert a == b
    assert rademacher_average(K, threads=3) == rademacher_average(K)


def test_to_dict():
    d = rademacher_average(Cube(4)).to_dict()
    assert d["kind"] == "sstar" and d["exact"] and d["r_star"] == pytest.approx(4.0)
    assert "r_star" not in mean_width(Ball(4), 200, 0).to_dict()
