"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion."""

import math
import time

import numpy as np
import pytest

from symcap.bodies import (
    Ball,
    CrossPolytope,
    Cube,
    Ellipsoid,
    LinearImage,
    LpBall,
    SchattenBall,
    Zonotope,
    ball_volume,
    volume,
)
from symcap.capacity import (
    cylinder_bound,
    gamma_ratio,
    inradius_lower_bound,
    lp_composed_bound,
    random_plane_search,
    verify_certificate,
)
from symcap.experiment import ExperimentConfig, certified_values, make_body, replay, run
from symcap.positions import main_pipeline
from symcap.symplect import (
    holomorphic_plane_from,
    pair_diag,
    random_sl,
    random_symplectic,
    symplectic_spectrum,
    wds_decompose,
    williamson,
)
from symcap.widths import mean_width, rademacher_average

pytestmark = pytest.mark.slow


def e0(dim):
    e = np.zeros(dim)
    e[0] = 1.0
    return holomorphic_plane_from(e)


def random_pd(rng, dim):
    A = rng.standard_normal((dim, dim))
    return A.T @ A + 0.3 * np.eye(dim)


def test_criterion_01_cube(verdict):
    worst_t, bad = 0.0, []
    for dim in (4, 8, 12, 20):
        t0 = time.perf_counter()
        K = Cube(dim)
        b = cylinder_bound(K, e0(dim), source="E0")
        g = gamma_ratio(K, b, volume(K))
        dt = time.perf_counter() - t0
        worst_t = max(worst_t, dt)
        # R = sqrt(2) exactly in real arithmetic; pi R^2 may land one ulp off 2 pi
        if not (b.certificate["mode"] == "exact" and math.isclose(b.value, 2 * math.pi, rel_tol=4e-16)
                and g <= math.pi * math.e / dim * (1 + 1e-9) and dt < 1.0):
            bad.append((dim, b.value, g, dt))
    verdict(1, "cube: E0 bound 2pi, gamma <= pi e/(2n), < 1 s", not bad,
            f"slowest {worst_t:.3f} s, failures {bad}")


def test_criterion_02_cross_polytope(verdict):
    t0 = time.perf_counter()
    bad = []
    for dim in (4, 6, 8, 12, 20):
        n = dim // 2
        K = CrossPolytope(dim)
        up = cylinder_bound(K, holomorphic_plane_from(np.ones(dim)), source="diagonal")
        lo = inradius_lower_bound(K)
        g = gamma_ratio(K, up, volume(K))
        ok = (math.isclose(up.value, math.pi / n, rel_tol=1e-12)
              and math.isclose(lo.value, math.pi / (2 * n), rel_tol=1e-12)
              and math.isclose(up.value / lo.value, 2.0, rel_tol=1e-12)
              and g <= math.pi / 2)
        if not ok:
            bad.append((dim, up.value, lo.value, g))
    dt = time.perf_counter() - t0
    verdict(2, "cross-polytope: pi/n vs pi/(2n), ratio 2, gamma <= pi/2, < 1 s",
            not bad and dt < 1.0, f"{dt:.3f} s, failures {bad}")


def test_criterion_03_distorted_cross_polytope(verdict):
    rng = np.random.default_rng(2024)
    worst = -math.inf
    for k in range(5):
        n = (2, 3, 4, 5, 6)[k]
        a = np.exp(rng.uniform(-1, 1, n))
        a = np.repeat(a / np.prod(a) ** (1 / n), 2)
        K = LinearImage(np.diag(a), CrossPolytope(2 * n))
        b = cylinder_bound(K, holomorphic_plane_from(1.0 / a), source="harmonic")
        assert b.certificate["mode"] == "exact"
        worst = max(worst, b.certificate["radius"] - 1 / math.sqrt(n))
    verdict(3, "distorted cross-polytope: harmonic radius <= 1/sqrt(n) + 1e-9", worst <= 1e-9,
            f"max radius - 1/sqrt(n) = {worst:.3e}")


def test_criterion_04_ellipsoids(verdict):
    rng = np.random.default_rng(4)
    res_w = res_inv = 0.0
    ratios = []
    for dim in (4, 6, 10):
        for k in range(20):
            M = random_pd(rng, dim)
            S, d = williamson(M)
            res_w = max(res_w, np.abs(S.T @ pair_diag(d) @ S - M).max() / np.abs(M).max())
            radii = symplectic_spectrum(M).radii
            P = random_symplectic(dim // 2, 1000 + k)
            moved = symplectic_spectrum(P.T @ M @ P).radii
            res_inv = max(res_inv, np.abs(moved - radii).max() / radii.max())
            rep = main_pipeline(Ellipsoid(M), budget=100, trials=50, seed=k, polish=500)
            ratios.append(rep.bound.value / (math.pi * radii[0] ** 2))
    lo, hi = min(ratios), max(ratios)
    ok = res_w <= 1e-8 and res_inv <= 1e-8 and 1 - 1e-12 <= lo and hi <= 1 + 1e-6
    verdict(4, "ellipsoids: Williamson residual, pipeline exactness, invariance", ok,
            f"residual {res_w:.1e}, invariance {res_inv:.1e}, ratio in [{lo - 1:+.1e}, {hi - 1:+.1e}] + 1")


def test_criterion_05_wds(verdict):
    worst = dict(recon=0.0, orth=0.0, sympl=0.0, det=0.0)
    for dim in (4, 8):
        for seed in range(50):
            T = random_sl(dim, seed)
            w = wds_decompose(T)
            I = np.eye(dim)
            J = np.zeros((dim, dim))
            J[1::2, 0::2] = I[0::2, 0::2]
            J[0::2, 1::2] = -I[0::2, 0::2]
            worst["recon"] = max(worst["recon"], np.linalg.norm(w.product() - T, 2) / np.linalg.norm(T, 2))
            worst["orth"] = max(worst["orth"], np.linalg.norm(w.W.T @ w.W - I, 2))
            worst["sympl"] = max(worst["sympl"], np.linalg.norm(w.S.T @ J @ w.S - J, 2))
            worst["det"] = max(worst["det"], abs(np.prod(w.r) - 1))
    ok = worst["recon"] <= 1e-8 and worst["orth"] <= 1e-9 and worst["sympl"] <= 1e-9 and worst["det"] <= 1e-9
    verdict(5, "WDS split of 100 random SL matrices", ok,
            ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_06_markov_rate(verdict):
    trials = 2000
    floor = 1 / 3 - 3 * math.sqrt((1 / 3) * (2 / 3) / trials)
    rates = {}
    for K in (Cube(10), CrossPolytope(10), LpBall(10, 1.5), LpBall(10, 3.0)):
        s = rademacher_average(K, "exact")
        assert s.exact
        _, rates[str(K)] = random_plane_search(K, trials, "cube_vertices", 6, grid_m=32, width=s)
    verdict(6, "Markov success rate >= 1/3 - 3 sigma", min(rates.values()) >= floor,
            f"floor {floor:.3f}, " + ", ".join(f"{k} {v:.3f}" for k, v in rates.items()))


def width_bodies(dim):
    rng = np.random.default_rng([7, dim])
    a = np.exp(rng.uniform(-0.5, 0.5, dim // 2))
    a /= np.prod(a) ** (2 / dim)
    return [
        Ball(dim), Cube(dim), CrossPolytope(dim),
        LpBall(dim, 1.25), LpBall(dim, 1.5), LpBall(dim, 3.0),
        Ellipsoid(random_pd(rng, dim)),
        LinearImage(np.diag(np.repeat(a, 2)), CrossPolytope(dim)),
        Zonotope(rng.standard_normal((2 * dim, dim)) / math.sqrt(dim)),
    ]


def test_criterion_07_width_relations(verdict):
    t0 = time.perf_counter()
    bad, ball_dev = [], 0.0
    for dim in (6, 10):
        for K in width_bodies(dim):
            m = mean_width(K, 200_000, 0)
            s = rademacher_average(K, "exact")
            vr = (volume(K).value / ball_volume(dim)) ** (1 / dim)
            if s.value > math.sqrt(math.pi / 2) * m.value * (1 + 5 * m.rel_stderr):
                bad.append(("sstar", dim, str(K)))
            if vr > m.value * (1 + 4 * m.rel_stderr):
                bad.append(("urysohn", dim, str(K)))
            if isinstance(K, Ball):
                # the ball's support is constant, so its stderr is rounding noise
                ball_dev = max(ball_dev, abs(m.value - 1))
                if abs(m.value - 1) > 4 * m.stderr + 1e-12:
                    bad.append(("ball", dim))
    dt = time.perf_counter() - t0
    verdict(7, "width relations: s* vs M*, Urysohn, M*(B) = 1, < 30 s", not bad and dt < 30,
            f"{dt:.1f} s, |M*(B) - 1| {ball_dev:.1e}, failures {bad}")


def test_criterion_08_lp_bounds(verdict):
    bad, worst_gamma = [], 0.0
    for dim in (6, 10):
        for p in (1.25, 1.5, 2.0, 3.0, math.inf):
            K = LpBall(dim, p)
            bounds = [cylinder_bound(K, e0(dim), source="E0"),
                      random_plane_search(K, 100, "cube_vertices", 0)[0]]
            if p <= 2:
                comp = lp_composed_bound(dim, p)
                if comp.value > 2 * math.pi * dim ** (1 - 2 / p) * (1 + 1e-6):
                    bad.append(("composed", dim, p, comp.value))
                bounds.append(comp)
            else:
                if bounds[0].value > 2 * math.pi * (1 + 1e-12):
                    bad.append(("E0", dim, p, bounds[0].value))
            best = min(bounds, key=lambda b: b.value)
            worst_gamma = max(worst_gamma, gamma_ratio(K, best, volume(K)))
    ok = not bad and worst_gamma <= math.pi / 2
    verdict(8, "l_p bounds and gamma <= pi/2", ok, f"max gamma {worst_gamma:.4f}, failures {bad}")


SANITY_BUDGET = {"mc_samples": 50_000, "search_trials": 60, "position_budget": 120, "grid_m": 360}
SANITY_FAMILIES = [
    {"family": "ball"}, {"family": "cube"}, {"family": "cross_polytope"},
    {"family": "lp_ball", "p": 1.5}, {"family": "lp_ball", "p": 3}, {"family": "random_ellipsoid"},
    {"family": "distorted_cross_polytope"}, {"family": "distorted_cube"},
    {"family": "random_zonotope"}, {"family": "simplex"},
]


def test_criterion_09_theorem_sanity(verdict):
    cfg = ExperimentConfig(bodies=SANITY_FAMILIES, dims=[4, 6, 8], methods=list(
        ("plane-search", "lowner", "ellipsoid", "inradius", "pipeline")), seeds=[0], budgets=SANITY_BUDGET)
    cells = run(cfg, threads=4).cells
    cfg = ExperimentConfig(bodies=[{"family": "schatten_ball", "p": 2}, {"family": "schatten_ball", "p": 1}],
                           dims=[4], methods=["plane-search", "inradius", "pipeline"], budgets=SANITY_BUDGET)
    cells += run(cfg, threads=4).cells

    # a method that does not apply to a body is an input error; anything else is a failure
    unexpected = [c for c in cells if c["status"] != "ok" and not c["error"].startswith("InputError")]
    gamma_bad, order_bad, checked = [], [], 0
    groups = {}
    for c in cells:
        if c["status"] != "ok":
            continue
        groups.setdefault((c["family"], c["dim"]), []).append(c)
        if c["gamma"] is not None:
            checked += 1
            limit = 2 * c["dim"] if c["family"] != "simplex" else 16 * c["dim"]
            if c["gamma"] > limit:
                gamma_bad.append((c["family"], c["dim"], c["method"], c["gamma"]))
    for key, group in groups.items():
        lows = [c["bound"]["value"] for c in group if c["bound"]["kind"] == "lower_ball"]
        ups = [c["bound"]["value"] for c in group if c["bound"]["kind"] != "lower_ball"]
        # both sides carry rounding from pi r^2; the ball and its images meet with equality
        if lows and ups and max(lows) > min(ups) * (1 + 1e-12):
            order_bad.append(key)
    ok = not unexpected and not gamma_bad and not order_bad
    verdict(9, "gamma <= 2n (32n non-symmetric) and lower <= upper", ok,
            f"{checked} gammas, {len(groups)} bodies, violations {gamma_bad + order_bad}, errors {unexpected}")


def test_criterion_10_main_theorem_shape(verdict, capsys):
    rows = []
    for dim in (4, 8, 16):
        K = make_body({"family": "random_zonotope"}, dim, 0)
        rep = main_pipeline(K)
        assert rep.complete and verify_certificate(K, rep.bound) == pytest.approx(rep.bound.value, rel=1e-9)
        rows.append(("zonotope", dim, rep.gamma, rep.volume.exactness))
    for m in (2, 4):
        K = SchattenBall(2.0, m)
        rep = main_pipeline(K)
        assert rep.complete
        rows.append(("schatten p=2", m * m, rep.gamma, rep.volume.exactness))
    for name, dim, g, ex in rows:
        print(f"    {name:<13} 2n = {dim:>2}  gamma = {g:.4f}  ({ex} volume)")
    zg = [g for name, _, g, _ in rows if name == "zonotope"]
    trend = "non-increasing" if all(b <= a for a, b in zip(zg, zg[1:])) else "not monotone"
    verdict(10, "zonotope and Schatten pipeline gamma <= 10 (report only)",
            max(g for _, _, g, _ in rows) <= 10, f"zonotope trend {trend}, max gamma {max(g for _, _, g, _ in rows):.4f}")


def test_criterion_11_replay(verdict):
    cfg = ExperimentConfig(
        bodies=[{"family": "cube"}, {"family": "lp_ball", "p": 1.5}, {"family": "random_zonotope"},
                {"family": "simplex"}],
        dims=[4, 6], methods=["plane-search", "inradius", "pipeline"], seeds=[0, 3],
        budgets={"mc_samples": 20_000, "search_trials": 40, "position_budget": 60, "grid_m": 360})
    first = run(cfg, threads=2)
    again, same = replay(first, threads=3)
    mc_ok = all(
        a["volume"]["value"] == b["volume"]["value"]
        for a, b in zip(first.cells, again.cells) if a["status"] == "ok")
    verdict(11, "replayed RunRecord reproduces certified values bitwise", same and mc_ok,
            f"{len(certified_values(first))} cells, threads 2 then 3")
