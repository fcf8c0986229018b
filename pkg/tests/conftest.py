import numpy as np
import pytest

from symcap.bodies import Ball, CrossPolytope, Cube, Ellipsoid, LpBall, SchattenBall, Zonotope


def standard_bodies(dim):
    rng = np.random.default_rng(dim)
    A = rng.standard_normal((dim, dim))
    return {
        "ball": Ball(dim),
        "cube": Cube(dim),
        "cross": CrossPolytope(dim),
        "lp1.5": LpBall(dim, 1.5),
        "lp3": LpBall(dim, 3.0),
        "ellipsoid": Ellipsoid(A.T @ A + np.eye(dim)),
        "zonotope": Zonotope(rng.standard_normal((2 * dim, dim))),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[4, 6])
def dim(request):
    return request.param


@pytest.fixture
def bodies(dim):
    out = standard_bodies(dim)
    if dim == 4:
        out["schatten2"] = SchattenBall(2.0, 2)
        out["schatten1"] = SchattenBall(1.0, 2)
    return out


# -- acceptance verdict lines ------------------------------------------------------------

VERDICTS = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per criterion, print it, then assert it."""

    def _verdict(number, title, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        VERDICTS.append(line)
        print(line)
        assert ok, line

    return _verdict


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
