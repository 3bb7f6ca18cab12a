import math

import numpy as np
import pytest

from lamsurf.curves import (CurveShootingProblem, NotFound, ShootingError, circle_radius, half_arc,
                            integrate_curve, product_with_line, search_closed, shoot_circle, shoot_closed)
from lamsurf.hypersurface import PolylineCurve, lambda_residual
from lamsurf.quadrature import build_grid


@pytest.mark.parametrize("lam", [-0.5, 0.0, 0.5, 1.0, -2.0])
def test_circle_radius(lam):
    r = circle_radius(lam)
    assert r * r + lam * r - 1 == pytest.approx(0.0, abs=1e-14)
    res = shoot_circle(lam)
    assert abs(res.rho0 - r) <= 1e-8
    assert res.circle and res.embedded
    assert res.curve.length == pytest.approx(2 * math.pi * r, rel=1e-4)


def test_half_arc_on_circle_is_none():
    assert half_arc(CurveShootingProblem(0.0, 1.0)) is None


def test_closed_curve_for_negative_lambda():
    res = shoot_closed(-0.5, (3.0, 6.0))
    # frozen from an independent run: outer start radius and half-turn symmetry
    assert res.rho0 == pytest.approx(3.86835005, abs=1e-6)
    assert res.closure_gap <= 1e-6 and res.embedded and not res.circle
    assert res.length == pytest.approx(16.3126, abs=1e-3)
    _, sup = lambda_residual(res.curve, build_grid(res.curve), lam=-0.5)
    assert sup <= 1e-6
    assert np.ptp(np.linalg.norm(res.curve.vertices, axis=1)) > 3.0


def test_inner_and_outer_starts_give_same_curve():
    outer = shoot_closed(-0.5, (3.0, 6.0))
    inner = shoot_closed(-0.5, (0.3, 0.8))
    assert inner.length == pytest.approx(outer.length, rel=1e-8)
    r_in = np.linalg.norm(inner.curve.vertices, axis=1)
    r_out = np.linalg.norm(outer.curve.vertices, axis=1)
    assert r_in.min() == pytest.approx(r_out.min(), rel=1e-6)
    assert r_in.max() == pytest.approx(r_out.max(), rel=1e-6)


def test_search_finds_closed_curves():
    found = search_closed(-0.5, np.arange(0.3, 6.0, 0.1), folds=(2,), samples=256)
    assert any(not f.circle for f in found)


def test_bad_bracket_raises_not_found():
    with pytest.raises(NotFound):
        shoot_closed(-0.5, (1.5, 2.0))
    with pytest.raises(ValueError):
        shoot_closed(-0.5, (3.0, 6.0), fold=1)


def test_problem_validation():
    with pytest.raises(ValueError):
        CurveShootingProblem(0.0, -1.0)
    with pytest.raises(ValueError):
        CurveShootingProblem(0.0, 1.0, tol=0.0)


def test_arclength_budget():
    with pytest.raises(ShootingError):
        integrate_curve(CurveShootingProblem(-0.5, 0.8, max_arclength=0.5))


def test_integrate_curve_follows_circle():
    r = circle_radius(-1.5)
    c = integrate_curve(CurveShootingProblem(-1.5, r), samples=400)
    np.testing.assert_allclose(np.linalg.norm(c.vertices, axis=1), r, rtol=1e-10)
    assert not c.closed and c.lam == -1.5


def test_product_with_line_checks_residual():
    res = shoot_closed(-0.5, (3.0, 6.0), samples=256)
    M = product_with_line(res.curve, 1)
    _, sup = lambda_residual(M, build_grid(M, 16), lam=-0.5)
    assert sup <= 1e-5
    bad = PolylineCurve(res.curve.vertices * 1.01, estimator="spectral", lam=-0.5)
    with pytest.raises(ValueError):
        product_with_line(bad, 1)
    with pytest.raises(ValueError):
        product_with_line(PolylineCurve(res.curve.vertices, estimator="spectral"), 1)
