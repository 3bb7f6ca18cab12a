import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lamsurf.calculus import ChartCalculus
from lamsurf.hypersurface import (GeometryError, PolylineCurve, ellipse, evaluate_geometry, lambda_residual,
                                  make_cylinder, make_sphere, regular_polygon)
from lamsurf.quadrature import build_grid


@pytest.mark.parametrize("n,r", [(1, 1.0), (2, math.sqrt(2)), (3, 0.5), (2, 2.0)])
def test_sphere_sign_convention(n, r):
    M = make_sphere(n, r)
    p = build_grid(M, 8).points
    np.testing.assert_allclose(p.N, -p.X / r, atol=1e-14)
    np.testing.assert_allclose(p.H, n / r, rtol=1e-14)
    np.testing.assert_allclose(p.S, n / r ** 2, rtol=1e-14)
    np.testing.assert_allclose(p.f3, n / r ** 3, rtol=1e-14)
    assert M.lambda_exact == pytest.approx(n / r - r)


@pytest.mark.parametrize("n,k,r", [(2, 1, 1.0), (3, 1, 2.0), (3, 2, math.sqrt(2)), (1, 0, 0.5), (2, 0, 0.0)])
def test_cylinder_residual(n, k, r):
    M = make_cylinder(n, k, r)
    _, sup = lambda_residual(M, build_grid(M, 8))
    assert sup <= 1e-12
    assert M.lambda_exact == pytest.approx(k / r - r if k else -r)


def test_cylinder_rejects_zero_radius_with_sphere_factor():
    with pytest.raises((GeometryError, ValueError)):
        make_cylinder(2, 1, 0.0)


def test_shape_tensor_has_normal_kernel():
    M = make_cylinder(2, 1, 1.5)
    p = build_grid(M, 8).points
    B = p.shape_tensor
    np.testing.assert_allclose(np.einsum("mij,mj->mi", B, p.N), 0, atol=1e-13)
    np.testing.assert_allclose(np.trace(B, axis1=1, axis2=2), p.H, rtol=1e-13)


def test_chart_curvatures_match_closed_form():
    M = make_sphere(2, 1.3)
    g = build_grid(M, 8)
    calc = ChartCalculus(M, g.params[:20])
    np.testing.assert_allclose(calc.principal_curvatures, 1 / 1.3, rtol=1e-8)


def test_evaluate_geometry_on_sphere():
    M = make_sphere(2, 1.0)
    g = build_grid(M, 8)
    sample = evaluate_geometry(M, g.params[0])
    assert sample.H == pytest.approx(2.0)
    assert sample.principal_curvatures == pytest.approx((1.0, 1.0))
    flip = sample.flipped()
    assert flip.H == pytest.approx(-2.0) and flip.S == pytest.approx(2.0)


def test_polygon_curvature_converges_to_circle():
    errs = []
    for m in (32, 64, 128):
        c = regular_polygon(m, 2.0)
        errs.append(np.abs(c.curvature - 0.5).max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_spectral_estimator_on_ellipse():
    a, b = 1.5, 0.8
    c = ellipse(128, a, b, "spectral")
    t = 2 * np.pi * np.arange(128) / 128
    exact = a * b / (a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2) ** 1.5
    np.testing.assert_allclose(c.curvature, exact, rtol=1e-11)
    # perimeter 4 a E(1 - b^2/a^2) from the complete elliptic integral
    assert c.dual_weights.sum() == pytest.approx(7.393979017871265, rel=1e-13)


def test_polyline_validation():
    with pytest.raises(GeometryError, match="vertices 2 and 3"):
        v = regular_polygon(12).vertices.copy()
        v[3] = v[2]
        PolylineCurve(v)
    with pytest.raises(GeometryError):
        PolylineCurve(np.zeros((4, 2)))
    with pytest.raises(GeometryError):
        PolylineCurve(np.full((10, 2), np.nan))


def test_self_intersection_detected():
    t = 2 * np.pi * np.arange(200) / 200
    figure_eight = np.c_[np.sin(t), np.sin(t) * np.cos(t)]
    c = PolylineCurve(figure_eight)
    assert not c.is_embedded()
    assert regular_polygon(50).is_embedded()


@settings(max_examples=40, deadline=None)
@given(angle=st.floats(0, 2 * np.pi), shift=st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
       scale=st.floats(0.2, 5.0))
def test_curvature_is_rigid_invariant_and_scales(angle, shift, scale):
    c = ellipse(64, 1.4, 0.7)
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    moved = c.with_vertices(scale * c.vertices @ R.T + np.array(shift))
    np.testing.assert_allclose(moved.curvature, c.curvature / scale, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(moved.dual_weights, c.dual_weights * scale, rtol=1e-9)


@settings(max_examples=20, deadline=None)
@given(m=st.integers(8, 200), r=st.floats(0.1, 10))
def test_reversal_flips_normals_and_curvature(m, r):
    c = regular_polygon(m, r)
    rc = c.reversed()
    np.testing.assert_allclose(rc.curvature[::-1], -c.curvature, rtol=1e-9)
    assert rc.length == pytest.approx(c.length)
