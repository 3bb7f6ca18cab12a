import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lamsurf.calculus import ChartCalculus
from lamsurf.hypersurface import CurveProduct, ellipse, make_cylinder, make_sphere
from lamsurf.quadrature import build_grid
from lamsurf.variation import (CancellationError, NormalSpeed, VariationSpec, analytic_first_variation_A,
                               analytic_first_variation_F, analytic_first_variation_V,
                               analytic_second_variation_F, analytic_second_variation_T, constant_speed,
                               drift_laplacian_values, first_harmonic, numeric_variation,
                               project_volume_preserving, variation_battery, zonal)


@pytest.fixture(scope="module")
def sphere():
    M = make_sphere(2, 1.0)
    return M, build_grid(M, 24)


def test_constant_speed_first_variation_closed_form(sphere):
    M, g = sphere
    # A(s) = 4 pi (1 - s)^2 exp(-(1 - s)^2 / 2) for the inward constant speed
    expected = 4 * math.pi * (-2 + 1) * math.exp(-0.5)
    assert analytic_first_variation_A(M, g, VariationSpec(constant_speed(1.0))) == pytest.approx(expected, rel=1e-13)
    assert numeric_variation("A", M, g, VariationSpec(constant_speed(1.0)), eps=1e-4) == \
        pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("tag", ["A", "V", "F"])
def test_first_variation_matches_numeric(sphere, tag):
    M, g = sphere
    f = NormalSpeed(constant=0.2, z=(0.3, -0.1, 0.5))
    spec = VariationSpec(f, (0.1, 0.2, -0.3), 0.2) if tag == "F" else VariationSpec(f)
    ana = {"A": analytic_first_variation_A, "V": analytic_first_variation_V}.get(tag)
    a = ana(M, g, spec) if ana else analytic_first_variation_F(M, g, spec)
    # F' vanishes here; the floor covers the O(eps^2) truncation of the difference
    assert numeric_variation(tag, M, g, spec, eps=1e-4) == pytest.approx(a, rel=1e-7, abs=1e-8)


def test_ellipse_first_variation_spectral():
    c = ellipse(256, 1.5, 0.8, "spectral")
    g = build_grid(c)
    spec = VariationSpec(first_harmonic((0.4, 0.9)).shifted(0.1))
    a = analytic_first_variation_A(c, g, spec)
    assert numeric_variation("A", c, g, spec, eps=1e-4) == pytest.approx(a, rel=1e-7)


def test_product_requires_flat_independent_speed():
    c = ellipse(64, 1.2, 0.9, "spectral")
    M = CurveProduct(c, 1)
    g = build_grid(M, 16)
    bad = NormalSpeed(custom=lambda p: p.X[..., 2])
    with pytest.raises(ValueError, match="flat"):
        numeric_variation("A", M, g, VariationSpec(bad))


def test_cancellation_guard(sphere):
    M, g = sphere
    with pytest.raises(CancellationError):
        numeric_variation("A", M, g, VariationSpec(constant_speed(1.0)), eps=1e-13)


def test_argument_validation(sphere):
    M, g = sphere
    spec = VariationSpec(constant_speed(1.0))
    with pytest.raises(ValueError):
        numeric_variation("Q", M, g, spec)
    with pytest.raises(ValueError):
        numeric_variation("A", M, g, spec, order=3)
    with pytest.raises(ValueError):
        VariationSpec(constant_speed(1.0), (1.0, 2.0)).y_vec(3)


@pytest.mark.parametrize("r", [math.sqrt(2), 1.0])
def test_second_variation_matches_central_difference(r):
    M = make_sphere(2, r)
    g = build_grid(M, 32)
    spec = VariationSpec(zonal(2, (0, 0, 1)).shifted(0.3), (0.2, 0.0, -0.1), 0.3)
    a = analytic_second_variation_F(M, g, spec)
    assert numeric_variation("F", M, g, spec, eps=1e-3, order=2) == pytest.approx(a, rel=1e-5)


def test_second_variation_first_harmonic_closed_form():
    # on S^n(r) with f = <e1, N>, y = h = 0: F'' = (4 pi)^(-n/2) (lam^2 - 1) W / (n + 1)
    n, r = 2, 1.6
    M = make_sphere(n, r)
    g = build_grid(M, 24)
    lam = n / r - r
    W = 4 * math.pi * r * r * math.exp(-r * r / 2)
    expected = (4 * math.pi) ** -1 * (lam * lam - 1) * W / 3
    assert analytic_second_variation_F(M, g, VariationSpec(first_harmonic((1, 0, 0)))) == \
        pytest.approx(expected, rel=1e-12)


def test_weak_second_variation_requires_volume_preserving(sphere):
    M, g = sphere
    with pytest.raises(ValueError):
        analytic_second_variation_T(M, g, constant_speed(1.0))
    f = project_volume_preserving(M, g, zonal(2, (0, 0, 1)))
    assert VariationSpec(f).is_volume_preserving(g)
    assert analytic_second_variation_T(M, g, f) == pytest.approx(
        numeric_variation("T", M, g, VariationSpec(f), eps=1e-3, order=2), rel=1e-5)


def test_drift_laplacian_exact_matches_chart():
    M = make_sphere(2, 1.3)
    g = build_grid(M, 8)
    f = zonal(2, (0.0, 0.6, 0.8))
    exact = drift_laplacian_values(M, g, f)
    chart = ChartCalculus(M, g.params).drift_laplacian(f)
    np.testing.assert_allclose(chart, exact, atol=1e-8)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_first_variation_of_F_vanishes_on_lambda_surfaces(seed):
    for M in (make_sphere(2, 1.7), make_cylinder(2, 1, 0.9)):
        g = build_grid(M, 24)
        for spec in variation_battery(M, 4, seed=seed):
            assert abs(analytic_first_variation_F(M, g, spec)) <= 1e-10


def test_battery_is_deterministic():
    M = make_sphere(2, 1.0)
    a = variation_battery(M, 10, seed=3)
    b = variation_battery(M, 10, seed=3)
    assert [(s.y, s.h) for s in a] == [(s.y, s.h) for s in b]
    assert len(a) == 10
