import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lamsurf.flow import (FlowError, Reference, compute_alpha, initial_state, perturbed_circle, resample, run,
                          self_similar_residual, stable_step, step)
from lamsurf.functionals import weighted_area, weighted_volume
from lamsurf.hypersurface import ellipse, make_sphere, regular_polygon
from lamsurf.quadrature import build_grid


def test_volume_is_conserved():
    hist = run(perturbed_circle(128, 1.0, 0.05), 0.1, 1e-4, check_every=0)
    assert hist.volume_defect <= 1e-12
    assert len(hist.records) == 1001
    assert hist.final.t == pytest.approx(0.1)


def test_alpha_on_circle_is_curvature():
    st0 = initial_state(regular_polygon(256, 1.5))
    kappa = st0.curve.curvature.mean()
    assert compute_alpha(st0) == pytest.approx(kappa, rel=1e-12)


def test_circle_is_stationary():
    # speed kappa - alpha vanishes on a regular polygon, so the curve does not move
    c = regular_polygon(64, 1.0)
    hist = run(c, 0.01, 1e-4, check_every=0)
    np.testing.assert_allclose(hist.final.curve.vertices, c.vertices, atol=1e-13)


def test_perturbation_decays():
    c = perturbed_circle(128, 1.0, 0.05, (0.0, 1.0))
    spread0 = np.ptp(c.curvature)
    hist = run(c, 0.1, 1e-4, check_every=0)
    assert np.ptp(hist.final.curve.curvature) < spread0


def test_step_guard_and_validation():
    c = regular_polygon(64)
    st0 = initial_state(c)
    with pytest.raises(FlowError):
        step(st0, 10 * stable_step(c), check_embedding=False)
    with pytest.raises(ValueError):
        run(c, 0.1, 0.03)
    with pytest.raises(ValueError):
        run(c, -1.0, 1e-3)


def test_alpha_floor_raises():
    c = regular_polygon(64)
    st0 = initial_state(c)
    N = st0.reference.normals
    # frozen normals turned by 90 degrees: zero overlap with the current ones
    st0.reference = Reference(np.c_[-N[:, 1], N[:, 0]], st0.reference.weights)
    with pytest.raises(FlowError):
        compute_alpha(st0)


def test_jsonl_records_and_observers():
    seen = []
    hist = run(perturbed_circle(64), 0.001, 1e-4, observers=[seen.append], check_every=0)
    lines = hist.to_jsonl().splitlines()
    assert len(lines) == 11 and len(seen) == 10
    rec = json.loads(lines[-1])
    assert set(rec) == {"t", "V", "alpha", "min_seg", "max_displacement"}
    assert hist.to_jsonl() == run(perturbed_circle(64), 0.001, 1e-4, check_every=0).to_jsonl()


@pytest.mark.parametrize("n,r", [(1, 1.0), (2, 0.8), (2, 2.0)])
def test_self_similar_residual_on_spheres(n, r):
    M = make_sphere(n, r)
    g = build_grid(M, 16)
    # at beta0 = -2 the residual equals |V| / A on a lambda-sphere
    assert self_similar_residual(M, g, -2.0) == pytest.approx(
        abs(weighted_volume(M, g)) / weighted_area(M, g), rel=1e-12)
    assert self_similar_residual(M, g, -2.0) == pytest.approx(r, rel=1e-12)


@settings(max_examples=8, deadline=None)
@given(amp=st.floats(0.0, 0.15), angle=st.floats(0, 2 * math.pi))
def test_volume_conserved_for_random_perturbations(amp, angle):
    c = perturbed_circle(64, 1.0, amp, (math.cos(angle), math.sin(angle)))
    hist = run(c, 0.01, 2e-4, check_every=0)
    assert hist.volume_defect <= 1e-12


def test_ellipse_volume_conserved_while_shape_changes():
    c = ellipse(128, 2.0, 1.0)
    hist = run(c, 0.01, 1e-4, check_every=0)
    assert hist.volume_defect <= 1e-12
    assert np.abs(hist.final.curve.vertices - c.vertices).max() > 1e-3


def test_resample_equalizes_segments():
    c = ellipse(200, 2.0, 0.5)
    r = resample(c, 150)
    assert len(r) == 150
    seg = r.segment_lengths
    assert np.ptp(seg) / seg.mean() < 0.01
    assert r.length == pytest.approx(c.length, rel=1e-3)


def test_circle_examples():
    c = regular_polygon(64, 2.0)
    assert compute_alpha(initial_state(c)) == pytest.approx(c.curvature.mean(), rel=1e-14)
    assert run(c, 1.0, 1e-3, check_every=0).volume_defect <= 1e-10
    M = make_sphere(1, 2.0)
    g = build_grid(M, 16)
    assert self_similar_residual(M, g, 0.0) <= 1e-14
    assert self_similar_residual(M, g, 1.0) == pytest.approx(1.0, rel=1e-13)
