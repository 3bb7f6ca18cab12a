"""Planar λ-curves ``kappa + <X, N> = lam`` by ODE shooting.

The curve is integrated in arclength with state ``(x, y, theta)``, tangent
``T = (cos theta, sin theta)`` and left normal ``N = (-sin theta, cos theta)``:

    x' = cos theta,  y' = sin theta,  theta' = lam + x sin theta - y cos theta.

Trajectories start at ``(rho0, 0)`` heading straight up.  The equation is
invariant under reflection in lines through the origin, so the start point
(where ``|X|`` is extremal) is a symmetry point; the next extremum of ``|X|``
is another one.  If the polar angle of that second point is ``pi/m`` the
curve closes after ``2m`` reflected copies of the half arc.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .hypersurface import CurveProduct, PolylineCurve
from .quadrature import build_grid

logger = logging.getLogger(__name__)

CLOSURE_TOL = 1e-6


class NotFound(LookupError):
    """No closed curve in the requested bracket."""


class ShootingError(RuntimeError):
    """Integration failed (for example the arclength budget ran out)."""


@dataclass(frozen=True)
class CurveShootingProblem:
    lam: float
    rho0: float
    tol: float = 1e-12
    max_arclength: float = 200.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True, eq=False)
class ShootingResult:
    curve: PolylineCurve
    lam: float
    rho0: float
    length: float
    fold: int
    position_gap: float
    tangent_gap: float
    embedded: bool
    circle: bool

    @property
    def closure_gap(self) -> float:
        return max(self.position_gap, self.tangent_gap)


def _rhs(s, u, lam):
    x, y, th = u
    c, sn = math.cos(th), math.sin(th)
    return [c, sn, lam + x * sn - y * c]


def circle_radius(lam: float) -> float:
    """Positive root of ``r^2 + lam r - 1 = 0``."""
    return (-lam + math.sqrt(lam * lam + 4)) / 2


def _solve(problem: CurveShootingProblem, s_end, events=None, dense=False):
    u0 = [problem.rho0, 0.0, math.pi / 2]
    sol = solve_ivp(_rhs, (0.0, s_end), u0, method="DOP853", args=(problem.lam,),
                    rtol=problem.tol, atol=problem.tol * 1e-1, events=events,
                    dense_output=dense)
    if sol.status < 0:
        raise ShootingError(sol.message)
    return sol


def half_arc(problem: CurveShootingProblem):
    """Arclength, end state, polar angle and radius at the next extremum of ``|X|``.

    Returns ``None`` when the start is already on the circle (``|X|`` constant).
    """
    lam, rho = problem.lam, problem.rho0
    slope = 1 - lam * rho - rho * rho          # d/ds <X, T> at the start
    if abs(slope) < 1e-14:
        return None

    def ev(s, u, lam):
        return u[0] * math.cos(u[2]) + u[1] * math.sin(u[2])

    ev.terminal = True
    ev.direction = -1.0 if slope > 0 else 1.0
    sol = _solve(problem, problem.max_arclength, events=[ev])
    if not sol.t_events[0].size:
        raise ShootingError("arclength budget exhausted before the next extremum")
    s1 = float(sol.t_events[0][0])
    u1 = sol.y_events[0][0]
    return s1, u1, math.atan2(u1[1], u1[0]), math.hypot(u1[0], u1[1])


def integrate_curve(problem: CurveShootingProblem, samples: int = 512,
                    arclength: Optional[float] = None) -> PolylineCurve:
    """Open polyline sampled uniformly in arclength.

    By default the curve is followed until it next crosses the starting
    half-axis upwards (one full turn around the origin); ``arclength`` fixes
    the length instead.
    """
    if arclength is None:
        # unwrapped polar angle as an extra state; stop after one full turn
        def rhs4(s, u, lam):
            x, y, th = u[:3]
            return _rhs(s, u[:3], lam) + [(x * math.sin(th) - y * math.cos(th)) / (x * x + y * y)]

        def turn(s, u, lam):
            return u[3] - 2 * math.pi

        turn.terminal = True
        probe = solve_ivp(rhs4, (0.0, problem.max_arclength), [problem.rho0, 0.0, math.pi / 2, 0.0],
                          method="DOP853", args=(problem.lam,), rtol=problem.tol,
                          atol=problem.tol * 1e-1, events=[turn])
        if not probe.t_events[0].size:
            raise ShootingError("arclength budget exhausted before returning to the axis")
        arclength = float(probe.t_events[0][0])
    sol = _solve(problem, arclength, dense=True)
    s = np.linspace(0.0, arclength, samples)
    xy = sol.sol(s)[:2].T
    return PolylineCurve(xy, closed=False, lam=problem.lam)


def _close(problem, s_half, fold, samples):
    length = 2 * fold * s_half
    sol = _solve(problem, length, dense=True)
    end = sol.y[:, -1]
    pos_gap = math.hypot(end[0] - problem.rho0, end[1])
    tan_gap = abs(end[2] - (math.pi / 2 + 2 * math.pi))
    s = np.arange(samples) * (length / samples)
    xy = sol.sol(s)[:2].T
    curve = PolylineCurve(xy, closed=True, estimator="spectral", lam=problem.lam)
    return curve, length, pos_gap, tan_gap


def shoot_circle(lam: float, bracket=None, samples: int = 256, tol: float = 1e-12) -> ShootingResult:
    """Recover the round solution by shooting on the mismatch of successive
    extremal radii (positive below the circle, negative above)."""
    if bracket is None:
        r = circle_radius(lam)
        bracket = (0.8 * r, 1.25 * r)

    def mismatch(rho):
        arc = half_arc(CurveShootingProblem(lam, rho, tol))
        return 0.0 if arc is None else arc[3] - rho

    a, b = bracket
    fa, fb = mismatch(a), mismatch(b)
    if fa * fb > 0:
        raise NotFound(f"no circle in bracket {bracket} for lam={lam}")
    rho = brentq(mismatch, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    prob = CurveShootingProblem(lam, rho, tol)
    curve, length, pg, tg = _close(prob, math.pi * rho / 2, 2, samples)
    return ShootingResult(curve, lam, rho, length, 1, pg, tg, curve.is_embedded(), True)


def shoot_closed(lam: float, bracket, fold: int = 2, samples: int = 512,
                 tol: float = 1e-13) -> ShootingResult:
    """Closed λ-curve with ``fold``-fold symmetry started at distance ``rho0`` in ``bracket``.

    The mismatch is the polar angle of the next extremum of ``|X|`` minus
    ``pi/fold``.  Raises NotFound when the bracket shows no sign change or the
    closed curve fails the closure or embeddedness checks.
    """
    if fold < 2:
        raise ValueError("fold must be at least 2 (fold 1 would not close)")
    target = math.pi / fold

    def mismatch(rho):
        arc = half_arc(CurveShootingProblem(lam, rho, tol))
        if arc is None:
            raise NotFound("bracket endpoint lies on the circle")
        return arc[2] - target

    a, b = bracket
    fa, fb = mismatch(a), mismatch(b)
    if fa * fb > 0:
        raise NotFound(f"no sign change of the axis-angle mismatch on {bracket} for lam={lam}")
    rho = brentq(mismatch, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    prob = CurveShootingProblem(lam, rho, tol)
    s_half = half_arc(prob)[0]
    curve, length, pg, tg = _close(prob, s_half, fold, samples)
    emb = curve.is_embedded()
    radii = np.linalg.norm(curve.vertices, axis=1)
    is_circle = bool(np.ptp(radii) <= 1e-8 * radii.max())
    res = ShootingResult(curve, lam, rho, length, fold, pg, tg, emb, is_circle)
    if res.closure_gap > CLOSURE_TOL:
        raise NotFound(f"closure gap {res.closure_gap:.2e} above tolerance")
    if not emb:
        raise NotFound("closed curve is not embedded")
    return res


def search_closed(lam: float, rho_values, folds=(2, 3, 4, 5, 6), samples: int = 512):
    """Scan starting radii for sign changes of the mismatch and solve every bracket found."""
    found = []
    rho_values = np.asarray(rho_values, dtype=float)
    for fold in folds:
        prev = None
        for rho in rho_values:
            try:
                arc = half_arc(CurveShootingProblem(lam, rho))
            except ShootingError:
                prev = None
                continue
            val = None if arc is None else arc[2] - math.pi / fold
            if prev is not None and val is not None and prev[1] * val < 0:
                try:
                    found.append(shoot_closed(lam, (prev[0], rho), fold, samples))
                except NotFound as exc:
                    logger.info("bracket (%g, %g) fold %d rejected: %s", prev[0], rho, fold, exc)
            prev = None if val is None else (rho, val)
    return found


def product_with_line(curve: PolylineCurve, m: int, tol: float = 1e-5) -> CurveProduct:
    """``curve x R^m`` after verifying the curve's λ-residual."""
    from .hypersurface import lambda_residual

    if not curve.closed:
        raise ValueError("product needs a closed curve")
    if curve.lam is None:
        raise ValueError("curve carries no λ value; solve or annotate it first")
    _, sup = lambda_residual(curve, build_grid(curve, 8), lam=curve.lam)
    if sup > tol:
        raise ValueError(f"curve λ-residual {sup:.2e} exceeds {tol:.0e}")
    return CurveProduct(curve, m)
