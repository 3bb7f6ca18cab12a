"""Normal variations, their analytic first and second derivatives, and a
finite-difference oracle along explicitly deformed geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import eval_chebyt, eval_gegenbauer

from .calculus import ChartCalculus
from .functionals import support_values
from .hypersurface import CurveProduct, PointSet, PolylineCurve, Sphere
from .quadrature import QuadratureGrid, _fsum

TAGS = ("A", "V", "F", "J", "T")


class CancellationError(ArithmeticError):
    """Finite-difference step so small that rounding dominates the estimate."""


# --------------------------------------------------------------------------
# normal speed fields
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ZonalHarmonic:
    """``coeff * P_k(<-N, axis>)`` with the zonal Gegenbauer (Chebyshev for
    curves) polynomial of degree ``k``.  On a round sphere this is a Laplace
    eigenfunction with eigenvalue ``-(k^2 + (n-1)k)/r^2``."""

    degree: int
    axis: tuple
    coeff: float = 1.0

    def __call__(self, pts: PointSet) -> np.ndarray:
        n = pts.N.shape[-1] - 1
        e = np.asarray(self.axis, dtype=float)
        e = e / np.linalg.norm(e)
        t = -(pts.N * e).sum(-1)
        if n == 1:
            return self.coeff * eval_chebyt(self.degree, t)
        return self.coeff * eval_gegenbauer(self.degree, (n - 1) / 2, t)


@dataclass(frozen=True)
class NormalSpeed:
    """Normal speed ``a + <z, N> + sum of zonal harmonics (+ custom)``.

    The tagged parts carry exact sphere Laplacians; ``custom`` is any
    callable on :class:`PointSet` and is differentiated numerically.
    """

    constant: float = 0.0
    z: Optional[tuple] = None
    harmonics: Tuple[ZonalHarmonic, ...] = ()
    custom: Optional[Callable] = field(default=None, compare=False)

    def __call__(self, pts: PointSet) -> np.ndarray:
        out = np.full(pts.N.shape[:-1], float(self.constant))
        if self.z is not None:
            out = out + (pts.N * np.asarray(self.z, dtype=float)).sum(-1)
        for hm in self.harmonics:
            out = out + hm(pts)
        if self.custom is not None:
            out = out + np.asarray(self.custom(pts), dtype=float)
        return out

    def shifted(self, c: float) -> "NormalSpeed":
        return replace(self, constant=self.constant + c)

    def sphere_laplacian(self, pts: PointSet, n: int, r: float) -> Optional[np.ndarray]:
        """Exact Laplacian on S^n(r), or None when a custom part is present."""
        if self.custom is not None:
            return None
        out = np.zeros(pts.N.shape[:-1])
        if self.z is not None:
            out -= (n / r ** 2) * (pts.N * np.asarray(self.z, dtype=float)).sum(-1)
        for hm in self.harmonics:
            k = hm.degree
            out -= (k * k + (n - 1) * k) / r ** 2 * hm(pts)
        return out


def first_harmonic(z) -> NormalSpeed:
    return NormalSpeed(z=tuple(float(v) for v in z))


def constant_speed(a: float) -> NormalSpeed:
    return NormalSpeed(constant=float(a))


def zonal(degree: int, axis, coeff: float = 1.0) -> NormalSpeed:
    return NormalSpeed(harmonics=(ZonalHarmonic(degree, tuple(axis), coeff),))


@dataclass(frozen=True)
class VariationSpec:
    """Variation ``(f, y, h)``: normal speed, centre velocity, scale velocity."""

    f: object
    y: Optional[tuple] = None
    h: float = 0.0

    def y_vec(self, d: int) -> np.ndarray:
        if self.y is None:
            return np.zeros(d)
        y = np.asarray(self.y, dtype=float)
        if y.shape != (d,):
            raise ValueError(f"y must lie in R^{d}")
        return y

    def f_values(self, grid: QuadratureGrid) -> np.ndarray:
        return speed_values(self.f, grid)

    def is_volume_preserving(self, grid: QuadratureGrid, tol: float = 1e-10) -> bool:
        f = self.f_values(grid)
        w = grid.weighted
        return abs(_fsum(f * w)) <= tol * max(_fsum(np.abs(f) * w), 1e-300)


def speed_values(f, grid: QuadratureGrid) -> np.ndarray:
    if callable(f):
        vals = np.asarray(f(grid.points), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    if vals.shape != (grid.size,):
        raise ValueError(f"normal speed has shape {vals.shape}, grid has {grid.size} nodes")
    if not np.all(np.isfinite(vals)):
        raise ValueError("normal speed must be finite at every node")
    return vals


def project_volume_preserving(M, grid: QuadratureGrid, f):
    """Subtract the weighted mean so that ``∫ f w dμ = 0``.

    A :class:`NormalSpeed` comes back as a NormalSpeed (constant shifted);
    node arrays come back as arrays.
    """
    vals = speed_values(f, grid)
    w = grid.weighted
    mean = _fsum(vals * w) / _fsum(w)
    if isinstance(f, NormalSpeed):
        return f.shifted(-mean)
    if callable(f):
        return lambda pts, _f=f, _c=mean: np.asarray(_f(pts)) - _c
    return vals - mean


# --------------------------------------------------------------------------
# first variations
# --------------------------------------------------------------------------
def _lam_of(M, lam):
    if lam is not None:
        return float(lam)
    if M.lambda_exact is None:
        raise ValueError("lam required for a family without an exact value")
    return float(M.lambda_exact)


def analytic_first_variation_A(M, grid: QuadratureGrid, spec: VariationSpec) -> float:
    f = spec.f_values(grid)
    integrand = (-support_values(grid) / grid.t0 - grid.points.H) * f
    return _fsum(integrand * grid.weighted)


def analytic_first_variation_V(M, grid: QuadratureGrid, spec: VariationSpec) -> float:
    return _fsum(spec.f_values(grid) * grid.weighted)


def analytic_first_variation_F(M, grid: QuadratureGrid, spec: VariationSpec,
                               lam: Optional[float] = None) -> float:
    lam = _lam_of(M, lam)
    p = grid.points
    t0 = grid.t0
    d = p.X.shape[-1]
    f = spec.f_values(grid)
    y = spec.y_vec(d)
    Xc = p.X - grid.X0
    supp = (Xc * p.N).sum(-1)
    term_f = (lam - p.H - supp / t0) * f
    term_y = (Xc @ y) / t0 - lam * (p.N @ y)
    term_h = ((Xc * Xc).sum(-1) / t0 - M.n - lam * supp / t0) * spec.h / 2
    total = _fsum((term_f + term_y + term_h) * grid.weighted)
    return (4 * math.pi * t0) ** (-M.n / 2) * total


# --------------------------------------------------------------------------
# deformation and finite differences
# --------------------------------------------------------------------------
class _Deformation:
    """Evaluates the functionals along ``X + s f N`` with ``X0 + s y``, ``t0 + s h``."""

    def __init__(self, M, grid: QuadratureGrid, spec: VariationSpec, h_chart: float = 5e-3):
        self.M, self.grid, self.spec = M, grid, spec
        self.f = spec.f_values(grid)
        p = grid.points
        self.N = p.N
        self.X = p.X
        d = p.X.shape[-1]
        self.y = spec.y_vec(d)
        self.frozen_weighted = grid.weighted
        if isinstance(M, PolylineCurve):
            self.mode = "polyline"
        elif isinstance(M, CurveProduct):
            self.mode = "product"
            nc = len(M.curve)
            fv = self.f.reshape(nc, -1)
            if np.max(np.abs(fv - fv[:, :1])) > 1e-12 * max(1.0, np.abs(fv).max()):
                raise ValueError("curve-product variations must not depend on the flat coordinates")
            self.curve_f = fv[:, 0]
            self.flat_logw = grid.log_weights.reshape(nc, -1) - np.log(M.curve.dual_weights)[:, None]
        else:
            if not callable(spec.f):
                raise ValueError("analytic families need a normal speed evaluable off the nodes")
            self.mode = "chart"
            calc = ChartCalculus(M, grid.params, h_chart)
            D0 = calc.dX
            fN = np.asarray(spec.f(calc.pts))[..., None] * calc.pts.N
            D1 = calc.d1(fN)
            self.G0 = calc.metric
            self.G1 = np.einsum("mad,mbd->mab", D0, D1)
            self.G1 = self.G1 + np.transpose(self.G1, (0, 2, 1))
            self.G2 = np.einsum("mad,mbd->mab", D1, D1)
            self.det0 = np.linalg.det(self.G0)

    def log_weights(self, s: float):
        g = self.grid
        if self.mode == "chart":
            det = np.linalg.det(self.G0 + s * self.G1 + s * s * self.G2)
            return g.log_weights + 0.5 * np.log(det / self.det0)
        if self.mode == "polyline":
            moved = self.M.with_vertices(self.X + s * self.f[:, None] * self.N)
            return np.log(moved.dual_weights)
        curve = self.M.curve
        moved = curve.with_vertices(curve.vertices + s * self.curve_f[:, None] * curve.normals)
        return (np.log(moved.dual_weights)[:, None] + self.flat_logw).ravel()

    def values(self, s: float, lam: float):
        g = self.grid
        n = self.M.n
        Xs = self.X + s * self.f[:, None] * self.N
        X0s = g.X0 + s * self.y
        ts = g.t0 + s * self.spec.h
        if ts <= 0:
            raise ValueError("step makes the scale non-positive")
        lw = self.log_weights(s)
        A_moving = _fsum(np.exp(lw - ((Xs - X0s) ** 2).sum(-1) / (2 * ts)))
        A_fixed = _fsum(np.exp(lw - ((Xs - g.X0) ** 2).sum(-1) / (2 * g.t0)))
        V_fixed = _fsum(((Xs - g.X0) * self.N).sum(-1) * self.frozen_weighted)
        V_moving = _fsum(((Xs - X0s) * self.N).sum(-1) * self.frozen_weighted)
        c0 = (4 * math.pi * g.t0) ** (-n / 2)
        T = (4 * math.pi * ts) ** (-n / 2) * A_moving
        F = T + lam * c0 * math.sqrt(g.t0 / ts) * V_moving
        return {"A": A_fixed, "V": V_fixed, "J": A_fixed + lam * V_fixed, "F": F, "T": T}


def _difference(phi, eps, order):
    if order == 1:
        return (phi(eps) - phi(-eps)) / (2 * eps)
    return (phi(eps) - 2 * phi(0.0) + phi(-eps)) / eps ** 2


def numeric_variation(tag: str, M, grid: QuadratureGrid, spec: VariationSpec,
                      eps: float = 1e-4, order: int = 1, lam: Optional[float] = None,
                      rtol: float = 1e-3) -> float:
    """Central-difference derivative of a functional at ``s = 0``.

    Parameters
    ----------
    tag : one of ``A, V, F, J, T``
    eps : step
    order : 1 or 2
    rtol : the estimate is rejected (CancellationError) when the rounding
        error bound exceeds ``rtol`` times the larger of the estimate and the
        functional value.
    """
    if tag not in TAGS:
        raise ValueError(f"unknown functional tag {tag!r}")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if not eps > 0:
        raise ValueError("eps must be positive")
    lam_v = _lam_of(M, lam) if tag in ("F", "J") else 0.0
    deform = _Deformation(M, grid, spec)
    cache = {}

    def phi(s):
        if s not in cache:
            cache[s] = deform.values(s, lam_v)[tag]
        return cache[s]

    est = _difference(phi, eps, order)
    half = _difference(phi, eps / 2, order)
    scale = max(abs(phi(0.0)), abs(phi(eps)), abs(phi(-eps)))
    rounding = 8 * np.finfo(float).eps * scale * (2 / eps if order == 1 else 16 / eps ** 2)
    if rounding > rtol * max(abs(est), abs(half), scale):
        raise CancellationError(
            f"step {eps:g} too small: rounding bound {rounding:.2e} vs estimate {est:.3e}")
    return est


# --------------------------------------------------------------------------
# second variations
# --------------------------------------------------------------------------
def drift_laplacian_values(M, grid: QuadratureGrid, f) -> np.ndarray:
    """``ℒf`` at the nodes, exact for tagged speeds on origin-centred spheres."""
    if isinstance(M, Sphere) and M.centered and isinstance(f, NormalSpeed) \
            and not np.any(grid.X0):
        lap = f.sphere_laplacian(grid.points, M.n, M.r)
        if lap is not None:
            return lap      # gradient is tangent and X is normal: no drift
    if not callable(f):
        raise ValueError("drift Laplacian needs a field evaluable off the nodes")
    calc = ChartCalculus(M, grid.params)
    return calc.drift_laplacian(f, grid.X0, grid.t0)


def _check_normalization(grid):
    if np.any(grid.X0) or grid.t0 != 1.0:
        raise ValueError("second variation formulas are stated for X0 = 0, t0 = 1")


def analytic_second_variation_F(M, grid: QuadratureGrid, spec: VariationSpec,
                                lam: Optional[float] = None) -> float:
    """Second derivative of the F-functional on an origin-centred sphere.

    Returns the raw ``F''(0)`` (the ``(4 pi)^(-n/2)`` factor included).
    """
    if not isinstance(M, Sphere) or not M.centered:
        raise ValueError("second variation of F is implemented on origin-centred spheres only")
    _check_normalization(grid)
    lam = _lam_of(M, lam)
    n = M.n
    p = grid.points
    w = grid.weighted
    f = spec.f_values(grid)
    y = spec.y_vec(n + 1)
    h = spec.h
    X2 = (p.X ** 2).sum(-1)
    Xy = p.X @ y
    Ny = p.N @ y
    Lf = drift_laplacian_values(M, grid, spec.f) + (p.S + 1 - lam ** 2) * f
    integrand = (-f * Lf
                 + (-(y @ y) + Xy ** 2)
                 + (2 * Ny + (n + 1 - X2) * lam * h - 2 * h * p.H - 2 * lam * Xy) * f
                 + (lam * Ny - (n + 2) * Xy + Xy * X2) * h
                 + ((n * n + 2 * n) / 4 - (n + 2) * X2 / 2 + X2 ** 2 / 4
                    + 3 * lam * (lam - p.H) / 4) * h * h)
    return (4 * math.pi) ** (-n / 2) * _fsum(integrand * w)


def analytic_second_variation_T(M, grid: QuadratureGrid, f, lam: Optional[float] = None,
                                tol: float = 1e-8) -> float:
    """Second derivative of T along a weighted volume-preserving normal variation."""
    _check_normalization(grid)
    lam = _lam_of(M, lam)
    vals = speed_values(f, grid)
    w = grid.weighted
    if abs(_fsum(vals * w)) > tol * max(_fsum(np.abs(vals) * w), 1e-300):
        raise ValueError("normal speed is not weighted volume-preserving")
    if not np.any(vals):
        return 0.0
    p = grid.points
    Lf = drift_laplacian_values(M, grid, f) + (p.S + 1 - lam ** 2) * vals
    return (4 * math.pi) ** (-M.n / 2) * _fsum(-vals * Lf * w)


def _compact_dims(M) -> int:
    if isinstance(M, Sphere):
        return M.n + 1
    if isinstance(M, (PolylineCurve, CurveProduct)):
        return 2
    k = getattr(M, "k", None)
    return (k + 1) if k is not None else M.ambient_dim


def variation_battery(M, size: int = 10, seed: int = 0):
    """Deterministic list of ``size`` variations ``(f, y, h)`` mixing constants,
    first harmonics and zonal harmonics of degree 2 and 3.

    Normal speeds only depend on the compact factor so they are admissible on
    products with flat factors.
    """
    rng = np.random.default_rng(seed)
    d = M.ambient_dim
    c = _compact_dims(M)

    def axis():
        v = np.zeros(d)
        v[:c] = rng.normal(size=c)
        return tuple(v / np.linalg.norm(v))

    out = []
    for i in range(size):
        kind = i % 4
        if kind == 0:
            f = constant_speed(rng.uniform(-1, 1))
        elif kind == 1:
            f = first_harmonic(np.asarray(axis()) * rng.uniform(0.5, 1.5))
        else:
            f = zonal(kind, axis(), rng.uniform(0.5, 1.5)).shifted(rng.uniform(-0.5, 0.5))
        y = tuple(float(v) for v in rng.normal(scale=0.5, size=d))
        h = float(rng.normal(scale=0.5))
        out.append(VariationSpec(f, y, h))
    return out
