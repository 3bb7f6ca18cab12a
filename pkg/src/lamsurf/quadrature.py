"""Gaussian-weighted quadrature grids on the hypersurface families.

Sphere factors use a trapezoid rule in the azimuth and Gauss-Jacobi rules in
the cosines of the polar angles (the Jacobi weight absorbs the ``sin^p``
area factor, which makes the rule exact on polynomials of the embedding
coordinates).  Flat factors use Gauss-Hermite nodes centred at the Gaussian
centre; polylines use their vertex (dual-length) weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc, roots_hermite, roots_jacobi

from .hypersurface import CurveProduct, Cylinder, PointSet, PolylineCurve, Sphere

MIN_RESOLUTION = 8
TAIL_BOUND = 1e-12


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes, plain area weights and the Gaussian normalization on a surface.

    ``weights`` are plain ``dμ`` weights; ``weighted`` already includes the
    factor ``exp(-|X - X0|^2 / (2 t0))`` and is assembled in log space so
    the large Gauss-Hermite plain weights never lose precision.
    """

    surface: object
    params: np.ndarray
    points: PointSet
    log_weights: np.ndarray
    X0: np.ndarray
    t0: float
    resolution: int
    truncation: Optional[float] = None

    @property
    def size(self) -> int:
        return self.log_weights.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def gaussian(self) -> np.ndarray:
        r2 = ((self.points.X - self.X0) ** 2).sum(-1)
        return np.exp(-r2 / (2 * self.t0))

    @property
    def weighted(self) -> np.ndarray:
        r2 = ((self.points.X - self.X0) ** 2).sum(-1)
        return np.exp(self.log_weights - r2 / (2 * self.t0))

    def integrate(self, field, use_gaussian: bool = True) -> float:
        return integrate(self, field, use_gaussian)

    def recentred(self, X0=None, t0: float = 1.0) -> "QuadratureGrid":
        """Grid on the same surface with another Gaussian centre and scale."""
        return build_grid(self.surface, self.resolution, X0, t0)


def _fsum(values: np.ndarray) -> float:
    return math.fsum(np.ravel(values).tolist())


def integrate(grid: QuadratureGrid, field, use_gaussian: bool = True) -> float:
    """Sum of ``field * weight`` (times the Gaussian factor when flagged).

    Uses exactly rounded summation so the result is independent of node order.
    """
    f = np.asarray(field, dtype=float)
    if f.shape[:1] != (grid.size,):
        raise ValueError(f"field has {f.shape[:1]} entries, grid has {grid.size} nodes")
    w = grid.weighted if use_gaussian else grid.weights
    return _fsum(f * w)


# --------------------------------------------------------------------------
# one-dimensional rules
# --------------------------------------------------------------------------
def hermite_order(resolution: int) -> int:
    return int(min(max(resolution // 2, 20), 80))


def _hermite(q: int, center: float, t0: float):
    x, w = roots_hermite(q)
    tail = erfc(x.max())
    if tail > TAIL_BOUND:
        raise ValueError(f"Gauss-Hermite order {q} leaves Gaussian tail {tail:.2e}")
    s = math.sqrt(2 * t0)
    return center + s * x, np.log(s * w) + x ** 2


def _sphere_rule(p: int, resolution: int):
    """Unit directions and log weights on S^p."""
    M = max(resolution, MIN_RESOLUTION)
    phi = 2 * np.pi * (np.arange(M) + 0.5) / M
    dirs = np.c_[np.cos(phi), np.sin(phi)]
    logw = np.full(M, math.log(2 * np.pi / M))
    q = max(resolution // 2, 4)
    for j in range(p - 1):
        # polar angle carrying sin^(j+1); cos of it is Gauss-Jacobi distributed
        a = j / 2
        t, w = roots_jacobi(q, a, a)
        s = np.sqrt(1 - t ** 2)
        dirs = np.concatenate([np.repeat(t[:, None], len(dirs), 0),
                               (s[:, None, None] * dirs[None]).reshape(-1, dirs.shape[1])], axis=1)
        logw = (np.log(w)[:, None] + logw[None]).ravel()
    return dirs, logw


def _flat_rule(dim: int, q: int, center, t0):
    if dim == 0:
        return np.zeros((1, 0)), np.zeros(1)
    nodes, logw = [], []
    for c in center:
        z, lw = _hermite(q, c, t0)
        nodes.append(z)
        logw.append(lw)
    Z = np.stack(np.meshgrid(*nodes, indexing="ij"), -1).reshape(-1, dim)
    L = sum(np.meshgrid(*logw, indexing="ij")).ravel()
    return Z, L


def _product(a_nodes, a_logw, b_nodes, b_logw):
    A = np.repeat(a_nodes, len(b_nodes), axis=0)
    B = np.tile(b_nodes, (len(a_nodes), 1))
    return np.concatenate([A, B], axis=1), (a_logw[:, None] + b_logw[None]).ravel()


# --------------------------------------------------------------------------
def build_grid(M, resolution: int = 32, X0=None, t0: float = 1.0) -> QuadratureGrid:
    """Quadrature grid on ``M`` for the Gaussian centred at ``X0`` with scale ``t0``."""
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    d = M.ambient_dim
    X0 = np.zeros(d) if X0 is None else np.asarray(X0, dtype=float)
    if X0.shape != (d,):
        raise ValueError(f"X0 must lie in R^{d}")
    q = hermite_order(resolution)
    trunc = None
    if isinstance(M, Sphere):
        dirs, logw = _sphere_rule(M.n, resolution)
        params, logw = dirs, logw + M.n * math.log(M.r)
    elif isinstance(M, Cylinder):
        flat, flogw = _flat_rule(M.flat_dim, q, X0[M.k + 1:], t0)
        if M.k > 0:
            dirs, logw = _sphere_rule(M.k, resolution)
            params, logw = _product(dirs, logw + M.k * math.log(M.r), flat, flogw)
        else:
            params, logw = _product(np.ones((1, 1)), np.zeros(1), flat, flogw)
        trunc = float(np.abs(flat - X0[M.k + 1:]).max())
    elif isinstance(M, PolylineCurve):
        params = np.arange(len(M), dtype=float)[:, None]
        logw = np.log(M.dual_weights)
    elif isinstance(M, CurveProduct):
        flat, flogw = _flat_rule(M.m, q, X0[2:], t0)
        base = np.arange(len(M.curve), dtype=float)[:, None]
        params, logw = _product(base, np.log(M.curve.dual_weights), flat, flogw)
        trunc = float(np.abs(flat - X0[2:]).max())
    else:
        raise TypeError(f"unsupported hypersurface {type(M).__name__}")
    if isinstance(M, PolylineCurve):
        pts = M.points(params[:, 0].astype(int))
    else:
        pts = M.points(params)
    return QuadratureGrid(M, params, pts, logw, X0, float(t0), int(resolution), trunc)


def integration_by_parts_check(grid: QuadratureGrid, u, v, h: float = 5e-3) -> float:
    """``|∫ u (ℒ v) w dμ + ∫ <∇u, ∇v> w dμ|`` with the drift operator of the grid's Gaussian.

    ``u`` and ``v`` must be callables on :class:`PointSet` so that chart
    derivatives can be taken; plain node arrays are rejected.
    """
    from .calculus import ChartCalculus

    if not (callable(u) and callable(v)):
        raise TypeError("integration by parts needs fields evaluable off the nodes (callables)")
    calc = ChartCalculus(grid.surface, grid.params, h)
    uu = calc.sample(u)[:, 0]
    Lv = calc.drift_laplacian(v, grid.X0, grid.t0)
    gg = calc.grad_dot(u, v)
    return abs(_fsum(uu * Lv * grid.weighted) + _fsum(gg * grid.weighted))
