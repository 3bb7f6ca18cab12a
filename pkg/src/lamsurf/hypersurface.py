"""Hypersurface families and their pointwise geometry.

Four families are supported: round spheres, generalized cylinders
``S^k(r) x R^(n-k)``, planar polylines and products of a closed planar
curve with flat factors.  Every family can be sampled at arbitrary chart
points, which is what the finite-difference calculus in
:mod:`lamsurf.calculus` and the variation engine build on.

Orientation convention: on an origin-centred sphere the stored normal is
``N = -X/r`` so that ``H = n/r`` and ``<X, N> = -r``.  All other families
follow the same inward choice.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

MIN_CLOSED_VERTICES = 8


class GeometryError(ValueError):
    """Raised for invalid hypersurface data (bad radius, degenerate segment...)."""


# --------------------------------------------------------------------------
# point samples
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class PointSet:
    """Geometry at a batch of points.

    Arrays share a leading batch shape ``S``: ``X`` and ``N`` have shape
    ``S + (d,)`` and ``kappa`` has shape ``S + (n,)``.  ``shape_tensor`` is the
    second fundamental form written as a symmetric ambient matrix
    ``sum_i kappa_i E_i E_i^T`` over a principal frame; it is filled lazily by
    the owning family.
    """

    X: np.ndarray
    N: np.ndarray
    kappa: np.ndarray
    _tensor: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def H(self) -> np.ndarray:
        return self.kappa.sum(axis=-1)

    @property
    def S(self) -> np.ndarray:
        return (self.kappa ** 2).sum(axis=-1)

    @property
    def f3(self) -> np.ndarray:
        return (self.kappa ** 3).sum(axis=-1)

    @property
    def shape_tensor(self) -> np.ndarray:
        if self._tensor is None:
            raise GeometryError("shape tensor not available for this point set")
        return self._tensor

    @property
    def batch_shape(self):
        return self.X.shape[:-1]

    def take(self, idx) -> "PointSet":
        t = None if self._tensor is None else self._tensor[idx]
        return PointSet(self.X[idx], self.N[idx], self.kappa[idx], t)


@dataclass(frozen=True)
class GeometrySample:
    """Geometry at a single surface point."""

    X: np.ndarray
    N: np.ndarray
    H: float
    S: float
    f3: float
    principal_curvatures: tuple

    @classmethod
    def from_kappa(cls, X, N, kappa) -> "GeometrySample":
        k = np.asarray(kappa, dtype=float)
        return cls(np.asarray(X, float), np.asarray(N, float), float(k.sum()),
                   float((k ** 2).sum()), float((k ** 3).sum()), tuple(float(v) for v in k))

    def flipped(self) -> "GeometrySample":
        """Same point with the opposite normal (H, kappa and f3 change sign)."""
        return GeometrySample(self.X.copy(), -self.N, -self.H, self.S, -self.f3,
                              tuple(-v for v in self.principal_curvatures))


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------
def tangent_basis(v: np.ndarray) -> np.ndarray:
    """Orthonormal bases of the complements of unit vectors.

    ``v`` has shape ``(m, d)``; the result has shape ``(m, d-1, d)``.  Uses a
    Householder reflection so the construction is smooth away from one pole
    and never degenerate.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    m, d = v.shape
    w = v.copy()
    sgn = np.where(v[:, 0] >= 0, 1.0, -1.0)
    w[:, 0] += sgn
    refl = np.eye(d)[None] - 2.0 * w[:, :, None] * w[:, None, :] / (w * w).sum(1)[:, None, None]
    # reflection maps e_0 to -sgn*v; remaining columns span v-perp
    return np.transpose(refl[:, :, 1:], (0, 2, 1))


def _gnomonic(omega: np.ndarray, theta: np.ndarray):
    """Points on the unit sphere near ``omega`` for chart offsets ``theta``.

    omega: (m, p+1); theta: (P, p).  Returns unit vectors of shape (m, P, p+1).
    """
    E = tangent_basis(omega)                       # (m, p, p+1)
    Y = omega[:, None, :] + np.einsum("Pi,mid->mPd", theta, E)
    return Y / np.linalg.norm(Y, axis=-1, keepdims=True)


def _rot90(v: np.ndarray) -> np.ndarray:
    """Counter-clockwise quarter turn of planar vectors."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# --------------------------------------------------------------------------
# analytic families
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Sphere:
    """Round sphere ``S^n(r)`` in ``R^(n+1)``.

    Parameters are unit direction vectors in ``R^(n+1)``.
    """

    n: int
    r: float
    center: tuple = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise GeometryError(f"sphere dimension must be a positive integer, got {self.n}")
        if not np.isfinite(self.r) or self.r <= 0:
            raise GeometryError(f"sphere radius must be positive, got {self.r}")
        c = (0.0,) * (self.n + 1) if self.center is None else tuple(float(x) for x in self.center)
        if len(c) != self.n + 1:
            raise GeometryError("center must lie in R^(n+1)")
        object.__setattr__(self, "center", c)

    kind = "sphere"

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    @property
    def centered(self) -> bool:
        return not any(self.center)

    @property
    def lambda_exact(self) -> Optional[float]:
        return self.n / self.r - self.r if self.centered else None

    def describe(self) -> dict:
        return {"family": "sphere", "n": self.n, "r": float(self.r), "center": list(self.center)}

    def normalize_params(self, params) -> np.ndarray:
        w = np.atleast_2d(np.asarray(params, dtype=float))
        if w.shape[-1] != self.n + 1:
            raise GeometryError(f"sphere parameters must be directions in R^{self.n + 1}")
        return w / np.linalg.norm(w, axis=-1, keepdims=True)

    def points(self, params) -> PointSet:
        w = self.normalize_params(params)
        return self._from_unit(w)

    def chart(self, params, offsets) -> PointSet:
        w = self.normalize_params(params)
        u = _gnomonic(w, np.atleast_2d(offsets))
        return self._from_unit(u)

    def _from_unit(self, u) -> PointSet:
        X = np.asarray(self.center) + self.r * u
        kappa = np.full(u.shape[:-1] + (self.n,), 1.0 / self.r)
        d = self.n + 1
        tensor = (np.eye(d) - u[..., :, None] * u[..., None, :]) / self.r
        return PointSet(X, -u, kappa, tensor)


@dataclass(frozen=True)
class Cylinder:
    """Generalized cylinder ``S^k(r) x R^(n-k)`` in ``R^(n+1)``.

    The first ``k+1`` ambient coordinates carry the sphere factor.  For
    ``k = 0`` the family is the single hyperplane ``x_1 = r`` with normal
    ``-e_1``; the radius may then be zero (hyperplane through the origin).
    Parameters are arrays ``(omega, z)`` of length ``n+1`` with ``omega`` a
    unit vector of ``R^(k+1)`` (ignored when ``k = 0``).
    """

    n: int
    k: int
    r: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise GeometryError(f"cylinder dimension must be a positive integer, got {self.n}")
        if int(self.k) != self.k or not 0 <= self.k <= self.n:
            raise GeometryError(f"sphere factor dimension k={self.k} outside [0, {self.n}]")
        if not np.isfinite(self.r) or self.r < 0 or (self.r == 0 and self.k > 0):
            raise GeometryError(f"cylinder radius must be positive, got {self.r}")

    kind = "cylinder"

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    @property
    def flat_dim(self) -> int:
        return self.n - self.k

    @property
    def lambda_exact(self) -> float:
        if self.k == 0:
            return -self.r
        return self.k / self.r - self.r

    def describe(self) -> dict:
        return {"family": "cylinder", "n": self.n, "k": self.k, "r": float(self.r)}

    def _split(self, params):
        p = np.atleast_2d(np.asarray(params, dtype=float))
        if p.shape[-1] != self.n + 1:
            raise GeometryError(f"cylinder parameters must have length {self.n + 1}")
        w = p[:, : self.k + 1]
        if self.k > 0:
            w = w / np.linalg.norm(w, axis=-1, keepdims=True)
        else:
            w = np.ones_like(w)
        return w, p[:, self.k + 1:]

    def points(self, params) -> PointSet:
        w, z = self._split(params)
        return self._assemble(w, z)

    def chart(self, params, offsets) -> PointSet:
        w, z = self._split(params)
        th = np.atleast_2d(offsets)
        P = th.shape[0]
        if self.k > 0:
            u = _gnomonic(w, th[:, : self.k])
        else:
            u = np.ones((w.shape[0], P, 1))
        zz = z[:, None, :] + th[None, :, self.k:]
        return self._assemble(u, zz)

    def _assemble(self, u, z) -> PointSet:
        shape = u.shape[:-1]
        X = np.concatenate([self.r * u, z], axis=-1)
        N = np.concatenate([-u, np.zeros(shape + (self.flat_dim,))], axis=-1)
        kap = np.zeros(shape + (self.n,))
        d = self.n + 1
        tensor = np.zeros(shape + (d, d))
        if self.k > 0:
            kap[..., : self.k] = 1.0 / self.r
            s = self.k + 1
            tensor[..., :s, :s] = (np.eye(s) - u[..., :, None] * u[..., None, :]) / self.r
        return PointSet(X, N, kap, tensor)


# --------------------------------------------------------------------------
# polylines
# --------------------------------------------------------------------------
ESTIMATORS = ("angle", "spectral")


class PolylineCurve:
    """Planar polyline, open or closed.

    Vertex normals are the left normals of the discrete tangent, so a
    counter-clockwise closed curve has inward normals (a circle then has
    ``kappa = 1/r``).  Two curvature estimators are available:

    ``angle``
        turning angle divided by the dual (half-sum) edge length; second
        order on smooth curves.
    ``spectral``
        trigonometric interpolation of the vertices in a uniform parameter,
        closed curves only.  Intended for smooth, evenly parametrized data.

    Vertex weights are dual edge lengths (``angle``) or interpolant speed
    times parameter spacing (``spectral``).
    """

    kind = "polyline"
    n = 1
    ambient_dim = 2

    def __init__(self, vertices, closed: bool = True, estimator: str = "angle",
                 lam: Optional[float] = None):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError("polyline vertices must have shape (m, 2)")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polyline vertices must be finite")
        if estimator not in ESTIMATORS:
            raise GeometryError(f"unknown curvature estimator {estimator!r}")
        m = v.shape[0]
        if closed and m < MIN_CLOSED_VERTICES:
            raise GeometryError(f"closed polyline needs at least {MIN_CLOSED_VERTICES} vertices, got {m}")
        if not closed and m < 3:
            raise GeometryError("open polyline needs at least 3 vertices")
        if estimator == "spectral" and not closed:
            raise GeometryError("spectral estimator requires a closed curve")
        seg = np.diff(np.vstack([v, v[:1]]) if closed else v, axis=0)
        lens = np.linalg.norm(seg, axis=1)
        bad = np.flatnonzero(lens == 0)
        if bad.size:
            i = int(bad[0])
            raise GeometryError(f"degenerate segment between vertices {i} and {(i + 1) % m}")
        v.setflags(write=False)
        self.vertices = v
        self.closed = bool(closed)
        self.estimator = estimator
        self.lam = None if lam is None else float(lam)

    def __repr__(self):
        return (f"PolylineCurve(m={len(self)}, closed={self.closed}, "
                f"estimator={self.estimator!r})")

    def __len__(self):
        return self.vertices.shape[0]

    @property
    def lambda_exact(self):
        return self.lam

    def describe(self) -> dict:
        return {"family": "polyline", "vertices": len(self), "closed": self.closed,
                "estimator": self.estimator}

    def with_vertices(self, vertices) -> "PolylineCurve":
        return PolylineCurve(vertices, self.closed, self.estimator, self.lam)

    def reversed(self) -> "PolylineCurve":
        v = self.vertices[::-1]
        if self.closed:
            v = np.roll(v, 1, axis=0)   # keep vertex 0 in place
        return PolylineCurve(v, self.closed, self.estimator, self.lam)

    @cached_property
    def segment_lengths(self) -> np.ndarray:
        v = self.vertices
        seg = np.diff(np.vstack([v, v[:1]]) if self.closed else v, axis=0)
        return np.linalg.norm(seg, axis=1)

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())

    # discrete geometry ---------------------------------------------------
    @cached_property
    def _discrete(self):
        if self.estimator == "spectral":
            return self._spectral_geometry()
        return self._angle_geometry()

    def _angle_geometry(self):
        v = self.vertices
        if self.closed:
            e_prev = v - np.roll(v, 1, axis=0)
            e_next = np.roll(v, -1, axis=0) - v
        else:
            e = np.diff(v, axis=0)
            e_prev = np.vstack([e[:1], e])
            e_next = np.vstack([e, e[-1:]])
        lp = np.linalg.norm(e_prev, axis=1)
        ln = np.linalg.norm(e_next, axis=1)
        tp = e_prev / lp[:, None]
        tn = e_next / ln[:, None]
        cross = tp[:, 0] * tn[:, 1] - tp[:, 1] * tn[:, 0]
        dot = (tp * tn).sum(1)
        turn = np.arctan2(cross, dot)
        dual = 0.5 * (lp + ln)
        kappa = turn / dual
        tang = tp + tn
        tang /= np.linalg.norm(tang, axis=1, keepdims=True)
        weights = dual.copy()
        if not self.closed:
            kappa[0], kappa[-1] = kappa[1], kappa[-2]
            weights[0], weights[-1] = 0.5 * ln[0], 0.5 * lp[-1]
        N = _rot90(tang)
        return N, kappa, weights, tang

    @cached_property
    def _fourier(self):
        return np.fft.rfft(self.vertices, axis=0)

    def _spectral_eval(self, shift):
        """Interpolant and its first two derivatives at every vertex parameter
        shifted by each entry of ``shift`` (shape (P,)).  Returns arrays of
        shape (m, P, 2)."""
        m = len(self)
        c = self._fourier                                   # (m//2+1, 2)
        k = np.arange(c.shape[0])
        phase = np.exp(1j * np.outer(shift, k))            # (P, K)
        ck = c[None] * phase[:, :, None]                    # (P, K, 2)
        d1 = ck * (1j * k)[None, :, None]
        d2 = ck * (-(k ** 2.0))[None, :, None]
        if m % 2 == 0:
            d1[:, -1] = 0.0
        out = [np.fft.irfft(a, n=m, axis=1) for a in (ck, d1, d2)]
        return [np.transpose(a, (1, 0, 2)) for a in out]

    def _spectral_geometry(self):
        m = len(self)
        _, d1, d2 = (a[:, 0] for a in self._spectral_eval(np.zeros(1)))
        speed = np.linalg.norm(d1, axis=1)
        kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3
        tang = d1 / speed[:, None]
        weights = speed * (2 * np.pi / m)
        return _rot90(tang), kappa, weights, tang

    @property
    def normals(self) -> np.ndarray:
        return self._discrete[0]

    @property
    def curvature(self) -> np.ndarray:
        return self._discrete[1]

    @property
    def dual_weights(self) -> np.ndarray:
        return self._discrete[2]

    @property
    def tangents(self) -> np.ndarray:
        return self._discrete[3]

    def points(self, params) -> PointSet:
        idx = np.rint(np.ravel(np.asarray(params, dtype=float))).astype(int)
        if idx.min() < 0 or idx.max() >= len(self):
            raise GeometryError(f"vertex index out of range for {len(self)} vertices")
        N, kap, _, T = self._discrete
        tensor = kap[idx, None, None] * T[idx, :, None] * T[idx, None, :]
        return PointSet(self.vertices[idx], N[idx], kap[idx, None], tensor)

    def chart(self, params, offsets) -> PointSet:
        """Trigonometric-interpolant chart around vertices (closed curves only).

        Offsets are shifts of the uniform parameter in ``[0, 2*pi)``.
        """
        if not self.closed:
            raise GeometryError("chart derivatives need a closed curve")
        idx = np.rint(np.ravel(np.asarray(params, dtype=float))).astype(int)
        th = np.atleast_2d(offsets)[:, 0]
        X, d1, d2 = (a[idx] for a in self._spectral_eval(th))
        speed = np.linalg.norm(d1, axis=-1)
        T = d1 / speed[..., None]
        kap = (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / speed ** 3
        tensor = kap[..., None, None] * T[..., :, None] * T[..., None, :]
        return PointSet(X, _rot90(T), kap[..., None], tensor)

    def self_intersections(self, limit: int = 1):
        """Pairs of non-adjacent segments that intersect (O(m^2) sweep)."""
        v = self.vertices
        m = len(v)
        nseg = m if self.closed else m - 1
        a = v[:nseg]
        b = np.roll(v, -1, axis=0)[:nseg] if self.closed else v[1:]
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        d = b - a
        found = []
        for i in range(nseg):
            j = np.arange(i + 2, nseg)
            if self.closed and i == 0:
                j = j[j != nseg - 1]
            if j.size == 0:
                continue
            box = np.all((lo[j] <= hi[i]) & (hi[j] >= lo[i]), axis=1)
            j = j[box]
            if j.size == 0:
                continue
            c1 = _cross(d[i], a[j] - a[i])
            c2 = _cross(d[i], b[j] - a[i])
            c3 = _cross(d[j], a[i] - a[j])
            c4 = _cross(d[j], b[i] - a[j])
            hit = (c1 * c2 <= 0) & (c3 * c4 <= 0)
            for jj in j[hit]:
                found.append((i, int(jj)))
                if len(found) >= limit:
                    return found
        return found

    def is_embedded(self) -> bool:
        return not self.self_intersections()


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass(frozen=True, eq=False)
class CurveProduct:
    """Product ``curve x R^m`` in ``R^(2+m)``.

    Parameters are arrays ``(vertex index, z_1..z_m)``.
    """

    curve: PolylineCurve
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise GeometryError("flat dimension must be a positive integer")
        if not self.curve.closed:
            raise GeometryError("curve product needs a closed curve")

    kind = "curve_product"

    @property
    def n(self) -> int:
        return 1 + self.m

    @property
    def ambient_dim(self) -> int:
        return 2 + self.m

    @property
    def lambda_exact(self):
        return self.curve.lam

    def describe(self) -> dict:
        return {"family": "curve_product", "m": self.m, "curve": self.curve.describe()}

    def _split(self, params):
        p = np.atleast_2d(np.asarray(params, dtype=float))
        idx = np.rint(p[:, 0]).astype(int)
        return idx, p[:, 1:]

    def _lift(self, base: PointSet, z) -> PointSet:
        shape = base.X.shape[:-1]
        X = np.concatenate([base.X, z], axis=-1)
        N = np.concatenate([base.N, np.zeros(shape + (self.m,))], axis=-1)
        kap = np.concatenate([base.kappa, np.zeros(shape + (self.m,))], axis=-1)
        d = self.ambient_dim
        tensor = np.zeros(shape + (d, d))
        tensor[..., :2, :2] = base.shape_tensor
        return PointSet(X, N, kap, tensor)

    def points(self, params) -> PointSet:
        idx, z = self._split(params)
        return self._lift(self.curve.points(idx), z)

    def chart(self, params, offsets) -> PointSet:
        idx, z = self._split(params)
        th = np.atleast_2d(offsets)
        base = self.curve.chart(idx, th[:, :1])
        zz = z[:, None, :] + th[None, :, 1:]
        return self._lift(base, zz)


Hypersurface = (Sphere, Cylinder, PolylineCurve, CurveProduct)


# --------------------------------------------------------------------------
# public constructors and evaluation
# --------------------------------------------------------------------------
def make_sphere(n: int, r: float, center=None) -> Sphere:
    return Sphere(n, float(r), None if center is None else tuple(center))


def make_cylinder(n: int, k: int, r: float) -> Cylinder:
    return Cylinder(n, k, float(r))


def product_surface(curve: PolylineCurve, m: int) -> CurveProduct:
    return CurveProduct(curve, m)


def evaluate_geometry(M, p) -> GeometrySample:
    """Geometry of ``M`` at one parameter (direction, ``(omega, z)`` array,
    vertex index or ``(index, z)`` array)."""
    if isinstance(M, PolylineCurve):
        idx = int(p)
        if not 0 <= idx < len(M):
            raise GeometryError(f"vertex index {idx} out of range")
        pts = M.points([idx])
    else:
        pts = M.points(np.asarray(p, dtype=float)[None])
    return GeometrySample.from_kappa(pts.X[0], pts.N[0], pts.kappa[0])


def lambda_residual(M, grid, X0=None, t0: float = 1.0, lam: Optional[float] = None):
    """Residual field ``<(X-X0)/t0, N> + H - lam`` on grid nodes and its sup norm."""
    pts = grid.points
    d = pts.X.shape[-1]
    X0 = np.zeros(d) if X0 is None else np.asarray(X0, dtype=float)
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    if lam is None:
        lam = M.lambda_exact
        if lam is None:
            raise ValueError("lam required for a family without an exact value")
    res = ((pts.X - X0) * pts.N).sum(-1) / t0 + pts.H - lam
    return res, float(np.max(np.abs(res)))


def regular_polygon(m: int, r: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> PolylineCurve:
    t = phase + 2 * np.pi * np.arange(m) / m
    return PolylineCurve(np.c_[center[0] + r * np.cos(t), center[1] + r * np.sin(t)], closed=True)


def ellipse(m: int, a: float, b: float, estimator: str = "angle") -> PolylineCurve:
    t = 2 * np.pi * np.arange(m) / m
    return PolylineCurve(np.c_[a * np.cos(t), b * np.sin(t)], closed=True, estimator=estimator)
