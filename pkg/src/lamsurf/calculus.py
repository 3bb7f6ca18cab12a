"""Intrinsic calculus on hypersurfaces by finite differences in local charts.

Every family exposes ``chart(params, offsets)`` giving exact geometry at
points displaced from a node by chart coordinates.  From that, eighth-order
central differences produce the metric, Christoffel symbols, gradients,
Laplacians and the covariant derivative of the second fundamental form.
Nothing here uses the λ-hypersurface equation, so it serves as an
independent oracle for the closed-form identities.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .hypersurface import PointSet

# eighth-order central stencils, offsets 1..4
_D1 = np.array([4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([8 / 5, -1 / 5, 8 / 315, -1 / 560])
_D2_CENTER = -205 / 72
_STEPS = np.arange(1, 5)


def _offsets(p: int, h: float):
    """Stencil offsets: centre, axial +-k h e_i, and mixed (a h e_i + b h e_j)."""
    rows = [np.zeros(p)]
    axial = {}
    for i in range(p):
        for s in (1, -1):
            for k in _STEPS:
                v = np.zeros(p)
                v[i] = s * k * h
                axial[(i, s * k)] = len(rows)
                rows.append(v)
    mixed = {}
    for i in range(p):
        for j in range(i + 1, p):
            for a in (*_STEPS, *(-_STEPS)):
                for b in (*_STEPS, *(-_STEPS)):
                    v = np.zeros(p)
                    v[i], v[j] = a * h, b * h
                    mixed[(i, j, int(a), int(b))] = len(rows)
                    rows.append(v)
    return np.array(rows), axial, mixed


class ChartCalculus:
    """Finite-difference calculus at a batch of nodes.

    Parameters
    ----------
    surface : hypersurface family with a ``chart`` method
    params : node parameters, shape (m, ...)
    h : chart step
    """

    def __init__(self, surface, params, h: float = 5e-3):
        self.surface = surface
        self.n = surface.n
        self.h = h
        self.offsets, self._axial, self._mixed = _offsets(self.n, h)
        self.pts: PointSet = surface.chart(params, self.offsets)
        self.m = self.pts.X.shape[0]

    # generic stencils ----------------------------------------------------
    def d1(self, values: np.ndarray) -> np.ndarray:
        """First derivatives; ``values`` has shape (m, P, ...).  Returns (m, n, ...)."""
        out = []
        for i in range(self.n):
            acc = 0.0
            for c, k in zip(_D1, _STEPS):
                acc = acc + c * (values[:, self._axial[(i, k)]] - values[:, self._axial[(i, -k)]])
            out.append(acc / self.h)
        return np.stack(out, axis=1)

    def d2(self, values: np.ndarray) -> np.ndarray:
        """Second derivatives, shape (m, n, n, ...)."""
        n, h = self.n, self.h
        tail = values.shape[2:]
        out = np.zeros((self.m, n, n) + tail)
        for i in range(n):
            acc = _D2_CENTER * values[:, 0]
            for c, k in zip(_D2, _STEPS):
                acc = acc + c * (values[:, self._axial[(i, k)]] + values[:, self._axial[(i, -k)]])
            out[:, i, i] = acc / h ** 2
            for j in range(i + 1, n):
                acc = 0.0
                for ca, a in zip(_D1, _STEPS):
                    for cb, b in zip(_D1, _STEPS):
                        f = self._mixed
                        acc = acc + ca * cb * (values[:, f[(i, j, a, b)]] - values[:, f[(i, j, a, -b)]]
                                               - values[:, f[(i, j, -a, b)]] + values[:, f[(i, j, -a, -b)]])
                out[:, i, j] = out[:, j, i] = acc / h ** 2
        return out

    # geometry ------------------------------------------------------------
    @property
    def center(self) -> PointSet:
        return self.pts.take((slice(None), 0))

    @cached_property
    def dX(self):
        return self.d1(self.pts.X)                       # (m, n, d)

    @cached_property
    def ddX(self):
        return self.d2(self.pts.X)                       # (m, n, n, d)

    @cached_property
    def metric(self):
        return np.einsum("mad,mbd->mab", self.dX, self.dX)

    @cached_property
    def inverse_metric(self):
        return np.linalg.inv(self.metric)

    @cached_property
    def second_form(self):
        """Coefficients ``<d_ij X, N>`` of the second fundamental form."""
        return np.einsum("mabd,md->mab", self.ddX, self.center.N)

    @cached_property
    def christoffel(self):
        low = np.einsum("mabd,mld->mabl", self.ddX, self.dX)
        return np.einsum("mkl,mabl->mkab", self.inverse_metric, low)

    @cached_property
    def principal_curvatures(self):
        """Eigenvalues of the shape operator from chart derivatives (ascending)."""
        g = self.metric
        w, V = np.linalg.eigh(g)
        isq = V @ (w[:, :, None] ** -0.5 * np.transpose(V, (0, 2, 1)))
        return np.linalg.eigvalsh(isq @ self.second_form @ isq)

    # scalar fields -------------------------------------------------------
    def sample(self, field) -> np.ndarray:
        return np.asarray(field(self.pts), dtype=float)

    def gradient_coeffs(self, values):
        return self.d1(values)

    def gradient(self, field):
        """Ambient gradient vector (m, d) of a field callable on PointSet."""
        du = self.d1(self.sample(field))
        return np.einsum("mab,mb,mad->md", self.inverse_metric, du, self.dX)

    def grad_dot(self, u, v):
        du = self.d1(self.sample(u))
        dv = self.d1(self.sample(v))
        return np.einsum("mab,ma,mb->m", self.inverse_metric, du, dv)

    def laplacian(self, field, values=None):
        vals = self.sample(field) if values is None else values
        du = self.d1(vals)
        ddu = self.d2(vals)
        hess = ddu - np.einsum("mkab,mk->mab", self.christoffel, du)
        return np.einsum("mab,mab->m", self.inverse_metric, hess)

    def drift_laplacian(self, field, X0=None, t0: float = 1.0, values=None):
        """``Δu - <(X-X0)/t0, ∇u>`` at the nodes."""
        vals = self.sample(field) if values is None else values
        du = self.d1(vals)
        grad = np.einsum("mab,mb,mad->md", self.inverse_metric, du, self.dX)
        X = self.center.X
        if X0 is not None:
            X = X - np.asarray(X0, dtype=float)
        return self.laplacian(None, values=vals) - (X * grad).sum(-1) / t0

    # third order data ----------------------------------------------------
    @cached_property
    def principal_frame(self):
        """Principal directions (m, n, d) and curvatures (m, n) from the shape tensor."""
        B = self.center.shape_tensor
        N = self.center.N
        w, V = np.linalg.eigh(B)                          # columns are eigenvectors
        V = np.transpose(V, (0, 2, 1))                   # (m, d, d) rows
        normal_overlap = np.abs(np.einsum("mkd,md->mk", V, N))
        drop = np.argmax(normal_overlap, axis=1)
        keep = np.ones(V.shape[:2], dtype=bool)
        keep[np.arange(self.m), drop] = False
        E = V[keep].reshape(self.m, self.n, -1)
        kap = w[keep].reshape(self.m, self.n)
        return E, kap

    @cached_property
    def covariant_second_form(self):
        """``h_ijk = <(D_{E_k} B) E_i, E_j>`` in the principal frame, shape (m, n, n, n)."""
        dB = self.d1(self.pts.shape_tensor)               # (m, n_chart, d, d)
        E, _ = self.principal_frame
        coef = np.einsum("mab,mbd,mkd->mka", self.inverse_metric, self.dX, E)
        DB = np.einsum("mka,madf->mkdf", coef, dB)       # derivative along E_k
        return np.einsum("mid,mkdf,mjf->mijk", E, DB, E)
