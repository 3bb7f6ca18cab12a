"""Weighted area, weighted volume, averaged λ, J and the F-functional."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .quadrature import QuadratureGrid, _fsum


@dataclass(frozen=True)
class FunctionalContext:
    """Gaussian centre ``X0``, scale ``t0`` and multiplier ``lam``."""

    X0: Optional[np.ndarray] = None
    t0: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")


def _grid_for(grid: QuadratureGrid, X0=None, t0=None) -> QuadratureGrid:
    """Reuse ``grid`` when the normalization matches, otherwise rebuild it."""
    d = grid.points.X.shape[-1]
    X0 = grid.X0 if X0 is None else np.asarray(X0, dtype=float)
    t0 = grid.t0 if t0 is None else float(t0)
    if np.array_equal(X0, grid.X0) and t0 == grid.t0:
        return grid
    if X0.shape != (d,):
        raise ValueError(f"X0 must lie in R^{d}")
    return grid.recentred(X0, t0)


def support_values(grid: QuadratureGrid) -> np.ndarray:
    """``<X - X0, N>`` at the nodes."""
    p = grid.points
    return ((p.X - grid.X0) * p.N).sum(-1)


def weighted_area(M, grid: QuadratureGrid) -> float:
    return _fsum(grid.weighted)


def weighted_volume(M, grid: QuadratureGrid) -> float:
    return _fsum(support_values(grid) * grid.weighted)


def mean_lambda(M, grid: QuadratureGrid) -> float:
    """Weighted average of ``<(X - X0)/t0, N> + H``."""
    vals = support_values(grid) / grid.t0 + grid.points.H
    return _fsum(vals * grid.weighted) / weighted_area(M, grid)


def j_functional(M, grid: QuadratureGrid, lam: float) -> float:
    return weighted_area(M, grid) + lam * weighted_volume(M, grid)


def f_functional(M, grid: QuadratureGrid, X0=None, t0: Optional[float] = None,
                 lam: float = 0.0) -> float:
    """``(4 pi t0)^(-n/2) (A + lam V)`` for the Gaussian centred at ``X0``."""
    g = _grid_for(grid, X0, t0)
    c = (4 * math.pi * g.t0) ** (-M.n / 2)
    return c * (weighted_area(M, g) + lam * weighted_volume(M, g))


def t_functional(M, grid: QuadratureGrid) -> float:
    return (4 * math.pi * grid.t0) ** (-M.n / 2) * weighted_area(M, grid)
