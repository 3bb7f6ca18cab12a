"""F-stability and weak stability of round spheres.

The second variation on ``S^n(r)`` splits over spherical harmonics: degree
``k >= 2`` parts, the constant ``a`` coupled to the scale velocity ``h``, and
the first harmonic ``<z, N>`` coupled to the centre velocity ``y``.  The
closed-form evaluation below uses the spectrum ``mu_k = (k^2 + (n-1)k)/r^2``
and the moments ``∫<N,u><N,v> dμ = <u,v>|S^n(r)|/(n+1)``; the quadrature path
through :mod:`lamsurf.variation` is used to certify witnesses independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import comb, gammaln

from .hypersurface import make_sphere
from .quadrature import build_grid
from .variation import (VariationSpec, analytic_second_variation_F,
                        analytic_second_variation_T, first_harmonic)

WITNESS_RESOLUTION = 16


def sphere_lambda(n: int, r: float) -> float:
    return n / r - r


def sphere_area(n: int, r: float) -> float:
    return math.exp(math.log(2.0) + (n + 1) / 2 * math.log(math.pi) - gammaln((n + 1) / 2)) * r ** n


def thresholds(n: int) -> Dict[str, float]:
    s = math.sqrt(1 + 4 * n)
    return {"f_lower": math.sqrt(n), "f_upper": math.sqrt(n + 1),
            "weak_lower": (-1 + s) / 2, "weak_upper": (1 + s) / 2}


@dataclass(frozen=True)
class SpectrumEntry:
    k: int
    mu: float
    multiplicity: int
    note: str = ""


def harmonic_multiplicity(n: int, k: int) -> int:
    """Dimension of degree-k spherical harmonics on S^n."""
    a = comb(n + k, k, exact=True)
    b = comb(n + k - 2, k - 2, exact=True) if k >= 2 else 0
    return int(a - b)


def sphere_spectrum(n: int, r: float, k_max: int) -> List[SpectrumEntry]:
    """Laplacian eigenvalues ``mu_k`` (as positive numbers) on S^n(r)."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    out = []
    for k in range(k_max + 1):
        note = {0: "constants", 1: "first harmonics <z,N>"}.get(k, f"degree-{k} harmonics")
        out.append(SpectrumEntry(k, (k * k + (n - 1) * k) / r ** 2, harmonic_multiplicity(n, k), note))
    return out


# --------------------------------------------------------------------------
# closed-form quadratic form
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Decomposition:
    """``f = f0 + a + <z, N>`` with ``f0_norms[k] = ∫ f0_k^2 e^{-|X|^2/2} dμ``."""

    a: float = 0.0
    z: tuple = ()
    f0_norms: Dict[int, float] = field(default_factory=dict)


def _z_vec(n, z):
    v = np.zeros(n + 1)
    z = np.asarray(z, dtype=float)
    v[: z.size] = z
    return v


def f_stability_form(n: int, r: float, decomposition: Decomposition, y=None, h: float = 0.0) -> float:
    """Exact ``F''(0)`` on S^n(r) for ``f = f0 + a + <z,N>`` and centre/scale
    velocities ``(y, h)``; no quadrature."""
    lam = sphere_lambda(n, r)
    W = sphere_area(n, r) * math.exp(-r * r / 2)
    S = n / r ** 2
    z = _z_vec(n, decomposition.z)
    y = np.zeros(n + 1) if y is None else _z_vec(n, y)
    a = decomposition.a
    Z = lambda u, v: float(u @ v) * W / (n + 1)
    total = 0.0
    for k, norm in decomposition.f0_norms.items():
        if k < 2:
            raise ValueError("f0 collects harmonic degrees >= 2")
        total += ((k * k + (n - 1) * k) / r ** 2 - S - 1 + lam ** 2) * norm
    total += -(S + 1 - lam ** 2) * a * a * W + (lam ** 2 - 1) * Z(z, z)
    total += -float(y @ y) * W + r * r * Z(y, y)
    total += (2 + 2 * lam * r) * Z(y, z) + ((n + 1 - r * r) * lam - 2 * n / r) * h * a * W
    total += h * h * W * ((n * n + 2 * n) / 4 - (n + 2) * r * r / 2 + r ** 4 / 4 - 3 * lam * r / 4)
    return (4 * math.pi) ** (-n / 2) * total


def ah_block_coefficient(n: int, r: float) -> float:
    """``r^4 - (2n+1) r^2 + n(n-1)``: the (a, h) block equals this times ``(a/r + h/2)^2 W``."""
    return r ** 4 - (2 * n + 1) * r * r + n * (n - 1)


def z_block_coefficient(n: int, r: float, k: float) -> float:
    """Coefficient of ``∫<z,N>^2 w`` for ``y = k z``: ``lam^2 + lam r - (1 + lam r)(1 - k)^2``."""
    lam = sphere_lambda(n, r)
    return lam * lam + lam * r - (1 + lam * r) * (1 - k) ** 2


def harmonic_coefficient(n: int, r: float, k: int) -> float:
    """``mu_k - S - 1 + lam^2`` for degree ``k`` (positive for every k >= 2)."""
    lam = sphere_lambda(n, r)
    return (k * k + (n - 1) * k) / r ** 2 - n / r ** 2 - 1 + lam * lam


# --------------------------------------------------------------------------
# verdicts
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Witness:
    f: object
    y: tuple
    h: float
    value: float
    closed_form: float


@dataclass(frozen=True)
class Verdict:
    stable: bool
    witness: Optional[Witness] = None
    certificate: Optional[dict] = None


@dataclass(frozen=True)
class StabilityReport:
    n: int
    r: float
    lam: float
    thresholds: Dict[str, float]
    f_stable: bool
    weak_stable: bool
    f_witness: Optional[Witness]
    weak_witness: Optional[Witness]

    @property
    def witness_value(self) -> Optional[float]:
        if self.f_witness is not None:
            return self.f_witness.value
        if self.weak_witness is not None:
            return self.weak_witness.value
        return None

    def row(self) -> dict:
        wv = self.witness_value
        return {"n": self.n, "r": self.r, "lambda": self.lam, "f_stable": self.f_stable,
                "weak_stable": self.weak_stable, "witness_value": "" if wv is None else wv}


def quadratic_sup(form, dim: int, rtol: float = 1e-9):
    """Supremum of a quadratic function of ``dim`` variables given as a callable.

    The form is recovered by polarization.  Returns ``(sup, argmax)``;
    ``sup`` is ``inf`` when the form is unbounded above.
    """
    c = form(np.zeros(dim))
    E = np.eye(dim)
    plus = np.array([form(E[i]) for i in range(dim)])
    minus = np.array([form(-E[i]) for i in range(dim)])
    b = (plus - minus) / 2
    A = np.diag((plus + minus) / 2 - c)
    for i in range(dim):
        for j in range(i + 1, dim):
            A[i, j] = A[j, i] = (form(E[i] + E[j]) - c - b[i] - b[j] - A[i, i] - A[j, j]) / 2
    w, V = np.linalg.eigh(A)
    scale = max(np.abs(w).max(), np.abs(b).max(), abs(c), 1e-300)
    bt = V.T @ b
    v = np.zeros(dim)
    sup = c
    for ev, bi, col in zip(w, bt, V.T):
        if ev > rtol * scale:
            return math.inf, None
        if abs(ev) <= rtol * scale:
            if abs(bi) > rtol * scale:
                return math.inf, None
            continue
        t = -bi / (2 * ev)
        v += t * col
        sup += bi * t + ev * t * t
    return float(sup), v


def _witness_grid(n, r):
    return build_grid(make_sphere(n, r), WITNESS_RESOLUTION)


def f_stability_verdict(n: int, r: float, certify: bool = True) -> Verdict:
    """F-stability of S^n(r): stable iff ``r <= sqrt(n)`` or ``r > sqrt(n+1)``.

    Unstable spheres carry the witness ``f = <e_1, N>`` together with the best
    possible ``(y, h)``; its value is the supremum of ``F''(0)`` over ``(y, h)``
    computed from the quadrature form and is strictly negative.  Stable spheres
    carry the proof's parameter choice ``y = k z``, ``h = -2a/r``.
    """
    if n < 1 or not r > 0:
        raise ValueError("need n >= 1 and r > 0")
    lam = sphere_lambda(n, r)
    th = thresholds(n)
    stable = r <= th["f_lower"] or r > th["f_upper"]
    if stable:
        if lam >= 0:
            k, case = 1.0, "lam >= 0: y = z"
        elif lam <= -1:
            k, case = 2.0, "lam <= -1: y = 2z"
        else:
            # clamp: lam rounds to a tiny negative value at r = sqrt(n)
            k = 1.0 + math.sqrt(max(lam * (lam + r) / (1 + lam * r), 0.0))
            case = "-1 < lam < 0: y = kz"
        cert = {"case": case, "k": k, "h_rule": "h = -2a/r",
                "z_block": z_block_coefficient(n, r, k),
                "min_harmonic_coefficient": harmonic_coefficient(n, r, 2)}
        return Verdict(True, None, cert)
    W = sphere_area(n, r) * math.exp(-r * r / 2)
    closed = (4 * math.pi) ** (-n / 2) * lam * (lam + r) * W / (n + 1)
    z = np.zeros(n + 1)
    z[0] = 1.0
    f = first_harmonic(z)
    if not certify:
        return Verdict(False, Witness(f, tuple(z), 0.0, closed, closed))
    M = make_sphere(n, r)
    grid = _witness_grid(n, r)

    def form(v):
        return analytic_second_variation_F(M, grid, VariationSpec(f, tuple(v[:-1]), float(v[-1])))

    sup, arg = quadratic_sup(form, n + 2)
    if arg is None:
        arg = np.zeros(n + 2)
    return Verdict(False, Witness(f, tuple(float(t) for t in arg[:-1]), float(arg[-1]), sup, closed))


def weak_stability_verdict(n: int, r: float, certify: bool = True) -> Verdict:
    """Weak stability of S^n(r): stable iff ``|lam| >= 1`` (both thresholds inclusive)."""
    if n < 1 or not r > 0:
        raise ValueError("need n >= 1 and r > 0")
    lam = sphere_lambda(n, r)
    th = thresholds(n)
    stable = r <= th["weak_lower"] or r >= th["weak_upper"]
    if stable:
        return Verdict(True, None, {"floor": weak_stability_operator_floor(n, r)})
    W = sphere_area(n, r) * math.exp(-r * r / 2)
    closed = (4 * math.pi) ** (-n / 2) * (lam * lam - 1) * W / (n + 1)
    z = np.zeros(n + 1)
    z[0] = 1.0
    f = first_harmonic(z)
    value = closed
    if certify:
        value = analytic_second_variation_T(make_sphere(n, r), _witness_grid(n, r), f)
    return Verdict(False, Witness(f, (0.0,) * (n + 1), 0.0, value, closed))


def weak_stability_operator_floor(n: int, r: float, k_max: int = 8) -> float:
    """Minimum of ``mu_k - S - 1 + lam^2`` over degrees ``k >= 1`` (equals ``lam^2 - 1``)."""
    lam = sphere_lambda(n, r)
    return min(mu.mu - n / r ** 2 - 1 + lam * lam for mu in sphere_spectrum(n, r, k_max)[1:])


def stability_report(n: int, r: float, certify: bool = True) -> StabilityReport:
    fv = f_stability_verdict(n, r, certify)
    wv = weak_stability_verdict(n, r, certify)
    return StabilityReport(n, float(r), sphere_lambda(n, r), thresholds(n), fv.stable, wv.stable,
                           fv.witness, wv.witness)


def sweep(ns, radii, certify: bool = True) -> List[StabilityReport]:
    return [stability_report(int(n), float(r), certify) for n in ns for r in radii]


def grid_radii(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive radius grid ``start, start+step, ...`` built from integer multiples."""
    count = int(round((stop - start) / step))
    return np.array([round(start + i * step, 12) for i in range(count + 1)])


def confirm_with_optimizer(n: int, r: float, decomposition: Decomposition, seed: int = 0) -> float:
    """Maximize the closed-form F'' over ``(y, h)`` with a generic optimizer.

    Secondary confirmation only; returns the maximum found (``inf`` signalled
    by a very large value when the form is unbounded).
    """
    rng = np.random.default_rng(seed)

    def neg(v):
        return -f_stability_form(n, r, decomposition, v[:-1], v[-1])

    best = None
    for _ in range(3):
        res = minimize(neg, rng.normal(size=n + 2), method="BFGS", options={"gtol": 1e-12})
        if best is None or res.fun < best.fun:
            best = res
    return float(-best.fun)
