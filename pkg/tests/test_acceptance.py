"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run standalone with ``python3 tests/test_acceptance.py`` to see only the
summary lines.
"""
import math
import time

import numpy as np

from lamsurf.curves import circle_radius, search_closed, shoot_circle
from lamsurf.flow import perturbed_circle, run
from lamsurf.hypersurface import CurveProduct, ellipse, lambda_residual, make_cylinder, make_sphere
from lamsurf.identities import (area_growth_slope, check_integral, check_pointwise,
                                growth_exponent_bound)
from lamsurf.quadrature import build_grid
from lamsurf.stability import grid_radii, stability_report, thresholds
from lamsurf.variation import (NormalSpeed, VariationSpec, ZonalHarmonic, analytic_first_variation_A,
                               analytic_first_variation_F, analytic_first_variation_V,
                               analytic_second_variation_F, constant_speed, first_harmonic,
                               numeric_variation, variation_battery, zonal)


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


# --------------------------------------------------------------------------
# 1. residual of the defining equation on spheres and cylinders
# --------------------------------------------------------------------------
def criterion_residual():
    def body():
        worst, count = 0.0, 0
        for n in (1, 2, 3):
            for k in range(n + 1):
                radii = {0.5, 1.0, 2.0} | ({math.sqrt(k)} if k >= 1 else set())
                for r in sorted(radii):
                    M = make_sphere(n, r) if k == n else make_cylinder(n, k, r)
                    _, sup = lambda_residual(M, build_grid(M, 8))
                    worst = max(worst, sup)
                    count += 1
        return worst, count

    (worst, count), dt = _timed(body)
    ok = worst <= 1e-10 and dt < 1.0
    return ok, f"{count} surfaces, max residual {worst:.2e} (tol 1e-10), {dt:.2f}s (< 1s)"


# --------------------------------------------------------------------------
# 2. weighted volume conservation under the flow
# --------------------------------------------------------------------------
def criterion_volume():
    def body():
        curve = perturbed_circle(128, 1.0, 0.05, (1.0, 0.0))
        return [run(curve, 0.1, dt, check_every=0).volume_defect for dt in (1e-4, 5e-5)]

    (d1, d2), dt = _timed(body)
    shrink = d1 / d2 if d2 > 0 else math.inf
    ok = d1 <= 1e-4 and shrink >= 2.0 and dt < 30.0
    return ok, (f"defect {d1:.2e} at dt=1e-4 (tol 1e-4), {d2:.2e} at dt=5e-5, "
                f"halving ratio {shrink:.2f} (need >= 2), {dt:.2f}s (< 30s)")


# --------------------------------------------------------------------------
# 3. first variations against the analytic formulas
# --------------------------------------------------------------------------
def _fixture_speed(d):
    return NormalSpeed(constant=0.3, z=(0.5,) + (0.2,) * (d - 1),
                       harmonics=(ZonalHarmonic(2, (0.0,) * (d - 1) + (1.0,), 0.7),))


def criterion_first_variation():
    lam = 0.5
    analytic = {"A": lambda M, g, sp: analytic_first_variation_A(M, g, sp),
                "V": lambda M, g, sp: analytic_first_variation_V(M, g, sp),
                "F": lambda M, g, sp: analytic_first_variation_F(M, g, sp, lam=lam)}

    def body():
        ratios = {}
        for name, M, res in (("sphere", make_sphere(2, 1.0), 24),
                             ("ellipse", ellipse(256, 1.5, 0.8, "spectral"), 8)):
            g = build_grid(M, res)
            d = M.ambient_dim
            f = _fixture_speed(d)
            for tag in "AVF":
                sp = VariationSpec(f, (0.3,) * d, 0.4) if tag == "F" else VariationSpec(f)
                a = analytic[tag](M, g, sp)
                e1 = abs(numeric_variation(tag, M, g, sp, eps=0.02, lam=lam) - a)
                e2 = abs(numeric_variation(tag, M, g, sp, eps=0.01, lam=lam) - a)
                ratios[f"{name}:{tag}"] = (e1 / e2 if e2 > 0 else math.inf, e1, e2)
        battery_worst = 0.0
        for M in (make_sphere(2, math.sqrt(2)), make_sphere(2, 1.0), make_cylinder(2, 1, 1.0)):
            g = build_grid(M, 32)
            for sp in variation_battery(M, 10, seed=0):
                a = analytic_first_variation_F(M, g, sp)
                num = numeric_variation("F", M, g, sp, eps=1e-4)
                battery_worst = max(battery_worst, abs(a), abs(num))
        return ratios, battery_worst

    (ratios, battery_worst), dt = _timed(body)
    bad = {k: v for k, v in ratios.items() if not 3.5 <= v[0] <= 4.5}
    ok = not bad and battery_worst <= 1e-6 and dt < 10.0
    parts = ", ".join(f"{k} {v[0]:.2f}" for k, v in ratios.items())
    why = "; no 4x reduction for " + ", ".join(f"{k} (errors {v[1]:.1e}, {v[2]:.1e})"
                                                for k, v in bad.items()) if bad else ""
    return ok, (f"halving ratios [{parts}] (need 4 +/- 0.5){why}; battery max |F'| "
                f"{battery_worst:.1e} (tol 1e-6), {dt:.2f}s (< 10s)")


# --------------------------------------------------------------------------
# 4. second variation of F against central differences
# --------------------------------------------------------------------------
def criterion_second_variation():
    def body():
        worst = 0.0
        for r in (math.sqrt(2), 1.0):
            M = make_sphere(2, r)
            g = build_grid(M, 32)
            for f in (constant_speed(1.0), first_harmonic((0.6, 0.0, 0.8)), zonal(2, (0, 0, 1))):
                for y, h in ((None, 0.0), ((0.3, -0.2, 0.1), 0.25)):
                    sp = VariationSpec(f, y, h)
                    a = analytic_second_variation_F(M, g, sp)
                    num = numeric_variation("F", M, g, sp, eps=1e-3, order=2)
                    fv = sp.f_values(g)
                    scale = max(abs(a), float(np.sum(fv * fv * g.weighted)) / (4 * math.pi))
                    worst = max(worst, abs(num - a) / scale)
        return worst

    worst, dt = _timed(body)
    ok = worst <= 1e-4 and dt < 10.0
    return ok, f"max relative mismatch {worst:.2e} (tol 1e-4), {dt:.2f}s (< 10s)"


# --------------------------------------------------------------------------
# 5. stability thresholds
# --------------------------------------------------------------------------
def criterion_stability():
    radii = grid_radii(0.1, 3.0, 0.01)

    def body():
        problems = []
        negative_witnesses = 0
        for n in (1, 2, 3):
            rows = [stability_report(n, float(r)) for r in radii]
            th = thresholds(n)
            for key, names in (("f_stable", ("f_lower", "f_upper")),
                               ("weak_stable", ("weak_lower", "weak_upper"))):
                flips = [(a.r, b.r) for a, b in zip(rows, rows[1:]) if getattr(a, key) != getattr(b, key)]
                want = [th[k] for k in names]
                if len(flips) != 2 or not all(lo - 1e-12 <= t <= hi + 1e-12
                                              for (lo, hi), t in zip(flips, want)):
                    problems.append(f"n={n} {key} flips {flips} vs {want}")
            for rp in rows:
                for stable, wit, kind in ((rp.f_stable, rp.f_witness, "F"),
                                          (rp.weak_stable, rp.weak_witness, "weak")):
                    if stable:
                        continue
                    if wit is None or not wit.value < 0:
                        problems.append(f"n={n} r={rp.r} {kind} witness {wit}")
                    else:
                        negative_witnesses += 1
        return problems, negative_witnesses

    (problems, nw), dt = _timed(body)
    ok = not problems and dt < 5.0
    return ok, (f"{3 * len(radii)} rows, {nw} negative witnesses, "
                f"{len(problems)} problems {problems[:3]}, {dt:.2f}s (< 5s)")


# --------------------------------------------------------------------------
# 6. integral identities
# --------------------------------------------------------------------------
def criterion_integral():
    def body():
        surfaces = []
        for n in (1, 2):
            for r in sorted({1.0, math.sqrt(n), 2.0}):
                surfaces.append(make_sphere(n, r))
        surfaces.append(make_cylinder(2, 1, 1.0))
        worst, failed = 0.0, []
        for M in surfaces:
            for rep in check_integral(M, build_grid(M, 32)):
                worst = max(worst, rep.relative)
                if not rep.relative <= 1e-6:
                    failed.append((M.describe()["family"], rep.identity))
        return worst, failed, len(surfaces)

    (worst, failed, count), dt = _timed(body)
    ok = not failed and dt < 10.0
    return ok, f"{count} surfaces, max relative {worst:.2e} (tol 1e-6), failed {failed}, {dt:.2f}s (< 10s)"


# --------------------------------------------------------------------------
# 7. pointwise identities and third-order inequalities
# --------------------------------------------------------------------------
def criterion_pointwise():
    def body():
        fams = [make_sphere(1, 1.0), make_sphere(2, math.sqrt(2)), make_sphere(2, 2.0),
                make_sphere(3, 1.0), make_cylinder(2, 1, 1.0), make_cylinder(2, 1, 0.5),
                make_cylinder(3, 1, 2.0), make_cylinder(2, 0, 0.5)]
        worst, failed, vanish = 0.0, [], 0.0
        for M in fams:
            for rep in check_pointwise(M, build_grid(M, 8), tol=1e-8, max_nodes=64):
                if rep.skipped:     # hypothesis not met (S = 0 on the hyperplane)
                    continue
                worst = max(worst, rep.residual)
                if not rep.residual <= 1e-8:
                    failed.append((M.describe(), rep.identity, rep.residual))
                if M.describe()["family"] == "sphere" and rep.identity.startswith(("simons", "third")):
                    vanish = max(vanish, rep.residual)
        return worst, failed, vanish, len(fams)

    (worst, failed, vanish, count), dt = _timed(body)
    ok = not failed and vanish <= 1e-8 and dt < 5.0
    return ok, (f"{count} families, max residual {worst:.2e} (tol 1e-8), third-order terms on "
                f"spheres {vanish:.1e}, failed {failed[:2]}, {dt:.2f}s (< 5s)")


# --------------------------------------------------------------------------
# 8. area growth
# --------------------------------------------------------------------------
def criterion_growth():
    def body():
        out = []
        radii = np.geomspace(10.0, 1000.0, 12)
        for n, k in ((2, 1), (3, 2)):
            M = make_cylinder(n, k, 1.0)
            slope = area_growth_slope(M, radii)[0]
            out.append((n, k, slope, growth_exponent_bound(M)))
        return out

    rows, dt = _timed(body)
    ok = all(abs(s - (n - k)) <= 0.05 and abs(s - b) <= 0.05 and s >= 0.95 for n, k, s, b in rows) \
        and dt < 5.0
    desc = ", ".join(f"S^{k}(1)xR^{n - k}: slope {s:.4f} exponent {b:.4f}" for n, k, s, b in rows)
    return ok, f"{desc} (tol 0.05, lower bound 0.95), {dt:.2f}s (< 5s)"


# --------------------------------------------------------------------------
# 9. planar λ-curves
# --------------------------------------------------------------------------
def criterion_curves():
    def body():
        circle_err = max(abs(shoot_circle(lam).rho0 - circle_radius(lam)) for lam in (-0.5, 0.0, 0.5, 1.0))
        lam = -0.5
        found = [c for c in search_closed(lam, grid_radii(0.3, 6.0, 0.1), folds=(2,)) if not c.circle]
        best = None
        for res in found:
            M = CurveProduct(res.curve, 1)
            _, sup = lambda_residual(M, build_grid(M, 16), lam=lam)
            H = res.curve.curvature
            good = (res.closure_gap <= 1e-6 and res.embedded and sup <= 1e-5
                    and np.min(H - lam) > 0 and np.ptp(H) > 1e-3)
            info = (res.rho0, res.closure_gap, res.embedded, sup, float(np.min(H - lam)), float(np.ptp(H)))
            if good and best is None:
                best = info
        return circle_err, len(found), best

    (err, count, best), dt = _timed(body)
    ok = err <= 1e-8 and best is not None and dt < 60.0
    if best is None:
        extra = "no valid non-circular curve"
    else:
        extra = (f"rho0 {best[0]:.8f}, gap {best[1]:.1e}, embedded {best[2]}, product residual "
                 f"{best[3]:.1e} (tol 1e-5), min(H-lam) {best[4]:.3f}, H spread {best[5]:.3f}")
    return ok, f"circle radius error {err:.1e} (tol 1e-8), {count} closed curves; {extra}, {dt:.2f}s (< 60s)"


CRITERIA = [
    (1, "lambda residual on spheres and cylinders", criterion_residual),
    (2, "weighted volume conservation", criterion_volume),
    (3, "first variation oracle", criterion_first_variation),
    (4, "second variation oracle", criterion_second_variation),
    (5, "stability thresholds", criterion_stability),
    (6, "integral identities", criterion_integral),
    (7, "pointwise identities", criterion_pointwise),
    (8, "area growth exponents", criterion_growth),
    (9, "lambda-curve discovery", criterion_curves),
]


def _line(num, title, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {num} ({title}): {detail}"


def _run(num, report_line):
    _, title, fn = CRITERIA[num - 1]
    ok, detail = fn()
    report_line(_line(num, title, ok, detail))
    assert ok, detail


def test_criterion_1_residual(report_line):
    _run(1, report_line)


def test_criterion_2_volume_conservation(report_line):
    _run(2, report_line)


def test_criterion_3_first_variation(report_line):
    _run(3, report_line)


def test_criterion_4_second_variation(report_line):
    _run(4, report_line)


def test_criterion_5_stability_thresholds(report_line):
    _run(5, report_line)


def test_criterion_6_integral_identities(report_line):
    _run(6, report_line)


def test_criterion_7_pointwise_identities(report_line):
    _run(7, report_line)


def test_criterion_8_growth(report_line):
    _run(8, report_line)


def test_criterion_9_curves(report_line):
    _run(9, report_line)


if __name__ == "__main__":
    for num, title, fn in CRITERIA:
        ok, detail = fn()
        print(_line(num, title, ok, detail))
