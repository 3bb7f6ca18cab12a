"""Command-line entry point.

Every subcommand reads an optional YAML scenario, applies the command-line
overrides, runs its checks and writes ``report.json`` (plus CSV/JSONL
artifacts) into the output directory once all checks have finished.

Exit status: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import io as lio
from .config import (COMMANDS, ConfigError, RangeConfig, Scenario, SweepConfig, apply_overrides,
                     load_scenario, thread_count)
from .curves import NotFound, ShootingError, circle_radius, search_closed, shoot_circle, shoot_closed, \
    product_with_line
from .flow import FlowError, perturbed_circle, run
from .hypersurface import (CurveProduct, Cylinder, GeometryError, PolylineCurve, Sphere, ellipse,
                           lambda_residual, make_cylinder, make_sphere, regular_polygon)
from .identities import (area_growth_slope, check_integral, check_pointwise, classification_diagnostics,
                         growth_exponent_bound)
from .quadrature import build_grid
from .stability import grid_radii, sphere_lambda, sphere_spectrum, stability_report, thresholds, \
    weak_stability_operator_floor
from .variation import (CancellationError, analytic_first_variation_A, analytic_first_variation_F,
                        analytic_first_variation_V, numeric_variation, variation_battery)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
Result = Tuple[List[dict], dict, Dict[str, str]]


def _check(name: str, value, tolerance, passed: bool, **info) -> dict:
    out = {"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed)}
    out.update(info)
    return out


def _pmap(fn, items):
    workers = thread_count() or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# surfaces
# --------------------------------------------------------------------------
def build_surface(scen: Scenario):
    s = scen.surface
    if s.family == "sphere":
        return make_sphere(s.n, s.r)
    if s.family == "cylinder":
        return make_cylinder(s.n, s.k, s.r)
    if s.family == "polygon":
        return regular_polygon(s.vertices, s.r)
    if s.family == "ellipse":
        return ellipse(s.vertices, s.a, s.b, s.estimator or "angle")
    curve = lio.read_curve(s.path, estimator=s.estimator)
    if s.lam is not None:
        curve = PolylineCurve(curve.vertices, curve.closed, curve.estimator, s.lam)
    if s.family == "curve_file":
        return curve
    return product_with_line(curve, s.flat_dim, tol=scen.tol or 1e-5)


def _lam(scen: Scenario, M):
    if scen.surface.lam is not None:
        return scen.surface.lam
    return M.lambda_exact


def _is_analytic(M) -> bool:
    return isinstance(M, (Sphere, Cylinder))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------
def cmd_verify(scen: Scenario) -> Result:
    M = build_surface(scen)
    lam = _lam(scen, M)
    if lam is None:
        raise ConfigError("surface.lam is required for a curve without λ metadata")
    grid = build_grid(M, scen.resolution)
    res_tol = scen.tol or (1e-10 if _is_analytic(M) else 1e-5)
    _, sup = lambda_residual(M, grid, lam=lam)
    checks = [_check("lambda_residual", sup, res_tol, sup <= res_tol)]

    def pointwise():
        return check_pointwise(M, grid, lam=lam, tol=scen.tol)

    def integral():
        return check_integral(M, grid, lam=lam, tol=scen.tol or 1e-6)

    for group in _pmap(lambda f: f(), [pointwise, integral]):
        for rep in group:
            rel = rep.identity.startswith("moment") or not _is_analytic(M)
            checks.append(_check(rep.identity, rep.relative if rel else rep.residual, rep.tolerance, rep.passed,
                                 skipped=rep.skipped, note=rep.note))
    extra = {"surface": M.describe(), "lambda": lam,
             "classification": classification_diagnostics(M, grid, lam=lam)}
    return checks, extra, {}


def cmd_flow(scen: Scenario) -> Result:
    fc = scen.flow
    curve = perturbed_circle(fc.vertices, fc.radius, fc.amplitude, fc.direction)
    tol = scen.tol or 1e-4
    hist = run(curve, fc.T, fc.dt, cfl=fc.cfl, check_every=fc.check_every)
    defect = hist.volume_defect
    checks = [_check("volume_defect", defect, tol, defect <= tol),
              _check("embedded", len(hist.final.flagged), 0, not hist.final.flagged,
                     flags=hist.final.flagged)]
    extra = {"steps": len(hist.records) - 1, "final_time": hist.final.t,
             "final_volume": hist.records[-1]["V"], "initial_volume": hist.records[0]["V"]}
    return checks, extra, {"flow.jsonl": hist.to_jsonl(), "final_curve.csv": lio.curve_to_csv(hist.final.curve)}


def cmd_spectrum(scen: Scenario) -> Result:
    s = scen.surface
    if s.family != "sphere":
        raise ConfigError("spectrum: surface.family must be sphere")
    n, r = s.n, s.r
    lam = sphere_lambda(n, r)
    S = n / r ** 2
    entries = []
    for e in sphere_spectrum(n, r, max(scen.spectrum.k_max, 1)):
        entries.append({"k": e.k, "laplacian": e.mu, "multiplicity": e.multiplicity, "note": e.note,
                        "stability_operator": -e.mu + S + 1 - lam * lam})
    floor = weak_stability_operator_floor(n, r)
    tol = scen.tol or 1e-12
    checks = [_check("weak_floor_equals_lam2_minus_1", abs(floor - (lam * lam - 1)), tol,
                     abs(floor - (lam * lam - 1)) <= tol * max(1.0, abs(floor)))]
    return checks, {"n": n, "r": r, "lambda": lam, "spectrum": entries}, {}


def _flip_checks(reports, n) -> List[dict]:
    th = thresholds(n)
    rows = [rp for rp in reports if rp.n == n]
    out = []
    for key, keys in (("f_stable", ("f_lower", "f_upper")), ("weak_stable", ("weak_lower", "weak_upper"))):
        flips = [(a.r, b.r) for a, b in zip(rows, rows[1:]) if getattr(a, key) != getattr(b, key)]
        ths = [th[k] for k in keys]
        inside = [t for t in ths if rows[0].r < t < rows[-1].r]
        # every flip brackets a threshold and every interior threshold is bracketed by a flip
        ok = all(any(lo <= t <= hi for t in ths) for lo, hi in flips) \
            and all(any(lo <= t <= hi for lo, hi in flips) for t in inside)
        out.append(_check(f"{key}_flips_n{n}", [list(f) for f in flips], ths, ok))
    return out


def cmd_stability(scen: Scenario) -> Result:
    if scen.sweep is None:
        s = scen.surface
        if s.family != "sphere":
            raise ConfigError("stability: give a sphere surface or a sweep")
        sw = SweepConfig(n=[s.n], r=RangeConfig(start=s.r, stop=s.r, step=1.0))
    else:
        sw = scen.sweep
    radii = grid_radii(sw.r.start, sw.r.stop, sw.r.step)
    jobs = [(n, float(r)) for n in sw.n for r in radii]
    reports = _pmap(lambda job: stability_report(job[0], job[1], sw.certify), jobs)
    checks = []
    bad = [(rp.n, rp.r) for rp in reports
           if (not rp.f_stable and not (rp.f_witness is not None and rp.f_witness.value < 0))
           or (not rp.weak_stable and not (rp.weak_witness is not None and rp.weak_witness.value < 0))]
    checks.append(_check("unstable_rows_have_negative_witness", len(bad), 0, not bad, offending=bad))
    if len(radii) > 1:
        for n in sw.n:
            checks.extend(_flip_checks(reports, n))
    csv_text = lio.sweep_to_csv(rp.row() for rp in reports)
    return checks, {"rows": len(reports)}, {"sweep.csv": csv_text}


def cmd_curve(scen: Scenario) -> Result:
    cc = scen.curve
    lam = cc.lam
    checks = []
    files = {}
    if cc.circle:
        try:
            circ = shoot_circle(lam, tol=cc.shooting_tol)
            err = abs(circ.rho0 - circle_radius(lam))
            checks.append(_check("circle_radius", err, 1e-8, err <= 1e-8, radius=circ.rho0))
        except (NotFound, ShootingError) as exc:
            checks.append(_check("circle_radius", None, 1e-8, False, error=str(exc)))
    found = []
    try:
        if cc.bracket is not None:
            found = [shoot_closed(lam, cc.bracket, cc.fold, cc.samples, cc.shooting_tol)]
        else:
            rng = cc.search or RangeConfig(start=0.3, stop=6.0, step=0.1)
            found = search_closed(lam, grid_radii(rng.start, rng.stop, rng.step), (cc.fold,), cc.samples)
    except (NotFound, ShootingError) as exc:
        checks.append(_check("closed_curve_found", 0, 1, False, error=str(exc)))
    found = [f for f in found if not f.circle]
    if not any(c["name"] == "closed_curve_found" for c in checks):
        checks.append(_check("closed_curve_found", len(found), 1, len(found) >= 1))
    tol = scen.tol or 1e-5
    summary = []
    for i, res in enumerate(found):
        prod = CurveProduct(res.curve, 1)
        grid = build_grid(prod, scen.resolution)
        _, sup = lambda_residual(prod, grid, lam=lam)
        H = res.curve.curvature
        tag = f"curve{i}"
        checks.append(_check(f"{tag}_closure_gap", res.closure_gap, 1e-6, res.closure_gap <= 1e-6))
        checks.append(_check(f"{tag}_embedded", res.embedded, True, res.embedded))
        checks.append(_check(f"{tag}_product_residual", sup, tol, sup <= tol))
        checks.append(_check(f"{tag}_H_minus_lam_positive", float(np.min(H - lam)), 0.0, np.min(H - lam) > 0))
        spread = float(np.ptp(H))
        checks.append(_check(f"{tag}_H_nonconstant", spread, 1e-6, spread > 1e-6))
        summary.append({"rho0": res.rho0, "fold": res.fold, "length": res.length,
                        "closure_gap": res.closure_gap})
        files[f"{tag}.csv"] = lio.curve_to_csv(res.curve)
    return checks, {"lambda": lam, "curves": summary}, files


def _default_radii(M) -> np.ndarray:
    if isinstance(M, CurveProduct):
        base = float(np.linalg.norm(M.curve.vertices, axis=1).max())
    elif isinstance(M, Sphere):
        base = float(np.linalg.norm(M.center)) + M.r
    else:
        base = M.r
    return np.geomspace(max(10.0, 10 * base), max(1000.0, 1000 * base), 12)


def cmd_growth(scen: Scenario) -> Result:
    M = build_surface(scen)
    if isinstance(M, PolylineCurve):
        raise ConfigError("growth: a closed curve is compact; use curve_product")
    radii = np.asarray(scen.growth.radii, float) if scen.growth.radii else _default_radii(M)
    slope, _, rms = area_growth_slope(M, radii)
    if scen.growth.expected is not None:
        expected = scen.growth.expected
    elif isinstance(M, Cylinder):
        expected = M.n - M.k
    elif isinstance(M, CurveProduct):
        expected = M.m
    else:
        expected = 0
    tol = scen.tol or 0.05
    checks = [_check("slope_matches_exponent", abs(slope - expected), tol, abs(slope - expected) <= tol,
                     slope=slope, expected=expected)]
    lam = _lam(scen, M)
    bound = growth_exponent_bound(M, lam)
    checks.append(_check("slope_below_bound", slope - bound, tol, slope <= bound + tol, bound=bound))
    if not isinstance(M, Sphere):
        checks.append(_check("linear_lower_bound", slope, 1 - tol, slope >= 1 - tol))
    return checks, {"surface": M.describe(), "slope": slope, "fit_rms": rms,
                    "radii": [float(r) for r in radii]}, {}


def cmd_variation(scen: Scenario) -> Result:
    M = build_surface(scen)
    lam = _lam(scen, M)
    lam_v = 0.0 if lam is None else lam
    grid = build_grid(M, scen.resolution)
    vc = scen.variation
    tol = scen.tol or 1e-6
    is_lam = lam is not None and lambda_residual(M, grid, lam=lam_v)[1] <= (1e-8 if _is_analytic(M) else 1e-5)
    checks = []
    analytic = {"A": lambda sp: analytic_first_variation_A(M, grid, sp),
                "V": lambda sp: analytic_first_variation_V(M, grid, sp),
                "F": lambda sp: analytic_first_variation_F(M, grid, sp, lam=lam_v)}
    for i, spec in enumerate(variation_battery(M, vc.battery, scen.seed)):
        for tag, fn in analytic.items():
            if tag != "F" and (spec.y is not None or spec.h):
                spec_t = type(spec)(spec.f)
            else:
                spec_t = spec
            ana = fn(spec_t)
            try:
                num = numeric_variation(tag, M, grid, spec_t, eps=vc.eps, lam=lam_v)
            except CancellationError as exc:
                checks.append(_check(f"{tag}'[{i}]", None, tol, False, error=str(exc)))
                continue
            err = abs(num - ana)
            scale = max(1.0, abs(ana))
            checks.append(_check(f"{tag}'[{i}]", err / scale, tol, err <= tol * scale,
                                 numeric=num, analytic=ana))
            if tag == "F" and is_lam:
                worst = max(abs(num), abs(ana))
                checks.append(_check(f"F'[{i}]_vanishes", worst, tol, worst <= tol))
    return checks, {"surface": M.describe(), "lambda": lam, "lambda_hypersurface": bool(is_lam)}, {}


COMMAND_TABLE: Dict[str, Callable[[Scenario], Result]] = {
    "verify": cmd_verify, "flow": cmd_flow, "spectrum": cmd_spectrum, "stability": cmd_stability,
    "curve": cmd_curve, "growth": cmd_growth, "variation": cmd_variation,
}


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------
def parse_sweep(tokens: List[str]) -> SweepConfig:
    """``["n=2", "r=1.0:2.0:0.05"]`` (``n`` may be a comma list)."""
    fields = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep:
            raise ConfigError(f"--sweep: expected key=value, got {tok!r}")
        fields[key.strip()] = val.strip()
    unknown = set(fields) - {"n", "r"}
    if unknown:
        raise ConfigError(f"--sweep: unknown key(s) {sorted(unknown)}")
    try:
        ns = [int(v) for v in fields.get("n", "2").split(",")]
        parts = [float(v) for v in fields.get("r", "1.0:2.0:0.05").split(":")]
    except ValueError as exc:
        raise ConfigError(f"--sweep: {exc}") from None
    if len(parts) != 3:
        raise ConfigError("--sweep: r must be start:stop:step")
    try:
        return SweepConfig(n=ns, r=RangeConfig(start=parts[0], stop=parts[1], step=parts[2]))
    except ValueError as exc:
        raise ConfigError(f"--sweep: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lamsurf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMAND_TABLE[name].__doc__ or name)
        p.add_argument("--config", help="YAML scenario file")
        p.add_argument("--out", help="output directory (default: lamsurf-out)")
        p.add_argument("--resolution", type=int, help="quadrature resolution")
        p.add_argument("--tol", type=float, help="override the check tolerance")
        if name == "stability":
            p.add_argument("--sweep", nargs="+", metavar="KEY=VALUE",
                           help="e.g. n=2 r=1.0:2.0:0.05")
    return parser


def _scenario(args) -> Tuple[Scenario, str]:
    if args.config:
        scen, text = load_scenario(args.config)
        if scen.command is not None and scen.command != args.command:
            raise ConfigError(f"{args.config}: command {scen.command!r} does not match {args.command!r}")
    else:
        scen, text = Scenario(), ""
    upd = {"resolution": args.resolution, "tol": args.tol, "command": args.command}
    if getattr(args, "sweep", None):
        upd["sweep"] = parse_sweep(args.sweep).model_dump()
    scen = apply_overrides(scen, **upd)
    # the hash covers the file and the effective overrides
    overrides = {k: v for k, v in sorted(upd.items()) if v is not None}
    return scen, text + "\n#overrides " + repr(overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scen, text = _scenario(args)
        thread_count()
        checks, extra, files = COMMAND_TABLE[args.command](scen)
    except ConfigError as exc:
        print(f"lamsurf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GeometryError, ValueError, TypeError) as exc:
        print(f"lamsurf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FlowError as exc:
        checks, extra, files = [_check("flow_completed", None, None, False, error=str(exc))], {}, {}
    report = lio.report_json(args.command, lio.config_hash(text), checks, extra)
    out = Path(args.out or scen.output or "lamsurf-out")
    out.mkdir(parents=True, exist_ok=True)
    files = dict(files)
    files["report.json"] = report
    for name in sorted(files):
        (out / name).write_text(files[name])
    failed = [c["name"] for c in checks if not c["passed"]]
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']}")
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed; report in {out / 'report.json'}")
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
