"""
Command-line front end: ``nsgeom <subcommand> ...``.

Every subcommand writes one JSON report (sorted keys, schema version, config
echo, seed and an invariant-audit section) and optionally flat CSV tables for
plotting.  Exit status: 0 ok, 2 audit failure, 3 input error, 4 config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import fields as F
from . import snapio
from .analytic import AnalyticField
from .errors import (CFLError, CompatibilityError, CoverageError, ExplorationError, FieldError,
                     NotAxisymmetricError, SnapshotFormatError)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_AUDIT, EXIT_INPUT, EXIT_CONFIG = 0, 2, 3, 4

# arguments that name outputs or resources rather than the computation
_NOT_ECHOED = {"func", "report", "plotdata", "out_dir", "threads", "command"}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

class Audit:
    """Collects named pass/fail checks for the report."""

    def __init__(self):
        self.checks = []

    def check(self, name, passed, value=None, tol=None):
        self.checks.append({"name": name, "passed": bool(passed), "value": value, "tol": tol})
        return bool(passed)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def to_dict(self):
        return {"passed": self.passed, "checks": self.checks}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, Path):
        return str(obj)
    return obj


def make_report(command, args, results, audit: Audit):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "tool": "nsgeom",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": getattr(args, "seed", 0),
        "results": results,
        "audit": audit.to_dict(),
    })


def dump_json(report, path):
    text = json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def write_csv(path, columns, rows):
    """Write ``rows`` (dicts or sequences) under ``columns``; floats use ``repr``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            vals = [row[c] for c in columns] if isinstance(row, dict) else list(row)
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in vals])


def read_csv(path):
    """Inverse of :func:`write_csv` for numeric tables: (columns, float array)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(cols))
    return cols, data


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def _floats(text, n=None):
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
    return vals


def _point3(text):
    return _floats(text, 3)


def _point2(text):
    return _floats(text, 2)


def _positive(text):
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return x


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def ingest(path, audit: Audit | None = None, div_tol=1e-8):
    """Read a snapshot file or directory into a time-ordered series.

    Non-finite data, mismatched grids and repeated times are input errors;
    the spectral divergence of each snapshot goes into ``audit``.
    """
    p = Path(path)
    if not p.exists():
        raise SnapshotFormatError(f"{path}: no such file or directory")
    series, _ = snapio.read_series(p)
    grid = series[0].grid
    for v in series:
        if v.grid != grid:
            raise SnapshotFormatError(f"{path}: snapshots live on different grids")
        if not np.all(np.isfinite(v.components)):
            raise SnapshotFormatError(f"{path}: non-finite values at t={v.time}")
    times = [v.time for v in series]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise SnapshotFormatError(f"{path}: snapshot times are not strictly increasing")
    if audit is not None:
        worst = 0.0
        for v in series:
            scale = max(v.max_abs() * max(grid.n) * 2 * math.pi / min(grid.L), 1e-300)
            worst = max(worst, F.divergence(v).max_abs() / scale)
        audit.check("snapshot_divergence_free", worst <= div_tol, worst, div_tol)
    return series


def initial_field(name, grid: F.GridSpec, seed=0, amplitude=1.0) -> F.VectorField:
    if name == "abc":
        a = AnalyticField.abc()
    elif name == "taylor-green":
        a = AnalyticField.taylor_green()
    elif name == "tg2d":
        a = AnalyticField.taylor_green_2d()
    elif name == "beltrami4":
        a = AnalyticField.abc(k=4.0)
    elif name == "random":
        return random_field(grid, seed, amplitude)
    else:
        raise ConfigError(f"unknown initial condition {name!r}")
    v = F.sample(a.scaled(amplitude) if amplitude != 1.0 else a, grid)
    return v


def random_field(grid: F.GridSpec, seed=0, amplitude=1.0, kmax=3.0) -> F.VectorField:
    """Seeded band-limited solenoidal field with ``max |v| = amplitude``."""
    rng = np.random.default_rng(seed)
    ks = grid.wavenumbers()
    K = np.meshgrid(*ks, indexing="ij")
    kk = np.sqrt(sum(k * k for k in K))
    band = (kk > 0) & (kk <= kmax)
    coef = (rng.standard_normal((3,) + grid.shape) + 1j * rng.standard_normal((3,) + grid.shape))
    coef *= band
    raw = np.real(F.ifftn(coef))
    v = F.leray_project(F.VectorField(grid, raw, 0.0))
    return F.VectorField(grid, v.components * (amplitude / max(v.max_abs(), 1e-300)), 0.0)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    from . import solver
    audit = Audit()
    grid = F.GridSpec.cube(args.n)
    cfg = solver.SolverConfig(dt=args.dt, t_end=args.t_end, snap_every=args.snap_every,
                              cfl_limit=args.cfl)
    v0 = initial_field(args.init, grid, args.seed, args.amplitude)
    out = Path(args.out_dir) if args.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    count = [0]

    def save(v):
        if out is not None:
            snapio.write_snapshot(out / snapio.snapshot_name(count[0]), v)
        count[0] += 1
    res = solver.simulate(v0, cfg, on_snapshot=save)
    a = res.audit
    audit.check("energy_nonincreasing", a["energy_nonincreasing"])
    audit.check("energy_balance", a["energy_balance_ok"], a["energy_balance_rel_error"], 1e-3)
    audit.check("divergence_free", a["divergence_ok"], a["max_divergence_rel"], 1e-12)
    results = {"solver": cfg.to_dict(), "grid": grid.to_header(), "audit": a,
               "energies": [s.energy() for s in res.snapshots],
               "times": [s.time for s in res.snapshots]}
    return results, audit, {}


def _cone_results(series, args, audit: Audit):
    from . import geometry as G
    w = F.curl(series[args.index])
    region = None
    if args.region_radius is not None:
        region = F.CylinderRegion(args.region_radius, tuple(args.center), w.time, "ball")
    ds = G.direction_field(w, args.M, region)
    fit = G.cone_deficiency(ds, lattice=args.lattice)
    res = {"t": w.time, "M": args.M, "n_samples": len(ds), "cone": fit.to_dict()}
    plot = {}
    if len(ds):
        ob = G.great_circle_obstruction(ds, fit=fit)
        res["obstruction"] = ob.to_dict()
        pa, pair = G.pairwise_alignment(ds, return_pair=True)
        res["pairwise_alignment"] = {"value": pa, "pair": list(pair) if pair is not None else None}
        audit.check("cone_delta_in_range", 0.0 <= fit.delta <= 1.0, fit.delta)
        # sin of the widest angle between two directions bounds the cone gap
        audit.check("pairwise_bounds_cone", pa <= 1.0 + 1e-12, pa, 1.0)
        d = ds.directions
        theta = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
        phi = np.arctan2(d[:, 1], d[:, 0])
        plot["directions.csv"] = (["theta", "phi"], np.column_stack([theta, phi]))
    else:
        audit.check("directions_nonempty", False, 0)
    if args.stretch_at is not None:
        st = G.stretching_factor(w, tuple(args.stretch_at), details=True)
        res["stretching"] = st.to_dict()
        audit.check("stretching_vs_direct", st.rel_diff <= 0.1, st.rel_diff, 0.1)
    return res, plot


def cmd_cone(args):
    audit = Audit()
    series = ingest(args.input, audit)
    res, plot = _cone_results(series, args, audit)
    return res, audit, plot


def _flux_results(series, args, audit: Audit):
    from . import flux as X
    times = [v.time for v in series]
    idx = len(series) // 2
    t_probe = times[idx]
    grid = series[0].grid
    prof_ok = True
    try:
        prof = X.flux_profile(series, args.radii, args.heights, [t_probe], args.center[:2],
                              n_r=args.n_r, n_theta=args.n_theta)
    except AssertionError:
        prof_ok = False
        prof = None
    audit.check("gamma_nonnegative_monotone", prof_ok)
    w = F.curl(series[idx])
    bal = X.flux_balance(w, max(args.radii), args.heights[0], args.heights[0] + 0.5,
                         args.center[:2], n_r=args.n_r, n_theta=args.n_theta)
    audit.check("flux_balance", bal.residual <= 1e-8, bal.residual, 1e-8)
    try:
        d = X.divfree_defect(X.flipped_vorticity(w), X.zero_set_mask(w))
        defect = {"relative": d.relative, "n_used": d.n_used}
    except FieldError:
        defect = {"relative": None, "n_used": 0}
    rows = []
    probes = []
    has_dt = 0 < idx < len(series) - 1
    for r in args.radii:
        wp = X.w_profile(series, r, args.heights, [t_probe], args.center[:2], n_r=args.n_r,
                         n_theta=args.n_theta)
        pr = X.gamma_inequality_audit(series, [r], args.heights, [t_probe], args.center[:2],
                                      h_r=args.h, h_z=args.h, n_r=args.n_r, n_theta=args.n_theta)
        for iz, p in enumerate(pr):
            probes.append(p.to_dict())
            rows.append({"t": p.t, "z": p.z, "r": p.r, "gamma": p.gamma,
                         "w": float(wp.W[iz, 0]), "b1": float(wp.B1[iz, 0]),
                         "b2": float(wp.B2[iz, 0]), "ineq_lhs": p.ineq_lhs,
                         "laplace_resid": p.laplace_resid,
                         "transport_resid": p.transport_resid})
            audit.check(f"w_identity r={r:g} z={p.z:g}", wp.identity_residual[iz, 0] <= 1e-6,
                        float(wp.identity_residual[iz, 0]), 1e-6)
            if not p.near_zero_set:
                audit.check(f"transport_identity r={r:g} z={p.z:g}", p.transport_resid <= 1e-6,
                            p.transport_resid, 1e-6)
    res = {"t": t_probe, "center": args.center, "grid": grid.to_header(),
           "time_derivatives": has_dt,
           "gamma": None if prof is None else prof.values[:, :, 0].tolist(),
           "radii": args.radii, "heights": args.heights, "flux_balance": bal.to_dict(),
           "flipped_divergence_defect": defect,
           "probes": probes}
    cols = ["t", "z", "r", "gamma", "w", "b1", "b2", "ineq_lhs", "laplace_resid", "transport_resid"]
    return res, {"flux.csv": (cols, rows)}


def cmd_flux(args):
    audit = Audit()
    series = ingest(args.input, audit)
    res, plot = _flux_results(series, args, audit)
    return res, audit, plot


def _type_i_results(series, args, audit: Audit):
    from . import criticality as Q
    quad = Q.Quadrature(n_z=args.quad, n_r=args.quad, n_theta=2 * args.quad, n_t=max(2, args.quad // 2))
    rep = Q.type_i_scan(series, [tuple(args.center)], args.r_max, levels=args.levels, q=args.q,
                        quad=quad, eps_ckn=args.eps_ckn)
    finite = all(math.isfinite(getattr(s, k)) and getattr(s, k) >= 0
                 for s in rep.table for k in ("F", "E", "A", "D"))
    audit.check("scale_quantities_finite_nonnegative", finite)
    audit.check("g_energy_at_least_two", rep.G >= 2.0, rep.G, 2.0)
    rows = [[s.r, s.F, s.E, s.A, s.D] for s in rep.table]
    return rep.to_dict(), {"scales.csv": (["r", "F", "E", "A", "D"], rows)}


def cmd_type_i(args):
    audit = Audit()
    series = ingest(args.input, audit)
    res, plot = _type_i_results(series, args, audit)
    return res, audit, plot


def cmd_axisym(args):
    from . import axisym as X
    audit = Audit()
    C1, C2 = args.c1, args.c2
    if not (C1 > 10 and C2 > 10):
        raise ConfigError("--c1 and --c2 must exceed 10")
    r0, z0 = args.start
    res = {}
    if args.input is not None:
        series = ingest(args.input, audit)
        v = series[args.index]
        m = X.to_cylindrical(v, center=args.axis, r_max=args.r_max, tol=args.axis_tol)
        sf = X.stream_function(m, tol=args.compat_tol)
        audit.check("stream_compatibility", True, sf.residual, args.compat_tol)
        psi = sf
        res["meridian"] = {"deviation": m.deviation, "r_max": float(m.r[-1]), "n_r": len(m.r),
                           "n_z": len(m.z)}
        res["velocity_cone"] = X.velocity_cone_check(m, args.delta, args.M).to_dict()
        res["slope_C1_needed"] = sf.slope_constant(C2)
    else:
        rng = np.random.default_rng(args.seed)
        psi = X.random_banded_stream(rng, C1, C2, r0, z0)
        res["synthetic"] = {"base": psi.base, "bands": [list(b) for b in psi.bands], "K": psi.K,
                            "s": psi.s, "z_ref": psi.z_ref}
    tr = X.explore_level_set(psi, (r0, z0), C1, C2)
    res["trace"] = tr.to_dict()
    audit.check("trace_reaches_axis", tr.reached_axis and tr.final[0] == 0.0)
    audit.check("certificate", tr.passed, abs(tr.psi_start), tr.bound)
    audit.check("mode_ii_increment_bound", tr.mode2_excess <= 1e-9 * max(1.0, C1 * r0),
                tr.mode2_excess, 0.0)
    audit.check("inside_unit_ball", tr.max_excursion < 1.0, tr.max_excursion, 1.0)
    audit.check("no_mode_i_axis_arrival", "mode_i_axis_arrival" not in tr.flags)
    plot = {"trace.csv": (["r", "z", "mode"], [[p[0], p[1], 1 if m == "i" else 2]
                                             for p, m in zip(tr.points, tr.modes)])}
    return res, audit, plot


def _validate_results(series, audit: Audit):
    energies = [v.energy() for v in series]
    mono = all(b <= a * (1 + 1e-12) for a, b in zip(energies, energies[1:]))
    audit.check("energy_nonincreasing", mono)
    return {"n_snapshots": len(series), "times": [v.time for v in series], "energies": energies,
            "grid": series[0].grid.to_header(),
            "max_abs": [v.max_abs() for v in series]}


def cmd_validate(args):
    audit = Audit()
    series = ingest(args.input, audit)
    return _validate_results(series, audit), audit, {}


def cmd_diagnose(args):
    audit = Audit()
    series = ingest(args.input, audit)
    res = {"validate": _validate_results(series, audit)}
    plot = {}
    cone, p = _cone_results(series, args, audit)
    res["cone"] = cone
    plot.update(p)
    fl, p = _flux_results(series, args, audit)
    res["flux"] = fl
    plot.update(p)
    ti, p = _type_i_results(series, args, audit)
    res["typeI"] = ti
    plot.update(p)
    return res, audit, plot


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

def _common(p, needs_input=True):
    if needs_input:
        p.add_argument("--in", dest="input", required=True, help="snapshot file or directory")
    p.add_argument("--report", default="-", help="JSON report path ('-' for stdout)")
    p.add_argument("--plotdata", default=None, help="directory for CSV plot tables")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="FFT worker threads (overrides NSGEOM_THREADS)")


def _cone_args(p):
    p.add_argument("--M", type=float, default=0.0, help="vorticity magnitude threshold")
    p.add_argument("--index", type=int, default=-1, help="snapshot index")
    p.add_argument("--lattice", type=int, default=4000)
    p.add_argument("--region-radius", type=_positive, default=None)
    p.add_argument("--stretch-at", type=_point3, default=None)


def _flux_args(p):
    p.add_argument("--radii", type=_floats, default=[0.25, 0.5])
    p.add_argument("--heights", type=_floats, default=[0.0])
    p.add_argument("--h", type=_positive, default=0.01, help="finite-difference step in r and z")
    p.add_argument("--n-r", type=int, default=48)
    p.add_argument("--n-theta", type=int, default=96)


def _type_i_args(p):
    p.add_argument("--r-max", type=_positive, default=0.5)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--q", type=float, default=1.8)
    p.add_argument("--eps-ckn", type=_positive, default=0.05)
    p.add_argument("--quad", type=int, default=12, help="quadrature points per direction")


def build_parser():
    parser = _Parser(prog="nsgeom", description="Vorticity-geometry diagnostics for periodic flows")
    parser.add_argument("--version", action="version", version=f"nsgeom {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run the pseudo-spectral solver")
    _common(p, needs_input=False)
    p.add_argument("--init", default="abc", choices=["abc", "taylor-green", "tg2d", "beltrami4", "random"])
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--dt", type=_positive, default=1e-3)
    p.add_argument("--t-end", type=float, default=0.1)
    p.add_argument("--snap-every", type=_positive, default=0.05)
    p.add_argument("--cfl", type=_positive, default=1.0)
    p.add_argument("--amplitude", type=_positive, default=1.0)
    p.add_argument("--out-dir", default=None, help="directory for VXS1 snapshots")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cone", help="vorticity-direction cone fit")
    _common(p)
    _cone_args(p)
    p.add_argument("--center", type=_point3, default=[0.0, 0.0, 0.0])
    p.set_defaults(func=cmd_cone)

    p = sub.add_parser("flux", help="vorticity flux profiles and identity audit")
    _common(p)
    _flux_args(p)
    p.add_argument("--center", type=_point3, default=[0.0, 0.0, 0.0])
    p.set_defaults(func=cmd_flux)

    p = sub.add_parser("typeI", help="scale-invariant quantities across dyadic radii")
    _common(p)
    _type_i_args(p)
    p.add_argument("--center", type=_point3, default=[0.0, 0.0, 0.0])
    p.set_defaults(func=cmd_type_i)

    p = sub.add_parser("axisym", help="stream-function exploration certificate")
    _common(p, needs_input=False)
    p.add_argument("--in", dest="input", default=None, help="snapshot (omit for a synthetic stream function)")
    p.add_argument("--c1", type=float, default=11.0)
    p.add_argument("--c2", type=float, default=11.0)
    p.add_argument("--start", type=_point2, default=[5e-4, 0.0])
    p.add_argument("--axis", type=_point2, default=[0.0, 0.0], help="horizontal position of the vertical axis")
    p.add_argument("--r-max", type=_positive, default=None)
    p.add_argument("--axis-tol", type=_positive, default=1e-8)
    p.add_argument("--compat-tol", type=_positive, default=1e-6)
    p.add_argument("--delta", type=_positive, default=0.1)
    p.add_argument("--M", type=float, default=0.0)
    p.add_argument("--index", type=int, default=-1)
    p.set_defaults(func=cmd_axisym)

    p = sub.add_parser("validate", help="ingest snapshots and audit them")
    _common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("diagnose", help="validate, cone, flux and typeI in one report")
    _common(p)
    _cone_args(p)
    _flux_args(p)
    _type_i_args(p)
    p.add_argument("--center", type=_point3, default=[0.0, 0.0, 0.0])
    p.set_defaults(func=cmd_diagnose)
    return parser


def emit_plotdata(directory, tables):
    for name, (cols, rows) in sorted(tables.items()):
        write_csv(Path(directory) / name, cols, rows)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be positive")
        os.environ["NSGEOM_THREADS"] = str(args.threads)
    try:
        results, audit, tables = args.func(args)
    except (SnapshotFormatError, NotAxisymmetricError, CompatibilityError, CoverageError,
            FieldError, ExplorationError, OSError) as exc:
        print(f"nsgeom {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, CFLError, ValueError) as exc:
        # a CFL abort means the requested time step is too large for the flow
        print(f"nsgeom {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = make_report(args.command, args, results, audit)
    dump_json(report, args.report)
    if args.plotdata:
        emit_plotdata(args.plotdata, tables)
    if not audit.passed:
        failed = [c["name"] for c in audit.checks if not c["passed"]]
        print(f"nsgeom {args.command}: audit failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
