"""Command-line interface.

Exit codes: 0 success (an unstable verdict is a result, not an error),
1 usage error, 2 Newton divergence, 3 integrator failure, 4 residual bound
missed.
"""
import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import collinear, planar, stability
from .errors import IntegrationError, NewtonDiverged, ResidualExceeded, SBCError
from .integrate import ORBIT_CONFIG, propagate
from .orbits import ShootingConfig, planar_orbit_with_zeta, solve_collinear, solve_planar

SCHEMA = "sbc-stab/1"
SCAN_HEADER = ["m", "R", "quarter_period", "kappa", "stable", "converged"]

EXIT_OK, EXIT_USAGE, EXIT_NEWTON, EXIT_INTEGRATOR, EXIT_RESIDUAL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x):
    """17 significant digits (round-trips every double)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return format(float(x), ".17g")


def _jsonable(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def document(rows, config=None, residuals=None):
    return {"schema": SCHEMA, "rows": _jsonable(rows), "config": _jsonable(config or {}),
            "residuals": _jsonable(residuals or {})}


def _emit_json(doc, out=None):
    text = json.dumps(doc, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _positive(name):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number") from None
        if not (v > 0 and math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    return parse


def _shooting(args):
    tol = getattr(args, "newton_tol", None)
    return ShootingConfig(newton_tol=tol) if tol else ShootingConfig()


def _orbit(args):
    shooting = _shooting(args)
    if args.system == "collinear":
        if args.m is None:
            raise UsageError("--m is required for the collinear system")
        return solve_collinear(args.m, cfg=shooting)
    if getattr(args, "zeta", None) is not None:
        return planar_orbit_with_zeta(args.zeta, shooting)
    return solve_planar(args.period, cfg=shooting)


def _orbit_record(orbit):
    rec = {"system": orbit.system, "period": orbit.period,
           "fundamental_time": orbit.fundamental_time, "E": orbit.E,
           "initial_state": orbit.initial_state, "newton_residual": orbit.residual,
           "newton_iterations": len(orbit.residual_history) - 1,
           "gamma_residual": abs(orbit.gamma())}
    if orbit.system == "collinear":
        rec.update(m=orbit.param, R=orbit.R, quarter_period=orbit.fundamental_time)
    else:
        rec.update(zeta=orbit.seed.zeta, eta=orbit.seed.eta, eighth_period=orbit.fundamental_time)
    return rec


def _print_pairs(pairs):
    width = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        if isinstance(v, (float, np.floating)):
            v = fmt(v)
        elif isinstance(v, (bool, np.bool_)):
            v = fmt(v)
        print(f"{k:<{width}}  {v}")


def cmd_collinear_solve(args):
    orbit = solve_collinear(args.m, cfg=_shooting(args))
    rec = _orbit_record(orbit)
    if args.json:
        _emit_json(document([rec], {"newton_tol": _shooting(args).newton_tol}))
        return EXIT_OK
    _print_pairs([("m", orbit.param), ("R", orbit.R), ("T/4", orbit.fundamental_time),
                  ("period", orbit.period), ("gamma_residual", rec["gamma_residual"]),
                  ("newton_residual", orbit.residual),
                  ("newton_iterations", rec["newton_iterations"])])
    return EXIT_OK


def _report_record(orbit, rep):
    rec = _orbit_record(orbit)
    rec.update(kappa=rep.kappa, kappa_direct=rep.kappa_direct, kappa_from_W=rep.kappa_from_W,
               stable=rep.stable, marginal=rep.marginal, K=rep.K)
    return rec


def cmd_stability(args):
    orbit = _orbit(args)
    rep = stability.analyze(orbit)
    rec = _report_record(orbit, rep)
    if args.json:
        _emit_json(document([rec], {"system": args.system}, rep.residuals))
    else:
        label = "m" if orbit.system == "collinear" else "period"
        _print_pairs([("system", orbit.system), (label, args.m if orbit.system == "collinear"
                                                 else orbit.period),
                      ("kappa", rep.kappa), ("kappa_from_W", rep.kappa_from_W),
                      ("stable", rep.stable), ("marginal", rep.marginal)]
                     + [(k, v) for k, v in rep.residuals.items()])
    if rep.failures:
        print(f"residual bounds missed: {', '.join(rep.failures)}", file=sys.stderr)
        return EXIT_RESIDUAL
    return EXIT_OK


def mass_grid(m_min, m_max, dm):
    if m_max < m_min:
        raise UsageError("--m-max must not be below --m-min")
    n = int(math.floor((m_max - m_min) / dm + 1e-9))
    return [round(m_min + i * dm, 12) for i in range(n + 1)]


def default_jobs():
    env = os.environ.get("SBC_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise UsageError("SBC_JOBS must be an integer") from None
        if jobs < 1:
            raise UsageError("SBC_JOBS must be positive")
        return jobs
    return os.cpu_count() or 1


def write_scan_csv(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SCAN_HEADER)
    for r in rows:
        writer.writerow([fmt(r.m), fmt(r.R), fmt(r.quarter_period), fmt(r.kappa),
                         fmt(r.stable), fmt(r.converged)])


def cmd_scan(args):
    grid = mass_grid(args.m_min, args.m_max, args.dm)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise UsageError("--jobs must be positive")
    rows = stability.mass_scan(grid, shooting=_shooting(args), jobs=jobs)
    if args.json:
        doc = document([r.__dict__ for r in rows],
                       {"m_min": args.m_min, "m_max": args.m_max, "dm": args.dm},
                       {"failed_rows": sum(not r.converged for r in rows)})
        _emit_json(doc, args.out)
    elif args.out:
        with open(args.out, "w", newline="") as fh:
            write_scan_csv(rows, fh)
    else:
        write_scan_csv(rows, sys.stdout)
    if args.plot_data:
        with open(args.plot_data, "w", newline="\n") as fh:
            fh.write("# m kappa\n")
            for r in rows:
                if r.converged:
                    fh.write(f"{fmt(r.m)} {fmt(r.kappa)}\n")
    found = stability.crossings(rows)
    failed = sum(not r.converged for r in rows)
    if found:
        where = ", ".join(f"m={m:.3f}" for m in found)
        print(f"kappa=1 crossings near {where}", file=sys.stderr)
    else:
        print("no kappa=1 crossings in range", file=sys.stderr)
    print(f"{len(rows)} rows, {failed} not converged", file=sys.stderr)
    return EXIT_OK


def cmd_critical(args):
    m = stability.critical_mass((args.m_lo, args.m_hi), shooting=_shooting(args))
    if args.json:
        _emit_json(document([{"critical_mass": m}], {"bracket": [args.m_lo, args.m_hi]}))
    else:
        print(f"critical_mass  {fmt(m)}")
    return EXIT_OK


def cmd_verify(args):
    orbit = _orbit(args)
    bounds = None
    if args.tol is not None:
        bounds = {k: args.tol for k in stability.DEFAULT_BOUNDS}
    rep = stability.verify_factorization(orbit, bounds=bounds)
    if args.json:
        _emit_json(document([_report_record(orbit, rep)], {"bounds": rep.bounds},
                            rep.residuals))
    else:
        width = max(len(k) for k in rep.residuals)
        print(f"{'residual':<{width}}  {'value':>10}  {'bound':>8}  status")
        for k, v in rep.residuals.items():
            status = "ok" if k not in rep.failures else "FAIL"
            print(f"{k:<{width}}  {v:10.3e}  {rep.bounds[k]:8.1e}  {status}")
    return EXIT_RESIDUAL if rep.failures else EXIT_OK


def trajectory_samples(orbit, samples, physical=False, cfg=ORBIT_CONFIG):
    """States at ``samples`` equally spaced times over one period.

    Returns an array with columns ``s, Q1, Q2, P1, P2`` and, with
    ``physical``, also ``t, x1, x2``.
    """
    if samples < 2:
        raise UsageError("--samples must be at least 2")
    s = np.linspace(0.0, orbit.period, samples)
    system = orbit.field
    if not physical:
        run = propagate(system, orbit.initial_state, orbit.period, cfg, s_eval=s)
        return np.column_stack([s, run.at])

    def augmented(t, y):
        out = np.empty(5)
        out[:4] = system(t, y[:4])
        out[4] = y[0] * y[0] * y[1] * y[1]
        return out

    y0 = np.append(orbit.initial_state, 0.0)
    run = propagate(augmented, y0, orbit.period, cfg, s_eval=s)
    to_phys = collinear.to_physical if orbit.system == "collinear" else planar.to_physical
    xs = np.array([to_phys(y)[:2] for y in run.at])
    return np.column_stack([s, run.at[:, :4], run.at[:, 4], xs])


def cmd_trajectory(args):
    orbit = _orbit(args)
    data = trajectory_samples(orbit, args.samples, args.physical)
    header = ["s", "Q1", "Q2", "P1", "P2"] + (["t", "x1", "x2"] if args.physical else [])
    if args.json:
        _emit_json(document([dict(zip(header, row)) for row in data],
                            {"system": orbit.system, "samples": args.samples}), args.out)
        return EXIT_OK
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in data:
            writer.writerow([fmt(v) for v in row])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _system_args(p, allow_zeta=True):
    p.add_argument("--system", choices=["collinear", "planar"], required=True)
    p.add_argument("--m", type=_positive("--m"), help="mass ratio (collinear)")
    p.add_argument("--period", type=_positive("--period"), default=8.0,
                   help="period of the planar orbit (default 8)")
    if allow_zeta:
        p.add_argument("--zeta", type=_positive("--zeta"),
                       help="planar: scale the orbit so that Q1(0) = Q2(0) = zeta")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a JSON document")
    common.add_argument("--newton-tol", type=_positive("--newton-tol"), default=None)

    parser = _Parser(prog="sbcstab", description="Periodic simultaneous binary collision "
                     "orbits and their linear stability.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    col = sub.add_parser("collinear", help="collinear family")
    col_sub = col.add_subparsers(dest="action", required=True, parser_class=_Parser)
    solve = col_sub.add_parser("solve", parents=[common], help="solve R(m) and T/4")
    solve.add_argument("--m", type=_positive("--m"), required=True)
    solve.set_defaults(func=cmd_collinear_solve)

    stab = sub.add_parser("stability", parents=[common], help="stability of one orbit")
    _system_args(stab)
    stab.set_defaults(func=cmd_stability)

    scan = sub.add_parser("scan", parents=[common], help="collinear mass scan")
    scan.add_argument("--m-min", type=_positive("--m-min"), required=True)
    scan.add_argument("--m-max", type=_positive("--m-max"), required=True)
    scan.add_argument("--dm", type=_positive("--dm"), required=True)
    scan.add_argument("--out", help="output path (default stdout)")
    scan.add_argument("--plot-data", help="also write two-column (m, kappa) data here")
    scan.add_argument("--jobs", type=int, default=None,
                      help="worker threads (default $SBC_JOBS or the CPU count)")
    scan.set_defaults(func=cmd_scan)

    crit = sub.add_parser("critical", parents=[common], help="refine a kappa = 1 crossing")
    crit.add_argument("--m-lo", type=_positive("--m-lo"), required=True)
    crit.add_argument("--m-hi", type=_positive("--m-hi"), required=True)
    crit.set_defaults(func=cmd_critical)

    ver = sub.add_parser("verify", parents=[common], help="full invariant suite")
    _system_args(ver)
    ver.add_argument("--tol", type=_positive("--tol"), default=None,
                     help="replace every residual bound with this value")
    ver.set_defaults(func=cmd_verify)

    traj = sub.add_parser("trajectory", parents=[common], help="sample one period")
    _system_args(traj)
    traj.add_argument("--samples", type=int, default=1000)
    traj.add_argument("--out", help="output path (default stdout)")
    traj.add_argument("--physical", action="store_true",
                      help="add physical time and positions (t, x1, x2)")
    traj.set_defaults(func=cmd_trajectory)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sbcstab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NewtonDiverged as exc:
        print(f"sbcstab: Newton iteration failed: {exc}", file=sys.stderr)
        return EXIT_NEWTON
    except ResidualExceeded as exc:
        print(f"sbcstab: {exc}", file=sys.stderr)
        return EXIT_RESIDUAL
    except (IntegrationError, SBCError, ZeroDivisionError) as exc:
        print(f"sbcstab: integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    except ValueError as exc:
        print(f"sbcstab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
