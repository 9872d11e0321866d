"""Command line interface: liequad {check, bracket, integrate, report}."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .brackets import bracket, bracket_intrinsic
from .config import SchemaError, SystemFile
from .expr import ExprError, Verdict, is_identically_zero
from .geometry import dynamics_field, motion_report
from .numint import IntegrationError, integrate_field
from .quadrature import QuadratureError
from .reduce import ReductionError, integrate_by_quadratures
from .symmetry import LevelSet, NoPointFound, check_reeb_identities, find_level_set_points
from .theorems import SCHEMA, ArityError, Status, TheoremReport, check_integrability

EXIT_OK, EXIT_FAILS, EXIT_UNKNOWN, EXIT_INPUT, EXIT_REDUCTION = 0, 1, 2, 3, 4
EXIT_BY_STATUS = {Status.HOLDS: EXIT_OK, Status.FAILS: EXIT_FAILS, Status.UNKNOWN: EXIT_UNKNOWN}


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _load(path) -> SystemFile:
    try:
        return SystemFile.load(path)
    except (SchemaError, ExprError) as exc:
        raise InputError(str(exc)) from None


def _report(sf: SystemFile) -> TheoremReport:
    if not sf.constants:
        raise InputError("the file defines no constants; add [[constants]] tables with f and alpha")
    try:
        return check_integrability(
            sf.system(), sf.functions(), sf.alphas(), seed=sf.seed, points=sf.points
        )
    except (ArityError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _check_one(path) -> tuple[dict, int]:
    sf = _load(path)
    rep = _report(sf)
    return rep.to_dict(), EXIT_BY_STATUS[rep.verdict]


def cmd_check(args) -> int:
    if args.all:
        files = sorted(Path(args.all).glob("*.toml"))
        if not files:
            raise InputError(f"no .toml files in {args.all}")
        out, code = {}, EXIT_OK
        for f in files:
            try:
                rep, c = _check_one(f)
            except InputError as exc:
                rep, c = {"schema": SCHEMA, "error": str(exc)}, EXIT_INPUT
            out[f.name] = {"exit_code": c, "report": rep}
            code = max(code, c)
        print(_dump({"schema": SCHEMA, "reports": out}))
        return code
    if not args.file:
        raise InputError("check needs a file or --all DIR")
    rep, code = _check_one(args.file)
    print(_dump(rep))
    return code


def cmd_bracket(args) -> int:
    sf = _load(args.file)
    geo = sf.phase_geometry()
    try:
        f, g = geo.scalar(args.f), geo.scalar(args.g)
    except (ExprError, ValueError) as exc:
        raise InputError(str(exc)) from None
    b = bracket(geo, f, g)
    z = is_identically_zero(b - bracket_intrinsic(geo, f, g))
    v = Verdict.zero(z)
    print(str(b))
    print(f"cross-check (intrinsic definition): {'OK' if v is Verdict.YES else v.value.upper()}")
    return {Verdict.YES: EXIT_OK, Verdict.NO: EXIT_FAILS}.get(v, EXIT_UNKNOWN)


def _initial_point(sf: SystemFile) -> list[float]:
    if sf.points:
        return list(sf.points[0])
    if sf.constants:
        M = LevelSet(sf.phase_geometry(), sf.functions(), sf.alphas())
        try:
            return find_level_set_points(M, count=1, seed=sf.seed)[0]
        except NoPointFound as exc:
            raise InputError(str(exc)) from None
    raise InputError("no initial point: give 'points' or constants defining a level set")


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_integrate(args) -> int:
    sf = _load(args.file)
    t_max = args.t_max if args.t_max is not None else sf.t_max
    h = args.h if args.h is not None else sf.h
    if not (t_max > 0 and h > 0):
        raise InputError("--t-max and --h must be positive")
    sysm = sf.system()
    chart = sysm.chart
    x0 = _initial_point(sf)
    t0 = x0[chart.index("t")] if "t" in chart else 0.0
    v = dynamics_field(sysm)
    rk = quadr = None
    if args.method in ("rk4", "both"):
        try:
            rk = integrate_field(v, x0, (t0, t0 + t_max), h)
        except IntegrationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_REDUCTION
        grid = rk.params
    else:
        n = int(np.floor(t_max / h + 1e-9))
        grid = t0 + h * np.arange(n + 1)
        if grid[-1] < t0 + t_max - 1e-12:
            grid = np.append(grid, t0 + t_max)
    if args.method in ("quadrature", "both"):
        rep = _report(sf)
        if rep.verdict is not Status.HOLDS:
            failing = [hp.name for hp in rep.hypotheses if hp.status is not Status.HOLDS]
            print(f"error: symmetry package not certified ({', '.join(failing)})", file=sys.stderr)
            return EXIT_REDUCTION
        try:
            quadr = integrate_by_quadratures(v, [u for _, u in rep.package], x0, grid)
        except (ReductionError, QuadratureError) as exc:
            print(f"error: reduction failed: {exc}", file=sys.stderr)
            return EXIT_REDUCTION
    out = sys.stdout
    out.write(",".join(["param", *chart.names]) + "\n")
    traj_states = quadr.states if quadr is not None else rk.states
    for s, x in zip(grid, traj_states):
        out.write(",".join([_fmt(s), *(_fmt(c) for c in x)]) + "\n")
    if rk is not None and quadr is not None:
        diff = float(np.max(np.abs(rk.states - quadr.states)))
        out.write(f"# max_norm_difference={diff!r}\n")
    return EXIT_OK


def cmd_report(args) -> int:
    sf = _load(args.file)
    sysm = sf.system()
    geo = sysm.geometry
    bundle: dict = {"schema": SCHEMA, "system": sf.to_dict(), "motion": motion_report(sysm)}
    code = EXIT_OK
    fs = sf.functions()
    bundle["reeb_identities"] = {
        c.f: [r.to_dict() for r in check_reeb_identities(sysm, f)] for c, f in zip(sf.constants, fs)
    }
    table = []
    for i, (ci, fi) in enumerate(zip(sf.constants, fs)):
        for cj, fj in list(zip(sf.constants, fs))[i + 1 :]:
            b = bracket(geo, fi, fj)
            ok = Verdict.zero(is_identically_zero(b - bracket_intrinsic(geo, fi, fj)))
            table.append({"f": ci.f, "g": cj.f, "bracket": str(b), "cross_check": ok.value})
    bundle["brackets"] = table
    if sf.constants:
        rep = _report(sf)
        bundle["theorem"] = rep.to_dict()
        code = EXIT_BY_STATUS[rep.verdict]
        if rep.verdict is Status.HOLDS:
            try:
                x0 = _initial_point(sf)
                res = integrate_by_quadratures(
                    dynamics_field(sysm), [u for _, u in rep.package], x0, [0.0]
                )
                bundle["reduction"] = {"schedule": res.schedule.describe()}
            except (ReductionError, QuadratureError, InputError) as exc:
                bundle["reduction"] = {"error": str(exc)}
    print(_dump(bundle))
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="liequad", description="Integrability by quadratures for Hamiltonian systems."
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="verify the integrability hypotheses (JSON report)")
    c.add_argument("file", nargs="?")
    c.add_argument("--all", metavar="DIR", help="check every .toml file in DIR")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bracket", help="bracket of two functions, cross-checked")
    b.add_argument("file")
    b.add_argument("f")
    b.add_argument("g")
    b.set_defaults(func=cmd_bracket)

    i = sub.add_parser("integrate", help="trajectory as CSV")
    i.add_argument("file")
    i.add_argument("--method", choices=("rk4", "quadrature", "both"), default="rk4")
    i.add_argument("--t-max", type=float, default=None)
    i.add_argument("--h", type=float, default=None)
    i.set_defaults(func=cmd_integrate)

    r = sub.add_parser("report", help="full diagnostic bundle (JSON)")
    r.add_argument("file")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
