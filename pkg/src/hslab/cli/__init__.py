"""Command-line front end.

Exit codes: 0 success, 2 precondition failure, 3 a verification check
failed, 64 unknown command.
"""

from __future__ import annotations

import argparse
import contextlib
import functools
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .. import atoms, bvp, calculus, exponents, holo, quasinorms
from ..exponents import Exponent
from ..halfspace import GridSpec, WhitneyParameter
from . import io, suites

EXIT_OK, EXIT_PRECONDITION, EXIT_TOLERANCE, EXIT_USAGE = 0, 2, 3, 64
COMMANDS = ("regions", "norm", "atoms", "calc", "solve", "layer", "probe", "verify")


class PreconditionError(Exception):
    pass


def _number(text: str):
    """Parse ``1/2``, ``-0.5``, ``inf`` keeping rationals exact."""
    text = text.strip()
    if text.lower() in ("inf", "infinity"):
        return float("inf")
    try:
        return Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _exponent(args, n: int) -> Exponent:
    if args.j is not None:
        return Exponent.from_views(args.j, args.theta, n)
    if args.p == float("inf"):
        return Exponent.infinite(args.s, args.alpha, n)
    return Exponent.finite(args.p, args.s, n)


def _add_exponent_flags(p):
    g = p.add_argument_group("exponent (either p, s or j, theta)")
    g.add_argument("--p", type=_number, default=Fraction(2))
    g.add_argument("--s", type=_number, default=Fraction(0))
    g.add_argument("--alpha", type=_number, default=Fraction(0), help="only for p = inf")
    g.add_argument("--j", type=_number)
    g.add_argument("--theta", type=_number, default=Fraction(0))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hslab", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys fill in command options")
    parser.add_argument("--seed", type=int, default=0, help="seed for every random choice (u64)")
    parser.add_argument("--out", help="output directory (default: stdout only)")
    # the same options after the command name; SUPPRESS keeps the global value when absent
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.add_parser = functools.partial(sub.add_parser, parents=[common])

    r = sub.add_parser("regions", help="exponent regions as CSV")
    kind = r.add_mutually_exclusive_group()
    kind.add_argument("--imax", action="store_true", help="maximal region (default)")
    kind.add_argument("--imin", action="store_true", help="minimal region")
    kind.add_argument("--decay", type=_number, metavar="LAMBDA", help="decay region")
    r.add_argument("--heart", action="store_true", help="apply the heart-dual")
    r.add_argument("--n", type=int, default=1)
    r.add_argument("--eps", type=_number, default=Fraction(0))
    r.add_argument("--eps-prime", type=_number, default=Fraction(0))

    nm = sub.add_parser("norm", help="quasinorm of an HSF field")
    nm.add_argument("--field", required=False)
    nm.add_argument("--space", choices=("tent", "z", "z_dyadic", "l2s"), default="tent")
    nm.add_argument("--k", type=int, default=1, help="Whitney grid offset for z_dyadic")
    _add_exponent_flags(nm)

    a = sub.add_parser("atoms", help="Z-space atomic decomposition of an HSF field")
    a.add_argument("--field")
    a.add_argument("--k", type=int, default=1)
    _add_exponent_flags(a)

    c = sub.add_parser("calc", help="apply a holomorphic function of DB to a boundary field")
    c.add_argument("--function", help="catalogue string such as '4*bump:1,0@2' (default sgp)")
    c.add_argument("--kind", choices=("DB", "BD", "D"), default="DB")

    for name, text in (("solve", "solve a boundary value problem"),
                       ("layer", "layer potentials at height t"),
                       ("probe", "well-posedness probe")):
        p = sub.add_parser(name, help=text)
        if name == "layer":
            p.add_argument("--t", type=float, help="level for the layer potentials (default 0.5)")

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--suite", choices=suites.SUITES)
    v.add_argument("--all", action="store_true")
    v.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


# ---------------------------------------------------------------------------
# configuration


def _load_config(path) -> tuple:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    if not p.exists():
        raise PreconditionError(f"config file {path} does not exist")
    with open(p) as fh:
        return json.load(fh), p.parent


def _resolve(base: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _grid(cfg: dict) -> GridSpec:
    if "grid" not in cfg:
        raise PreconditionError("config needs a 'grid' object")
    return GridSpec(**cfg["grid"])


def _coefficients(cfg: dict, base: Path, spec: GridSpec):
    ref = cfg.get("coefficients", "identity")
    if ref == "identity":
        return calculus.CoefficientMatrix.identity(spec.m, spec.n)
    if isinstance(ref, dict):
        return io.coefficients_from_dict(ref)
    return io.read_coefficients(_resolve(base, ref))


def _datum(cfg: dict, base: Path, spec: GridSpec, channels) -> np.ndarray:
    if "datum" not in cfg:
        raise PreconditionError("config needs a 'datum' HSF path")
    header, values = io.read_boundary(_resolve(base, cfg["datum"]))
    if (header["n"], header["Nx"]) != (spec.n, spec.Nx):
        raise PreconditionError("datum does not match the grid")
    if values.shape[-1] not in channels:
        raise PreconditionError(f"datum has {values.shape[-1]} channels, expected one of {channels}")
    return values


def _setup(cfg: dict, base: Path) -> bvp.BVPSetup:
    spec = _grid(cfg)
    A = _coefficients(cfg, base, spec)
    exp = cfg.get("exponent")
    exponent = Exponent.from_views(Fraction(str(exp["j"])), Fraction(str(exp["theta"])), spec.n) if exp else None
    if exponent is not None and not exponents.region_imax(spec.n).contains(exponent):
        print(f"warning: exponent {exponent} lies outside the maximal region", file=sys.stderr)
    return bvp.BVPSetup(A, spec, cfg.get("problem", "regularity"), exponent)


def _emit(args, name: str, report: dict):
    text = io.dumps(report)
    if args.out:
        io.atomic_write(Path(args.out) / name, text.encode("utf-8"))
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_regions(args, cfg, base) -> int:
    if args.imin:
        region = exponents.region_imin(args.n, args.eps, args.eps_prime)
        name = "imin"
    elif args.decay is not None:
        region = exponents.region_decay(args.n, args.decay)
        name = "decay"
    else:
        region = exponents.region_imax(args.n)
        name = "imax"
    if args.heart:
        region = exponents.region_heart(region)
        name += "_heart"
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        exponents.region_export(region, Path(args.out) / f"{name}_n{args.n}.csv")
    sys.stdout.write("\n".join(exponents.region_csv_lines(region)) + "\n")
    return EXIT_OK


def _field_path(args, cfg, base) -> Path:
    ref = args.field or cfg.get("field")
    if ref is None:
        raise PreconditionError("no --field given")
    return _resolve(base, ref)


def cmd_norm(args, cfg, base) -> int:
    f = io.read_field(_field_path(args, cfg, base))
    p = _exponent(args, f.spec.n)
    if args.space == "tent":
        rep = quasinorms.tent_norm(f, p)
    elif args.space == "z":
        rep = quasinorms.z_norm(f, p)
    elif args.space == "z_dyadic":
        rep = quasinorms.z_norm_dyadic(f, p, args.k)
    else:
        rep = quasinorms.l2s_norm(f, p.theta)
    _emit(args, "norm.json", rep.to_dict())
    return EXIT_OK


def cmd_atoms(args, cfg, base) -> int:
    f = io.read_field(_field_path(args, cfg, base))
    p = _exponent(args, f.spec.n)
    dec = atoms.z_decompose(f, p, args.k, WhitneyParameter())
    rows = ["cube,q,t," + ",".join(f"x{i}" for i in range(f.spec.n)) + ",coefficient"]
    for row in dec.table():
        rows.append(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row))
    if args.out:
        out = Path(args.out)
        io.atomic_write(out / "coefficients.csv", ("\n".join(rows) + "\n").encode("utf-8"))
        for idx in sorted(dec.atoms):
            io.write_field(out / "atoms" / f"atom_{idx:06d}.hsf", dec.atom(idx))
    report = {"atoms": len(dec.atoms), "k": dec.k, "coefficient_norm": dec.coefficient_norm(),
              "uncovered_mass": dec.uncovered_mass, "exponent": {"j": float(p.j), "theta": float(p.theta)}}
    _emit(args, "atoms.json", report)
    return EXIT_OK


def cmd_calc(args, cfg, base) -> int:
    spec = _grid(cfg)
    B = calculus.hat_transform(_coefficients(cfg, base, spec))
    op = calculus.build_op(spec, B, args.kind)
    fn = holo.parse(args.function or cfg.get("function", "sgp"))
    datum = _datum(cfg, base, spec, (op.N,))
    result = op.apply(op.fn(fn), datum)
    if args.out:
        io.write_boundary(Path(args.out) / "result.hsf", spec, result)
    report = {"function": fn.name, "kind": args.kind, "spectral_angle": op.angle(),
              "defective_frequencies": int(op.defective.sum()),
              "result_l2": float(np.sqrt((np.abs(result) ** 2).sum() * spec.cell_volume))}
    _emit(args, "calc.json", report)
    return EXIT_OK


def cmd_solve(args, cfg, base) -> int:
    setup = _setup(cfg, base)
    datum = _datum(cfg, base, setup.spec, (setup.m, setup.op.N))
    if datum.shape[-1] == setup.m:
        f0 = bvp.solve_boundary_problem(setup, datum)
    else:
        f0 = datum
    F = bvp.cauchy_solve(setup, f0)
    pot = bvp.recover_u(setup, f0)
    _, gap = bvp.trace_recover(setup, F)
    corr = float(np.abs(pot.gradient.values - F.values).max() / max(np.abs(F.values).max(), 1e-300))
    if args.out:
        out = Path(args.out)
        io.write_field(out / "conormal_gradient.hsf", F)
        io.write_field(out / "potential.hsf", pot.u)
    report = {"problem": setup.problem, "kappa": setup.kappa,
              "residual": bvp.cauchy_residual(setup, f0), "trace_round_trip": gap,
              "correspondence": corr}
    _emit(args, "solve.json", report)
    return EXIT_OK


def cmd_layer(args, cfg, base) -> int:
    setup = _setup(cfg, base)
    f = _datum(cfg, base, setup.spec, (setup.m,))
    t = float(args.t if args.t is not None else cfg.get("t", 0.5))
    S = bvp.single_layer(setup, f, t)
    D = bvp.double_layer(setup, f, t)
    if args.out:
        out = Path(args.out)
        io.write_boundary(out / "single_layer.hsf", setup.spec, S)
        io.write_boundary(out / "double_layer.hsf", setup.spec, D)
    _emit(args, "layer.json", {"t": t, "jumps": bvp.jump_errors(setup, f)})
    return EXIT_OK


def cmd_probe(args, cfg, base) -> int:
    setup = _setup(cfg, base)
    report = {}
    for label, s in (("A", setup), ("A_adjoint", setup.adjoint())):
        for comp in ("perp", "par"):
            r = bvp.wp_probe(s, comp, setup.exponent)
            r.pop("min_singular", None)
            report[f"{label}_{comp}"] = r
        report[f"{label}_sign_diagonal_blocks"] = list(bvp.sign_blocks(s.op))
    _emit(args, "probe.json", report)
    return EXIT_OK


def cmd_verify(args, cfg, base) -> int:
    if not args.all and not args.suite:
        raise PreconditionError("verify needs --suite NAME or --all")
    names = suites.SUITES if args.all else (args.suite,)
    guard = calculus.fault_injection() if args.inject_fault else contextlib.nullcontext()
    reports = []
    with guard:
        for name in names:
            rep = suites.run_suite(name, args.seed)
            reports.append(rep)
            if args.out:
                io.write_json(Path(args.out) / f"verify_{name}.json", rep)
    summary = {"seed": args.seed, "suites": {r["suite"]: r["passed"] for r in reports},
               "failed": [f"{r['suite']}.{c['name']}" for r in reports
                          for c in r["checks"] if c["status"] != "pass"]}
    if args.out:
        io.write_json(Path(args.out) / "verify_summary.json", summary)
    for r in reports:
        for c in r["checks"]:
            sys.stdout.write(f"{c['status'].upper():4s} {r['suite']}.{c['name']} "
                             f"measured={c['measured']!r} tol={c['tolerance']!r}\n")
    return EXIT_OK if not summary["failed"] else EXIT_TOLERANCE


_DISPATCH = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def _thread_limit():
    cap = os.environ.get("HSH_THREADS")
    if not cap:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(cap))


def dispatch(argv) -> int:
    parser = build_parser()
    # the command is the first bare word not consumed by a global option
    skip = {"--config", "--seed", "--out"}
    cmd = None
    it = iter(argv)
    for a in it:
        if a in skip:
            next(it, None)
        elif not a.startswith("-"):
            cmd = a
            break
    if cmd is None and ("-h" in argv or "--help" in argv):
        parser.print_help()
        return EXIT_OK
    if cmd not in COMMANDS:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"hslab: unknown command {cmd!r}; choose from {', '.join(COMMANDS)}\n")
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PRECONDITION
    try:
        cfg, base = _load_config(args.config)
        with _thread_limit():
            return _DISPATCH[args.command](args, cfg, base)
    except (PreconditionError, ValueError, KeyError, OSError, io.FormatError) as exc:
        sys.stderr.write(f"hslab: {exc}\n")
        return EXIT_PRECONDITION


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
