"""Command-line front end.

Exit codes: 0 success, 2 invalid arguments, 3 a verification check failed,
1 a computation could not produce a result.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

from . import analysis, montecarlo
from .chain import build_ea_chain, expected_hitting_time
from .fitness import ConstructionError, alpha, as_fraction, build_dss, build_fitness

FORMAT_ENV = "STEPPINGSTONES_FORMAT"
MAX_RATIONAL_N = 14

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _rate(text: str) -> Fraction:
    try:
        value = as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a decimal or fraction: {text!r}")
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"rate must lie in (0, 1), got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _number(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_number(v) if not isinstance(v, float) or math.isinf(v) else repr(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands: each returns (json_obj, csv_header, csv_rows, exit_code)
# ---------------------------------------------------------------------------

def _fitness_from(args):
    return build_fitness(args.fitness, args.n, args.p, args.m)


def _backend(args):
    backend = args.backend
    if backend == "auto":
        backend = "rational" if args.n <= MAX_RATIONAL_N else "float"
    if backend == "rational" and args.n > MAX_RATIONAL_N:
        raise UsageError(f"rational backend is limited to n <= {MAX_RATIONAL_N} (got n={args.n})")
    return backend


def _rate_for(q: Fraction, backend: str):
    return q if backend == "rational" else float(q)


def cmd_dss_info(args):
    fitness, profile = build_dss(args.p, args.n)
    stone_of = {lvl: k for k, lvl in enumerate(profile.levels)}
    obj = {"profile": profile.to_dict(), "fitness": fitness.to_dict(), "alpha": alpha(args.p)}
    rows = [(i, v, stone_of.get(i, "")) for i, v in enumerate(fitness.values)]
    return obj, ["level", "fitness", "stone"], rows, EXIT_OK


def cmd_runtime(args):
    backend = _backend(args)
    fitness = _fitness_from(args)
    q = _rate_for(args.q, backend)
    value = expected_hitting_time(build_ea_chain(fitness, q, backend=backend))
    obj = {
        "fitness": fitness.name,
        "n": fitness.n,
        "q": str(args.q),
        "backend": backend,
        "E_T": _number(value),
        "overflow": isinstance(value, float) and math.isinf(value),
    }
    return obj, ["fitness", "n", "q", "backend", "E_T"], [(fitness.name, fitness.n, str(args.q), backend, value)], EXIT_OK


def cmd_curve(args):
    backend = _backend(args)
    fitness = _fitness_from(args)
    if not args.q_min < args.q_max:
        raise UsageError("--q-min must be below --q-max")
    step = (args.q_max - args.q_min) / (args.points - 1)
    grid = [args.q_min + i * step for i in range(args.points)]
    curve = analysis.runtime_curve(fitness, [_rate_for(q, backend) for q in grid], backend, args.workers)
    return curve.to_dict(), ["q", "E_T"], curve.rows(), EXIT_OK


def _search_params(args):
    return dict(
        q_min=float(args.q_min),
        q_max=float(args.q_max),
        coarse_points=args.coarse_points,
        tol=args.tol,
    )


def cmd_opt_rate(args):
    fitness = _fitness_from(args)
    res = analysis.optimal_rate(fitness, workers=args.workers, **_search_params(args))
    obj = res.to_dict(include_curve=args.curve)
    obj.update(fitness=fitness.name, n=fitness.n)
    header = ["q_star", "t_star", "bracket_lo", "bracket_hi", "refinement_iterations", "boundary_flag"]
    row = (res.q_star, float(res.t_star), res.bracket[0], res.bracket[1], res.refinement_iterations, res.boundary_flag)
    return obj, header, [row], EXIT_OK


def cmd_sweep(args):
    report = analysis.convergence_study(args.p, args.n, workers=args.workers, **_search_params(args))
    rows = [
        (r.n, r.q_star, None if r.t_star is None else float(r.t_star), r.normalized)
        for r in report.rows
    ]
    code = EXIT_OK if all(r.error is None for r in report.rows) else EXIT_FAILED
    return report.to_dict(include_curves=args.curve), ["n", "q_star", "t_star", "normalized"], rows, code


def cmd_simulate(args):
    fitness = _fitness_from(args)
    try:
        stats = montecarlo.estimate_runtime(fitness, args.q, args.runs, args.cap, args.seed, args.workers)
        code = EXIT_OK
    except montecarlo.EstimateUnavailable as exc:
        stats, code = exc.stats, EXIT_FAILED
    obj = stats.to_dict()
    obj.update(fitness=fitness.name, n=fitness.n, q=str(args.q))
    header = ["runs", "hits", "censored", "mean_steps", "standard_error", "cap", "seed"]
    row = [obj[k] for k in header]
    return obj, header, [row], code


def cmd_verify(args):
    checks = analysis.verify_analytic_lemmas(args.grid)
    checks.append(analysis.verify_needle_oracle())
    ok = all(c.passed for c in checks)
    obj = {"pass": ok, "checks": [c.to_dict() for c in checks]}
    rows = [
        (c.lemma_id, c.passed, c.worst_margin, " ".join(repr(x) for x in c.worst_point))
        for c in checks
    ]
    return obj, ["lemma", "pass", "worst_margin", "worst_point"], rows, EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default=None,
                        help=f"output format (default: ${FORMAT_ENV} or json)")
    common.add_argument("--output", "-o", default="-", help="output file, '-' for stdout")

    fitness = argparse.ArgumentParser(add_help=False)
    fitness.add_argument("--fitness", choices=("dss", "onemax", "needle", "jump"), required=True)
    fitness.add_argument("--n", type=int, required=True)
    fitness.add_argument("--p", type=_rate, help="DSS target rate")
    fitness.add_argument("--m", type=int, help="Jump gap width")

    backend = argparse.ArgumentParser(add_help=False)
    backend.add_argument("--backend", choices=("auto", "rational", "float"), default="auto",
                         help="auto: rational for n <= 14, float otherwise")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--q-min", type=_rate, default=Fraction(1, 1000))
    search.add_argument("--q-max", type=_rate, default=Fraction(999, 1000))
    search.add_argument("--coarse-points", type=int, default=256)
    search.add_argument("--tol", type=float, default=1e-5)
    search.add_argument("--curve", action="store_true", help="include the coarse curve (json only)")

    workers = argparse.ArgumentParser(add_help=False)
    workers.add_argument("--workers", type=int, default=None, help="worker processes")

    parser = _Parser(prog="steppingstones", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dss-info", parents=[common], help="DistantSteppingStones construction")
    p.add_argument("--p", type=_rate, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_dss_info)

    p = sub.add_parser("runtime", parents=[common, fitness, backend], help="exact E[T(q)]")
    p.add_argument("--q", type=_rate, required=True)
    p.set_defaults(func=cmd_runtime)

    p = sub.add_parser("curve", parents=[common, fitness, backend, workers], help="E[T(q)] over a q grid")
    p.add_argument("--q-min", type=_rate, default=Fraction(1, 100))
    p.add_argument("--q-max", type=_rate, default=Fraction(99, 100))
    p.add_argument("--points", type=int, default=99)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("opt-rate", parents=[common, fitness, search, workers], help="optimal mutation rate")
    p.set_defaults(func=cmd_opt_rate)

    p = sub.add_parser("sweep", parents=[common, search, workers], help="optimal rate of DSS_p versus n")
    p.add_argument("--p", type=_rate, required=True)
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated, e.g. 10,20,30")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common, fitness, workers], help="Monte Carlo runtime estimate")
    p.add_argument("--q", type=_rate, required=True)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cap", type=int, default=montecarlo.DEFAULT_CAP)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="inequality and Needle oracle checks")
    p.add_argument("--grid", type=int, default=1000)
    p.set_defaults(func=cmd_verify)
    return parser


def _format_hint(argv) -> str:
    for i, tok in enumerate(argv):
        if tok == "--format" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--format="):
            return tok.split("=", 1)[1]
    return os.environ.get(FORMAT_ENV, "json")


def _emit(text: str, path: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    fmt = _format_hint(argv)
    try:
        args = build_parser().parse_args(argv)
        fmt = args.format or os.environ.get(FORMAT_ENV, "json")
        if fmt not in ("json", "csv"):
            raise UsageError(f"unsupported output format {fmt!r}")
        obj, header, rows, code = args.func(args)
    except (UsageError, ValueError, TypeError, ConstructionError) as exc:
        return _fail(exc, EXIT_USAGE, fmt)
    except (analysis.NoMinimumError, ArithmeticError) as exc:
        return _fail(exc, EXIT_FAILED, fmt)
    text = dump_json(obj) if fmt == "json" else dump_csv(header, rows)
    _emit(text, args.output)
    return code


def _fail(exc: Exception, code: int, fmt: str) -> int:
    print(f"error: {exc}", file=sys.stderr)
    if fmt == "json":
        sys.stdout.write(dump_json({"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}))
    return code


if __name__ == "__main__":
    sys.exit(main())
