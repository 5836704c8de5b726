"""Command-line interface.

Exit codes: 0 on success or when the checked property holds, 1 on a violation
or a Neither classification, 2 on usage, parse or validation errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Sequence, TextIO

import numpy as np

from . import expr, funcs, harness, means, measure, spd_core

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2
SEED_ENV = "OPMEANS_SEED"


class UsageError(Exception):
    pass


def format_number(v: float) -> str:
    """Decimal text with 17 significant digits (``3`` -> ``3.0000000000000000``)."""
    v = float(v)
    if not math.isfinite(v):
        return repr(v)
    if v == 0:
        return "0.0000000000000000"
    exponent = math.floor(math.log10(abs(v)))
    if -5 <= exponent < 16:
        text = f"{v:.{max(16 - exponent, 0)}f}"
        # log10 can misjudge the exponent right at a power of ten
        digits = len(text.lstrip("-").replace(".", "").lstrip("0"))
        if digits != 17:
            text = f"{v:.{max(16 - exponent + (17 - digits), 0)}f}"
        return text
    return f"{v:.16e}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _emit_json(doc, out: TextIO) -> None:
    out.write(json.dumps(_jsonable(doc), allow_nan=False) + "\n")


def resolve_function(spec: str) -> funcs.RepresentingFunction:
    """Turn ``name[:p1,p2]``, ``expr:"<text>"`` or ``measure:<file>,t=<t>`` into a function."""
    spec = spec.strip()
    if spec.startswith("expr:"):
        text = spec[len("expr:"):].strip()
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
            text = text[1:-1]
        return expr.parse_function(text)
    if spec.startswith("measure:"):
        body = spec[len("measure:"):]
        path, sep, t_text = body.rpartition(",t=")
        if not sep:
            raise UsageError("measure spec must look like measure:<file>,t=<t>")
        mu = measure.DiscreteMeasure.load(path)
        return measure.as_function(mu, float(t_text), name=f"measure:{path},t={t_text}")
    return funcs.builtin_from_spec(spec)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    values: list[int] = []
    try:
        for part in text.split(","):
            lo, sep, hi = part.partition("-")
            values.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or ranges like 2-6, got {text!r}") from None
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a single JSON document")

    func = argparse.ArgumentParser(add_help=False)
    func.add_argument("--func", required=True, help='name[:p1,p2], expr:"<text>" or measure:<file>,t=<t>')

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid-points", type=int, default=funcs.GRID_POINTS)
    grid.add_argument("--grid-lo", type=float, default=funcs.GRID_LO)
    grid.add_argument("--grid-hi", type=float, default=funcs.GRID_HI)

    trials = argparse.ArgumentParser(add_help=False)
    trials.add_argument("--trials", type=int, default=500)
    trials.add_argument("--dims", type=_int_list, default=[2, 3, 4, 5, 6], help="e.g. 2-6 or 2,4,8")
    trials.add_argument("--r", type=_float_list, default=[1.5, 2.0, 3.0], help="comma-separated exponents >= 1")
    trials.add_argument("--seed", type=int, default=0, help=f"overridden by ${SEED_ENV}")
    trials.add_argument("--loewner-tol", type=float, default=spd_core.LOEWNER_TOL)
    trials.add_argument("--eig-log-range", type=_float_list, default=[-1.0, 1.0], help="lo,hi in log10")
    trials.add_argument("--workers", type=int, default=1)

    parser = _Parser(prog="opmeans", description="Operator means, power inequalities and their checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", parents=[common, func, grid], help="PMI / PMD / Boundary / Neither")
    p.add_argument("--tol", type=float, default=funcs.CLASSIFY_TOL)

    p = sub.add_parser("eval", parents=[common], help="evaluate a function at points")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--func")
    src.add_argument("--measure", help="measure JSON file; integrates the p_t kernel")
    p.add_argument("--kernel-t", type=float, default=0.0, help="kernel exponent used with --measure")
    p.add_argument("--x", type=_float_list, required=True, help="comma-separated points")

    p = sub.add_parser("matmean", parents=[common, func], help="mean of two matrices")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--psd", action="store_true", help="allow semi-definite inputs")

    p = sub.add_parser("verify", parents=[common, func, trials], help="randomized matrix checks")
    p.add_argument("property", choices=["ando-hiai", "dual", "axioms"])

    sub.add_parser("axioms", parents=[common, func, trials], help="same as verify axioms")

    p = sub.add_parser("fit", parents=[common, func, grid], help="recover a discrete measure")
    p.add_argument("--kernel-t", type=float, required=True)
    p.add_argument("--atoms", type=int, default=64)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--out", help="write the measure JSON here")

    p = sub.add_parser("scan", parents=[common, func, grid], help="f(x)^r - f(x^r) on the grid")
    p.add_argument("--r", type=_float_list, default=[1.5, 2.0, 5.0])
    p.add_argument("--csv", action="store_true", help="CSV with header x,r,gap (the default)")
    return parser


def _grid(args) -> np.ndarray:
    return funcs.default_grid(args.grid_points, args.grid_lo, args.grid_hi)


def _config(args) -> harness.TrialConfig:
    seed = args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            seed = int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if len(args.eig_log_range) != 2:
        raise UsageError("--eig-log-range takes exactly two numbers")
    return harness.TrialConfig(
        trials=args.trials,
        dims=tuple(args.dims),
        r_values=tuple(args.r),
        seed=seed,
        loewner_tol=args.loewner_tol,
        eig_log_range=tuple(args.eig_log_range),
    )


def _cmd_classify(args, out, err) -> int:
    f = resolve_function(args.func)
    c = funcs.classify(f, _grid(args), args.tol)
    doc = {"function": f.label, "weight": f.weight, **c.to_dict()}
    if args.json:
        _emit_json(doc, out)
    else:
        out.write(f"{c.verdict.value}\n")
        out.write(f"weight {format_number(f.weight)}\n")
        out.write(f"max_violation_pmi {format_number(c.max_violation_pmi)}\n")
        out.write(f"max_violation_pmd {format_number(c.max_violation_pmd)}\n")
    return EXIT_VIOLATION if c.verdict is funcs.Verdict.NEITHER else EXIT_OK


def _cmd_eval(args, out, err) -> int:
    xs = np.asarray(args.x, dtype=float)
    if np.any(~(xs > 0)):
        raise UsageError("--x values must be positive")
    if args.measure:
        mu = measure.DiscreteMeasure.load(args.measure)
        values = np.atleast_1d(measure.integrate_kernel(mu, args.kernel_t, xs))
        name = f"measure:{args.measure},t={args.kernel_t!r}"
    else:
        f = resolve_function(args.func)
        values = np.atleast_1d(f.checked(xs))
        name = f.label
    if args.json:
        _emit_json({"function": name, "x": xs, "value": values}, out)
    else:
        for v in values:
            out.write(format_number(v) + "\n")
    return EXIT_OK


def _cmd_matmean(args, out, err) -> int:
    f = resolve_function(args.func)
    a = spd_core.load_matrix(args.a)
    b = spd_core.load_matrix(args.b)
    if args.psd:
        res = means.mean_psd(f, a, b)
        m, gap = res.matrix, res.gap
        err.write(f"epsilon-schedule Cauchy gap {format_number(gap)}\n")
    else:
        m = means.mean(f, a, b)
    _emit_json(spd_core.matrix_to_json(m), out)
    return EXIT_OK


def _describe(v: harness.Violation | None) -> str:
    if v is None:
        return "none"
    r = "" if v.r is None else f" r={format_number(v.r)}"
    return f"trial={v.trial} dim={v.dim}{r} check={v.check} excess={format_number(v.excess)}"


def _cmd_verify(args, out, err, prop: str) -> int:
    f = resolve_function(args.func)
    cfg = _config(args)
    run = {
        "ando-hiai": harness.verify_ando_hiai,
        "dual": harness.verify_dual_ando_hiai,
        "axioms": harness.verify_axioms,
    }[prop]
    report = run(f, cfg, workers=args.workers)
    err.write(f"elapsed {report.elapsed:.3f}s\n")
    if args.json:
        _emit_json(report.to_json(), out)
    else:
        out.write(f"{report.kind} {report.function} ({report.mode})\n")
        out.write(f"total {report.total}\n")
        out.write(f"violations {report.violations}\n")
        out.write(f"worst_excess {format_number(report.worst_excess)}\n")
        out.write(f"worst_case {_describe(report.worst_case)}\n")
        if report.first_violation is not None:
            out.write(f"counterexample {_describe(report.first_violation)}\n")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def _cmd_fit(args, out, err) -> int:
    import warnings

    f = resolve_function(args.func)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = measure.fit_measure(f, args.kernel_t, args.atoms, _grid(args), args.ridge)
    if not res.certified:
        err.write(f"warning: {f.label} is not in C_{args.kernel_t:g} on the grid\n")
    if args.out:
        res.measure.save(args.out)
    doc = {
        "function": f.label,
        "kernel_t": args.kernel_t,
        "residual": res.residual,
        "first_moment": measure.first_moment(res.measure),
        "certified": res.certified,
        "kkt": res.kkt,
        "measure": res.measure.to_json(),
    }
    if args.json:
        _emit_json(doc, out)
    else:
        out.write(f"residual {format_number(res.residual)}\n")
        out.write(f"first_moment {format_number(doc['first_moment'])}\n")
        out.write(f"atoms {len(res.measure.atoms)}\n")
        out.write(f"certified {str(res.certified).lower()}\n")
    return EXIT_OK if res.certified else EXIT_VIOLATION


def _cmd_scan(args, out, err) -> int:
    f = resolve_function(args.func)
    rows = harness.scalar_scan(f, args.r, _grid(args))
    if args.json:
        _emit_json({"function": f.label, "rows": [list(r) for r in rows]}, out)
    else:
        harness.write_scan_csv(rows, out)
    return EXIT_OK


def run(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    """Run the CLI on ``argv`` and return the exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "verify":
            return _cmd_verify(args, out, err, args.property)
        if args.command == "axioms":
            return _cmd_verify(args, out, err, "axioms")
        handler = {
            "classify": _cmd_classify,
            "eval": _cmd_eval,
            "matmean": _cmd_matmean,
            "fit": _cmd_fit,
            "scan": _cmd_scan,
        }[args.command]
        return handler(args, out, err)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_ERROR
    except (
        ValueError,
        ArithmeticError,
        OSError,
        KeyError,
        measure.FitError,
        measure.QuadratureError,
        RuntimeError,
    ) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
