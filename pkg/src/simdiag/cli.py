"""``simdiag`` command-line entry point.

Subcommands reproduce the experiments (``test1``, ``test2``, ``wilkinson``,
``qr-compare``) or refine a user-supplied decomposition (``refine``).  Output
is CSV or JSON, written to stdout or to ``--out``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .bench import RunConfig, run_qr_compare, run_test1, run_test2, run_wilkinson
from .diag import diag_solve
from .errors import SimdiagError
from .mp import (format_sci, load_matrix, matrix_from_json, spectrum_from_json,
                 spectrum_to_json)
from .qr import QR_BASIC_THRESHOLD


def digits_for(prec: int) -> int:
    """Significant digits printed for values computed at ``prec`` bits."""
    return max(6, prec // 32)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _trace_output(trace, fmt, prec, extra=None) -> str:
    d = digits_for(prec)
    if fmt == "csv":
        return trace.to_csv(d)
    obj = trace.to_dict(d)
    if extra:
        obj.update(extra)
    return json.dumps(obj, indent=2) + "\n"


def _roots_csv(roots, digits) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "root_re", "root_im"])
    for k, v in enumerate(roots.values, 1):
        w.writerow([k, format_sci(v.real, digits), format_sci(v.imag, digits)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_test(args) -> int:
    cfg = RunConfig(args.command, n=args.n, perturb_exp=args.perturb_exp, field=args.field,
                    seed=args.seed, precision_bits=args.prec, iters=args.iters,
                    output_format=args.format)
    trace = run_test1(cfg) if args.command == "test1" else run_test2(cfg)
    _emit(_trace_output(trace, args.format, args.prec), args.out)
    return 0


def cmd_wilkinson(args) -> int:
    roots, trace = run_wilkinson(args.n, args.prec, args.iters, args.route, args.bootstrap)
    d = digits_for(args.prec)
    if args.format == "csv":
        text = trace.to_csv(d) + "\n" + _roots_csv(roots, d)
    else:
        text = _trace_output(trace, "json", args.prec, {"roots": spectrum_to_json(roots)["values"]})
    _emit(text, args.out)
    return 0


def cmd_qr_compare(args) -> int:
    rows = run_qr_compare(args.min_n, args.max_n, args.trials, args.seed, args.threshold,
                          max_iter=args.max_iter)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "trial", "iters_alg1", "iters_alg3"])
        w.writerows(rows)
        text = buf.getvalue()
    else:
        both = [r for r in rows if r.iters_alg1 >= 0 and r.iters_alg3 >= 0]
        text = json.dumps({
            "threshold": args.threshold, "seed": args.seed,
            "rows": [r._asdict() for r in rows],
            "alg3_not_worse_fraction": (sum(r.iters_alg3 <= r.iters_alg1 for r in both) / len(both))
            if both else None,
        }, indent=2) + "\n"
    _emit(text, args.out)
    return 0


def cmd_refine(args) -> int:
    M = load_matrix(args.matrix)
    init = json.loads(Path(args.init).read_text())
    try:
        E, F = matrix_from_json(init["E"]), matrix_from_json(init["F"])
        sigma = spectrum_from_json(init["Sigma"])
    except KeyError as exc:
        raise SimdiagError(f"init file lacks key {exc}") from None
    prec = args.prec
    state, trace, _ = diag_solve(M.at_precision(prec), E.at_precision(prec), F.at_precision(prec),
                                 sigma.at_precision(prec), max_iter=args.iters)
    extra = {"Sigma": spectrum_to_json(state.Sigma)["values"]}
    _emit(_trace_output(trace, args.format, prec, extra), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simdiag", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    for name, helptext in (("test1", "single matrix: perturbed E Sigma E^-1"),
                           ("test2", "two matrices: perturbed common diagonalizer")):
        t = sub.add_parser(name, help=helptext)
        t.add_argument("--n", type=int, default=10)
        t.add_argument("--perturb-exp", type=int, default=6)
        t.add_argument("--field", choices=("real", "complex"), default="real")
        t.add_argument("--seed", type=int, default=0)
        t.add_argument("--prec", type=int, default=1024)
        t.add_argument("--iters", type=int, default=7)
        t.add_argument("--format", choices=("csv", "json"), default="csv")
        t.add_argument("--out")
        t.set_defaults(func=cmd_test)

    w = sub.add_parser("wilkinson", help="roots of prod (x - i) as refined eigenvalues")
    w.add_argument("--n", type=int, default=20)
    w.add_argument("--prec", type=int, default=1024)
    w.add_argument("--iters", type=int, default=4)
    w.add_argument("--route", choices=("companion", "arrowhead"), default="arrowhead")
    w.add_argument("--bootstrap", choices=("lapack", "qr"), default="lapack")
    w.add_argument("--format", choices=("csv", "json"), default="csv")
    w.add_argument("--out")
    w.set_defaults(func=cmd_wilkinson)

    q = sub.add_parser("qr-compare", help="QR iteration counts with and without the Newton test")
    q.add_argument("--min-n", type=int, default=3)
    q.add_argument("--max-n", type=int, default=20)
    q.add_argument("--trials", type=int, default=10)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--threshold", type=float, default=QR_BASIC_THRESHOLD)
    q.add_argument("--max-iter", type=int, default=20_000)
    q.add_argument("--format", choices=("csv", "json"), default="csv")
    q.add_argument("--out")
    q.set_defaults(func=cmd_qr_compare)

    r = sub.add_parser("refine", help="refine a given decomposition of a matrix")
    r.add_argument("--matrix", required=True)
    r.add_argument("--init", required=True, help="JSON object with E, F and Sigma")
    r.add_argument("--prec", type=int, default=1024)
    r.add_argument("--iters", type=int, default=8)
    r.add_argument("--format", choices=("csv", "json"), default="json")
    r.add_argument("--out")
    r.set_defaults(func=cmd_refine)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SimdiagError, ValueError, ArithmeticError, OSError) as exc:
        print(f"simdiag {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
