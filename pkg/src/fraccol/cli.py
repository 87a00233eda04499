"""Command-line interface.

Exit codes: 0 success, 1 certificate failure (or singular step), 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .collocation import FAMILIES, parse_points
from .config import load_config
from .driver import format_csv, run_problem, solution_rows, spectrum_rows
from .errors import CertificateError, ConfigError, ConvergenceError, DomainError, SingularMatrixError
from .wellposed import MAX_SUBSET_M, charpoly_subsets, scan, spectrum, summarize_scan

EXIT_OK, EXIT_CERT, EXIT_USAGE = 0, 1, 2
SPECTRUM_HEADER = ("family", "m", "alpha", "index", "re", "im", "is_real", "is_real_negative")
DEFAULT_M_CAP = 20


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _alpha_values(args):
    if args.alpha_sweep is not None:
        n = args.alpha_sweep
        if n < 1:
            raise DomainError("--alpha-sweep needs n >= 1")
        return [i / (n + 1) for i in range(1, n + 1)]
    if args.alpha is None:
        raise DomainError("one of --alpha or --alpha-sweep is required")
    return [args.alpha]


def _threads():
    raw = os.environ.get("FRACCOL_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"FRACCOL_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def cmd_spectrum(args) -> int:
    rule = parse_points(args.points, args.m)
    reports = [spectrum(rule, a) for a in _alpha_values(args)]
    if args.out and args.out.endswith(".json"):
        doc = [
            {
                "family": r.family,
                "m": r.m,
                "alpha": r.alpha,
                "eigenvalues": [[z.real, z.imag] for z in r.eigenvalues],
                "is_real": r.is_real.tolist(),
                "has_real_negative": r.has_real_negative,
            }
            for r in reports
        ]
        _emit(_json(doc), args.out)
    else:
        rows = [row for r in reports for row in spectrum_rows(r)]
        _emit(format_csv(SPECTRUM_HEADER, rows), args.out)
    return EXIT_CERT if any(r.has_real_negative for r in reports) else EXIT_OK


def _parse_grid(text):
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        n = int(round((hi - lo) / step))
        return [round(lo + i * step, 12) for i in range(n + 1)]
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_scan(args) -> int:
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    for f in families:
        if f not in FAMILIES:
            raise DomainError(f"unknown family {f!r}")
    if not 1 <= args.m_max <= args.m_cap:
        raise DomainError(f"--m-max must lie in 1..{args.m_cap}")
    alphas = _parse_grid(args.alpha_grid)
    if not alphas or not all(0.0 < a <= 1.0 for a in alphas):
        raise DomainError("alpha grid values must lie in (0, 1]")
    rows = scan(families, range(1, args.m_max + 1), alphas, threads=_threads())
    summary = summarize_scan(rows)
    doc = {
        "families": {f: s.to_dict() for f, s in summary.items()},
        "rows": [
            {
                "family": r.family,
                "m": r.m,
                "alpha": r.alpha,
                "real_count": r.real_count,
                "has_real_negative": r.has_real_negative,
                "min_real_part": r.min_real_part,
                "parity_ok": r.parity_ok,
            }
            for r in rows
        ],
        "row_count": len(rows),
    }
    _emit(_json(doc), args.out)
    return EXIT_CERT if any(r.has_real_negative for r in rows) else EXIT_OK


def cmd_charpoly(args) -> int:
    if args.m is not None and args.m > MAX_SUBSET_M:
        raise DomainError(f"--m must be at most {MAX_SUBSET_M}")
    rule = parse_points(args.points, args.m)
    rep = charpoly_subsets(rule, args.alpha)
    doc = {
        "family": rule.family,
        "m": rule.m,
        "alpha": args.alpha,
        "points": list(rule.theta),
        "coefficients": rep.coefficients.tolist(),
        "all_positive": rep.all_positive,
        "cross_check_residual": rep.cross_check_residual,
        "leverrier": rep.reference.tolist(),
    }
    _emit(_json(doc), args.out)
    return EXIT_OK if rep.all_positive else EXIT_CERT


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    result = run_problem(cfg)
    grid = cfg.problem.grid
    prefix = args.out
    csv_text = format_csv(("t", "x", "u"), solution_rows(result.solution, grid))
    if prefix in (None, "-"):
        sys.stdout.write(csv_text)
        sys.stdout.write(_json(result.report))
    else:
        _emit(csv_text, prefix + ".csv")
        _emit(_json(result.report), prefix + ".json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fraccol", description="Collocation for time-fractional subdiffusion.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectrum", help="eigenvalues of the collocation matrix")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--points", default="chebyshev", help="family name or JSON array")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float)
    g.add_argument("--alpha-sweep", type=int, metavar="N", help="alpha = i/(N+1), i = 1..N")
    s.add_argument("--out", help="CSV path (JSON if it ends in .json); stdout if omitted")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("scan", help="spectrum observations over families, m and alpha")
    s.add_argument("--m-max", type=int, default=20)
    s.add_argument("--m-cap", type=int, default=DEFAULT_M_CAP, help=argparse.SUPPRESS)
    s.add_argument("--families", default=",".join(FAMILIES))
    s.add_argument("--alpha-grid", default="0.05:0.95:0.05", help="lo:hi:step or a comma list")
    s.add_argument("--out")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("charpoly", help="characteristic polynomial coefficients")
    s.add_argument("--m", type=int)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--points", default="chebyshev")
    s.add_argument("--out")
    s.set_defaults(func=cmd_charpoly)

    s = sub.add_parser("solve", help="solve a problem from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output prefix for <prefix>.csv and <prefix>.json")
    s.set_defaults(func=cmd_solve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CertificateError, SingularMatrixError, ConvergenceError) as exc:
        print(f"fraccol: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (ConfigError, DomainError) as exc:
        print(f"fraccol: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fraccol: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
