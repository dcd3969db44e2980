"""Command line front end: ``optomo design | eta | simulate | table``.

Exit codes: 0 success, 2 invalid arguments or input files, 3 numerical
failure or a design that is not informationally complete for the class.
The default simulation seed can be set with ``$OPTOMO_SEED``.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import covopt, schema, simkit
from .errors import IncompleteError, TomographyError
from .kernels import available_backends

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
D_MIN, D_MAX = 2, 8


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _show(x: float | None) -> str:
    return "none" if x is None else f"{x:.12g}"


def _dimension(text: str) -> int:
    try:
        d = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid dimension {text!r}") from None
    if not D_MIN <= d <= D_MAX:
        raise argparse.ArgumentTypeError(f"dimension must lie in [{D_MIN}, {D_MAX}]")
    return d


def _class_list(text: str) -> list[str]:
    if text == "all":
        return list(covopt.CLASSES)
    out = [c.strip() for c in text.split(",") if c.strip()]
    bad = [c for c in out if c not in covopt.CLASSES]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown class(es) {bad}; choose from {covopt.CLASSES}")
    return out


def cmd_design(args) -> int:
    des = covopt.optimize_class(args.cls, args.d)
    print(f"eta={_show(des.eta)}")
    print(f"A={_show(des.A)}")
    print(f"beta={_show(des.beta)}")
    if args.out:
        schema.write_atomic(args.out, schema.dumps(schema.design_to_json(des)))
    return EXIT_OK


def cmd_eta(args) -> int:
    obj = schema.load(args.seeds)
    if isinstance(obj, dict) and "class" in obj and "psi" in obj:
        seeds = schema.design_from_json(obj).seeds
    else:
        seeds = schema.seeds_from_json(obj)
    expected = covopt.class_dims(args.cls, max(seeds.d_out, seeds.d_in))
    if (seeds.d_out, seeds.d_in) != expected:
        raise TomographyError(f"seed shape {(seeds.d_out, seeds.d_in)} does not fit class {args.cls!r}")
    coef = covopt.block_coefficients(seeds)
    eta = covopt.eta_of(seeds, args.cls, args.path)
    print(f"eta={_show(eta)}")
    print(f"A={_show(coef.A)} B={_show(coef.B)} C={_show(coef.C)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec, R = schema.config_from_json(schema.load(args.config), args.seed)
    report = simkit.run_simulation(spec, R, backend=args.backend, workers=args.workers)
    text = report.to_json() if args.format == "json" else report.to_csv()
    if args.out:
        schema.write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def eta_table(d_min: int, d_max: int, classes) -> list[tuple[int, str, float, float, float]]:
    """Rows ``(d, class, eta_analytic, eta_numeric, abs_diff)``."""
    rows = []
    for d in range(d_min, d_max + 1):
        for cls in classes:
            des = covopt.optimize_class(cls, d, check=False)
            analytic = covopt.eta_bound(cls, d)
            numeric = covopt.eta_of(des.seeds, cls, "dense")
            rows.append((d, cls, analytic, numeric, abs(analytic - numeric)))
    return rows


def cmd_table(args) -> int:
    if args.d_min > args.d_max:
        raise TomographyError("--d-min must not exceed --d-max")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "class", "eta_analytic", "eta_numeric", "abs_diff"])
    for d, cls, a, n, diff in eta_table(args.d_min, args.d_max, args.classes):
        w.writerow([d, cls, _fmt(a), _fmt(n), _fmt(diff)])
    if args.out:
        schema.write_atomic(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optomo", description="Optimal covariant tomography toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("design", help="optimal covariant design for a class")
    s.add_argument("--class", dest="cls", required=True, choices=covopt.CLASSES)
    s.add_argument("--d", type=_dimension, required=True)
    s.add_argument("--out", help="write the design JSON here")
    s.set_defaults(func=cmd_design)

    s = sub.add_parser("eta", help="figure of merit of a seed file")
    s.add_argument("--seeds", required=True, help="seeds or design JSON file")
    s.add_argument("--class", dest="cls", required=True, choices=covopt.CLASSES)
    s.add_argument("--path", choices=("spectral", "dense"), default="spectral")
    s.set_defaults(func=cmd_eta)

    s = sub.add_parser("simulate", help="Monte Carlo run of the double-Bell scheme")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="report file (default: standard output)")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--seed", type=int, help="override the config rng_seed")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--backend", choices=available_backends())
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("table", help="analytic versus dense-path optimal eta")
    s.add_argument("--d-min", type=_dimension, default=2)
    s.add_argument("--d-max", type=_dimension, default=3)
    s.add_argument("--classes", type=_class_list, default=list(covopt.CLASSES),
                   help="comma-separated classes or 'all'")
    s.add_argument("--out", help="CSV file (default: standard output)")
    s.set_defaults(func=cmd_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INVALID
    if getattr(args, "workers", 1) < 1:
        print("optomo: error: --workers must be positive", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (IncompleteError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"optomo: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TomographyError, ValueError, KeyError) as exc:
        print(f"optomo: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
