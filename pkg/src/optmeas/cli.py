"""Command-line interface.

Exit codes: 0 success, 1 a requested check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import design, jsonio, qlin
from .checks import DEFAULT_TOLS, run_checks
from .errors import ConvergenceError, OptmeasError
from .fidelity import fbar_direct, fbar_max_closed
from .povm import build_povm
from .prior import QUAD_ENV, parse_prior

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _copies(value, cap):
    if value > cap:
        raise UsageError(f"copy count {value} exceeds the size cap {cap}")
    return value


def _load_design_files(paths):
    sets = {}
    for path in paths or []:
        ds = design.read_direction_set(path)
        sets[ds.twice_s] = ds
    return sets


def _fmt(x, digits):
    return "" if x is None else f"{x:.{digits}g}"


def cmd_fidelity(args, out):
    prior = parse_prior(args.prior)
    N = _copies(args.copies, args.size_cap)
    closed = direct = None
    if args.method in ("closed", "both"):
        closed = fbar_max_closed(prior, N).value_closed
    if args.method in ("direct", "both"):
        povm = build_povm(N, prior, direction_sets=_load_design_files(args.design_file),
                          max_copies=args.size_cap)
        direct = fbar_direct(povm, prior)
    diff = abs(closed - direct) if closed is not None and direct is not None else None
    d = args.digits
    out.write("N\tprior\tclosed\tdirect\tdifference\n")
    out.write(f"{N}\t{prior.name}\t{_fmt(closed, d)}\t{_fmt(direct, d)}\t{_fmt(diff, 3)}\n")
    return EXIT_OK


def cmd_povm(args, out):
    prior = parse_prior(args.prior)
    N = _copies(args.copies, args.size_cap)
    povm = build_povm(N, prior, direction_sets=_load_design_files(args.design_file),
                      max_copies=args.size_cap)
    doc = povm.to_json(with_matrices=args.with_matrices)
    doc["identity_residual"] = povm.identity_residual()
    text = jsonio.dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        out.write(f"wrote {len(povm)} elements to {args.out}\n")
    else:
        out.write(text)
    return EXIT_OK


def cmd_verify(args, out):
    prior = parse_prior(args.prior)
    N = _copies(args.copies, args.size_cap)
    if N > 5 and not args.design_file:
        raise UsageError("verify needs direction sets beyond 2s=5; pass --design-file")
    tols = {}
    for item in args.tol or []:
        key, _, val = item.partition("=")
        if key not in DEFAULT_TOLS:
            raise UsageError(f"unknown tolerance {key!r}; known: {', '.join(DEFAULT_TOLS)}")
        try:
            tols[key] = float(val)
        except ValueError:
            raise UsageError(f"tolerance {item!r} is not NAME=FLOAT") from None
        if tols[key] <= 0:
            raise UsageError(f"tolerance {key} must be positive")
    results = run_checks(N, prior, seed=args.seed, tols=tols,
                         direction_sets=_load_design_files(args.design_file))
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        out.write(f"{status}  {r.name:<28} residual={r.residual:.3e} tol={r.tolerance:.1e}  {r.detail}\n")
    if args.json:
        jsonio.dump({"N": N, "prior": prior.name, "seed": args.seed,
                     "checks": [r.as_dict() for r in results],
                     "passed": all(r.passed for r in results)}, args.json)
    failed = [r for r in results if not r.passed]
    if failed:
        sys.stderr.write(f"first failing invariant: {failed[0].name}\n")
        return EXIT_FAIL
    return EXIT_OK


def cmd_design(args, out):
    ds = design.solve_direction_set(args.twice_s, args.count, seed=args.seed, restarts=args.restarts)
    extra = {"seed": args.seed, "restarts": args.restarts}
    if args.out:
        design.write_direction_set(ds, args.out, **extra)
        rep = design.verify_direction_set(ds)
        out.write(f"wrote {len(ds)} directions to {args.out} (design residual {rep.design_residual:.3e})\n")
    else:
        out.write(jsonio.dumps(ds.to_json(design.certificate(ds, **extra))))
    return EXIT_OK


def cmd_table(args, out):
    _copies(args.max_copies, args.size_cap)
    priors = [parse_prior(p) for p in args.prior]
    digits = 17 if args.out else args.digits
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["N", "prior_id", "fbar_closed", "fbar_direct", "abs_diff", "r_by_twice_s"])
    for prior in priors:
        for N in range(1, args.max_copies + 1):
            rep = fbar_max_closed(prior, N)
            direct = None
            if args.direct and N <= 5:
                direct = fbar_direct(build_povm(N, prior), prior)
            diff = None if direct is None else abs(rep.value_closed - direct)
            rs = " ".join(f"{t.twice_s}:{t.r:.{digits}g}" for t in rep.per_sector)
            writer.writerow([N, prior.name, _fmt(rep.value_closed, digits), _fmt(direct, digits),
                             _fmt(diff, 3), rs])
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        out.write(buf.getvalue())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="optmeas", description=__doc__.splitlines()[0])
    parser.add_argument("--quad-order", type=_positive_int,
                        help=f"radial quadrature nodes (default ${QUAD_ENV} or 64)")
    parser.add_argument("--size-cap", type=_positive_int, default=qlin.MAX_COPIES,
                        help="largest copy count accepted by the dense constructions")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, copies=True):
        if copies:
            p.add_argument("--copies", "-N", type=_positive_int, required=True)
        p.add_argument("--prior", default="pure",
                       help="pure | random | uniform-ball | two-point:m1@b1,m2@b2 | path.json")
        p.add_argument("--design-file", action="append",
                       help="direction-set JSON overriding the default for its twice_s (repeatable)")

    p = sub.add_parser("fidelity", help="maximal mean fidelity")
    common(p)
    p.add_argument("--method", choices=["closed", "direct", "both"], default="both")
    p.add_argument("--digits", type=_positive_int, default=6)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("povm", help="write the optimal minimal POVM")
    common(p)
    p.add_argument("--out")
    p.add_argument("--with-matrices", action="store_true")
    p.set_defaults(func=cmd_povm)

    p = sub.add_parser("verify", help="run the invariant suite")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                   help=f"override a tolerance ({', '.join(DEFAULT_TOLS)})")
    p.add_argument("--json", help="also write a machine-readable report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("design", help="solve for a weighted direction set")
    p.add_argument("--twice-s", type=_positive_int, required=True)
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--restarts", type=_positive_int, default=64)
    p.add_argument("--out")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("table", help="fidelity table over copy counts")
    p.add_argument("--max-copies", type=_positive_int, required=True)
    p.add_argument("--prior", action="append", required=True)
    p.add_argument("--no-direct", dest="direct", action="store_false")
    p.add_argument("--digits", type=_positive_int, default=6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.quad_order:
        os.environ[QUAD_ENV] = str(args.quad_order)
    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"optmeas: error: {exc}\n")
        return EXIT_USAGE
    except ConvergenceError as exc:
        sys.stderr.write(f"optmeas: {exc}\n")
        return EXIT_FAIL
    except (OptmeasError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"optmeas: error: {exc}\n")
        return EXIT_USAGE


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
