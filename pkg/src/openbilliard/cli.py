"""Command line front end.

Subcommands: validate (geometry checks over the deformation interval),
orbit (solve one periodic orbit and print its data), dimension (full
dimension report as JSON), sweep (dimension along an alpha grid as CSV).

Exit codes: 0 success, 1 usage or parse errors, 2 validation failures or
infeasible requests, 3 numerical failures.
"""

import argparse
import json
import math
import sys

import numpy as np

from .deform import bound_constants, quantity_derivs
from .errors import BilliardError, NumericalError, ValidationError
from .front import dk_dalpha, dpsi_dalpha, front_data
from .geometry import BilliardTable, deformation_constants, validate_table
from .orbit import OrbitCache, find_orbit, verify_orbit
from .pressure import dimension_report
from .symbolic import format_word, parse_word

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

SWEEP_COLUMNS = ("alpha", "Du", "D", "lower", "upper", "dD_danalytic",
                 "dD_dfinite", "dD_bound", "n", "delta_n", "status")


class UsageError(Exception):
    """Bad invocation or unparseable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract reserves 2 for
    # validation failures, so remap to the usage code
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="openbilliard",
                     description="Dimension of the trapped set of an open "
                                 "billiard, with deformation derivatives.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="JSON table configuration")
    common.add_argument("--alpha", type=float, default=None,
                        help="deformation value (default 0, clamped into "
                             "the table's interval)")
    common.add_argument("--depth", type=int, default=8,
                        help="cylinder depth n (default 8)")
    common.add_argument("--tol", type=float, default=1e-10,
                        help="root and solver tolerance (default 1e-10)")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker threads for orbit prewarming")
    common.add_argument("--out", default=None, help="output file path")
    common.add_argument("--cache", default=None,
                        help="orbit cache file (JSON lines, read and updated)")
    common.add_argument("--no-warm-start", action="store_true",
                        help="do not reuse solved orbits across alpha values")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common],
                   help="check convexity, clearance and the no-eclipse condition")
    p_orbit = sub.add_parser("orbit", parents=[common],
                             help="solve one periodic orbit")
    p_orbit.add_argument("--word", required=True,
                         help="comma-separated obstacle indices, e.g. 1,2,3")
    sub.add_parser("dimension", parents=[common],
                   help="dimension report at one alpha (JSON)")
    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="dimension along an alpha grid (CSV)")
    p_sweep.add_argument("--alpha-from", type=float, required=True)
    p_sweep.add_argument("--alpha-to", type=float, required=True)
    p_sweep.add_argument("--steps", type=int, required=True)
    return parser


def _load_table(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc.msg} "
                         f"(line {exc.lineno}, column {exc.colno})")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")
    return BilliardTable.from_config(cfg)


def _default_alpha(table, alpha):
    if alpha is not None:
        return table.check_alpha(alpha)
    if table.alpha_lo <= 0.0 <= table.alpha_hi:
        return 0.0
    return table.alpha_lo


def _check_run(args):
    if args.depth < 2:
        raise ValidationError(f"depth must be at least 2, got {args.depth}")
    if args.tol <= 0.0:
        raise ValidationError(f"tolerance must be positive, got {args.tol}")
    if args.jobs < 1:
        raise ValidationError(f"jobs must be at least 1, got {args.jobs}")


def _open_cache(args):
    return OrbitCache(args.cache) if args.cache else OrbitCache()


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args):
    table = _load_table(args.config)
    reports = validate_table(table)
    consts = deformation_constants(table)
    lines = []
    ok = True
    for rep in reports:
        ok &= rep.passed
        status = "pass" if rep.passed else "FAIL"
        extra = ""
        if not rep.no_eclipse.passed:
            i, j, k = rep.no_eclipse.witness
            extra = f"  eclipse: hull({i},{j}) meets {k}"
        lines.append(
            f"alpha={rep.alpha:+.6f}  {status}  kappa=[{rep.kappa_min:.6f}, "
            f"{rep.kappa_max:.6f}]  clearance={rep.pair_clearance:.6f}  "
            f"eclipse_margin={rep.no_eclipse.min_distance:.6f}{extra}")
    lines.append("jet bounds: " + "  ".join(
        f"C({q},{qp})={consts[(q, qp)]:.6f}" for q, qp in sorted(consts.c)))
    lines.append(f"kappa_min={consts.kappa_min:.6f}  "
                 f"kappa_max={consts.kappa_max:.6f}")
    lines.append("boundary smoothness: analytic obstacle families, "
                 "jets available to order 3")
    lines.append("table " + ("passes" if ok else "FAILS") + " validation")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_VALIDATION


def _fmt_row(values):
    return "  ".join(f"{v:+.12e}" for v in values)


def cmd_orbit(args):
    table = _load_table(args.config)
    alpha = _default_alpha(table, args.alpha)
    word = parse_word(args.word)
    cache = _open_cache(args)
    orbit = find_orbit(table, word, alpha, tol=args.tol, cache=cache,
                       warm_start=not args.no_warm_start)
    from .geometry import TableAtAlpha
    diag = verify_orbit(TableAtAlpha(table, alpha), orbit)
    fr = front_data(orbit)
    derivs = quantity_derivs(table, orbit)
    dk = dk_dalpha(orbit, fr, derivs)
    dpsi = dpsi_dalpha(orbit, fr, derivs, dk)
    phi = np.arccos(np.clip(orbit.cos_phi, -1.0, 1.0))

    lines = [f"word {format_word(orbit.symbols)}  alpha {alpha:+.6f}  "
             f"length {orbit.length:.12f}",
             f"grad_inf {orbit.grad_inf:.3e}  iterations {orbit.iterations}  "
             f"reflection_residual {diag['reflection_residual']:.3e}  "
             f"clearance {diag['segment_clearance']:.6f}  "
             f"front_residual {fr.residual:.3e}"]
    per_bounce = [
        ("u", orbit.u), ("px", orbit.points[:, 0]), ("py", orbit.points[:, 1]),
        ("d", orbit.d), ("phi", phi), ("kappa", orbit.kappa),
        ("gamma", orbit.gamma), ("k", fr.k), ("psi", fr.psi_u),
        ("du_dalpha", derivs.du), ("dd_dalpha", derivs.dd),
        ("dkappa_dalpha", derivs.dkappa), ("dcos_phi_dalpha", derivs.dcos_phi),
        ("dgamma_dalpha", derivs.dgamma), ("dk_dalpha", dk),
        ("dpsi_dalpha", dpsi),
    ]
    width = max(len(name) for name, _ in per_bounce)
    for name, arr in per_bounce:
        lines.append(f"{name:<{width}}  " + _fmt_row(arr))
    _emit("\n".join(lines) + "\n", args.out)

    if args.cache:
        cache.annotate(orbit.symbols, orbit.alpha, "d_alpha", derivs.to_payload())
        cache.annotate(orbit.symbols, orbit.alpha, "front", fr.to_payload())
        cache.save()
    return EXIT_OK


def cmd_dimension(args):
    table = _load_table(args.config)
    alpha = _default_alpha(table, args.alpha)
    cache = _open_cache(args)
    report = dimension_report(table, alpha, depth=args.depth, tol=args.tol,
                              cache=cache, jobs=args.jobs)
    _emit(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n",
          args.out)
    if args.cache:
        cache.save()
    if not (report.lower <= report.dimension <= report.upper):
        sys.stderr.write(
            f"error: dimension {report.dimension:.12f} escapes its bracket "
            f"[{report.lower:.12f}, {report.upper:.12f}]\n")
        return EXIT_NUMERICAL
    return EXIT_OK


def _sweep_fd(rows):
    """Finite-difference D column: central inside, one-sided at the edges.

    Left blank where no usable neighbor exists (failed rows, repeated alpha).
    """
    ok = [i for i, r in enumerate(rows) if r["status"] == "ok"]

    def slope(a, b):
        da = rows[b]["alpha"] - rows[a]["alpha"]
        return (rows[b]["D"] - rows[a]["D"]) / da if da != 0.0 else None

    for pos, i in enumerate(ok):
        lo = ok[pos - 1] if pos > 0 else None
        hi = ok[pos + 1] if pos + 1 < len(ok) else None
        value = None
        if lo is not None and hi is not None:
            value = slope(lo, hi)
        elif hi is not None:
            value = slope(i, hi)
        elif lo is not None:
            value = slope(lo, i)
        if value is not None:
            rows[i]["dD_dfinite"] = value


def cmd_sweep(args):
    table = _load_table(args.config)
    if args.steps < 2:
        raise ValidationError(f"sweep needs at least 2 steps, got {args.steps}")
    table.check_alpha(args.alpha_from)
    table.check_alpha(args.alpha_to)
    alphas = np.linspace(args.alpha_from, args.alpha_to, args.steps)
    cache = _open_cache(args)

    rows = []
    for alpha in alphas:
        row = {"alpha": float(alpha), "n": args.depth, "status": "ok"}
        try:
            if args.no_warm_start:
                cache = _open_cache(args)
            rep = dimension_report(table, float(alpha), depth=args.depth,
                                   tol=args.tol, cache=cache, jobs=args.jobs)
            row.update(Du=rep.dim_unstable, D=rep.dimension, lower=rep.lower,
                       upper=rep.upper, dD_danalytic=rep.d_dimension,
                       dD_bound=rep.derivative_bound, delta_n=rep.delta)
        except BilliardError as exc:
            row["status"] = f"failed: {type(exc).__name__}"
        rows.append(row)
    _sweep_fd(rows)

    lines = [
        "# dimension sweep: depth n, bracket [lower, upper], analytic and "
        "finite-difference dD/dalpha",
        "# dD_dfinite differences the D column: central at interior rows, "
        "one-sided at the ends, empty for failed neighbors",
        ",".join(SWEEP_COLUMNS),
    ]
    for row in rows:
        cells = []
        for col in SWEEP_COLUMNS:
            val = row.get(col)
            if val is None:
                cells.append("")
            elif col == "status":
                cells.append(str(val))
            elif col == "n":
                cells.append(str(int(val)))
            else:
                cells.append(f"{val:.12g}")
        lines.append(",".join(cells))
    _emit("\n".join(lines) + "\n", args.out)
    if args.cache:
        cache.save()
    return EXIT_OK if any(r["status"] == "ok" for r in rows) else EXIT_VALIDATION


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_run(args)
        handler = {"validate": cmd_validate, "orbit": cmd_orbit,
                   "dimension": cmd_dimension, "sweep": cmd_sweep}[args.command]
        return handler(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except ValidationError as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except BilliardError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
