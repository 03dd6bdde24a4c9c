"""Command-line front end.

Exit codes: 0 success, 2 invalid instance, 3 config/parse error,
4 unsupported boundary case. Config files hold ``key = value`` lines whose
keys are option names; command-line flags override config values, which
override built-in defaults.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import (
    BOUNDARY_MESSAGE,
    BoundCertificate,
    Recurrence,
    TRI_EXPONENT,
    gamma_eigenvalue,
    gamma_eigenvector_closed_form,
    k_for,
    master_exponent,
    tri_bound_table,
    tri_recurrence,
    unroll_htri,
)
from .errors import BoundaryCaseError, FamilyError, GeometryError, InstanceError
from .estimator import best_record, run_restarts
from .families import MODES, FamilyDescriptor, enumerate_family, lattice_csv
from .formats import (
    CERTIFY_COLUMNS,
    ESTIMATE_COLUMNS,
    FAMILY_COLUMNS,
    SCALING_COLUMNS,
    ConfigError,
    csv_text,
    family_rows,
    line_chart_svg,
    load_config,
    load_instance,
)
from .geometry import TriangleShape, as_rational, classify_tri_member, split_htri, split_tri
from .operator import maximal_function, operator_value

log = logging.getLogger("mrlab")

EXIT_INSTANCE = 2
EXIT_CONFIG = 3
EXIT_BOUNDARY = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message)


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {s}")
    return v


def _int_list(s: str) -> list[int]:
    try:
        vals = [int(t) for t in s.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {s!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _rational(s: str) -> float:
    try:
        return float(as_rational(s))
    except GeometryError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_sets(text: str):
    # "1:1;1:1 1:2" -> ((1,1),), ((1,1),(1,2))
    sets = []
    for chunk in text.split(";"):
        pts = []
        for tok in chunk.split():
            try:
                i, j = tok.split(":")
                pts.append((int(i), int(j)))
            except ValueError as exc:
                raise FamilyError(f"bad lattice point {tok!r}; expected i:j") from exc
        sets.append(tuple(pts))
    return sets


def _add_family_args(p, default_kind="tri"):
    p.add_argument("--family", "--kind", dest="kind", default=default_kind,
                   choices=["intervals", "rectangles", "htri", "tri", "explicit"],
                   help="family kind")
    p.add_argument("--n", type=_nonneg_int, help="size parameter (height for rectangles/htri)")
    p.add_argument("--m", type=_nonneg_int, help="width for rectangles/htri (default n)")
    p.add_argument("--mode", choices=MODES, default="integer-grid")
    p.add_argument("--sets", help="explicit members, e.g. '1:1;1:1 1:2'")
    p.add_argument("--family-file", help="JSON family descriptor")


def _descriptor(args, n=None) -> FamilyDescriptor:
    if args.family_file:
        try:
            return FamilyDescriptor.loads(Path(args.family_file).read_text())
        except OSError as exc:
            raise FamilyError(f"cannot read {args.family_file}: {exc}") from exc
    if args.kind == "explicit":
        if not args.sets:
            raise FamilyError("explicit family needs --sets or --family-file")
        return FamilyDescriptor.explicit(_parse_sets(args.sets))
    n = args.n if n is None else n
    if n is None:
        raise FamilyError(f"--n is required for the {args.kind} family")
    return FamilyDescriptor(args.kind, n=n, m=args.m, mode=args.mode)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mrlab", description="Menchov-Rademacher operator laboratory")
    parser.add_argument("--version", action="version", version=f"mrlab {__version__}")
    parser.add_argument("--config", help="key = value config file (flags override it)")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress log on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("families", help="enumerate a family of index sets")
    _add_family_args(p)
    p.add_argument("--lattice-csv", help="also write rows (i, j, member_id) here")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_families)

    p = sub.add_parser("decompose", help="triangle decompositions")
    p.add_argument("--shape", choices=["tri", "htri"], default="tri")
    p.add_argument("--n", type=_nonneg_int, required=False,
                   help="tri: side of Tri_{0,n,n}; htri: height")
    p.add_argument("--a", help="rational parameter a")
    p.add_argument("--b", help="rational parameter b")
    p.add_argument("--m", help="htri family width bound")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("eval", help="evaluate the operator on an instance file")
    p.add_argument("--instance", required=False)
    p.add_argument("--method", choices=["incremental", "naive"], default="incremental")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("estimate", help="lower-bound search for mr(S)")
    _add_family_args(p)
    p.add_argument("--M", type=_positive_int, help="measure points (default 2d)")
    p.add_argument("--restarts", type=_nonneg_int, default=8)
    p.add_argument("--iters", type=_positive_int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--init", help="instance file used as an extra warm start")
    p.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("scaling", help="lower bounds across sizes n")
    _add_family_args(p)
    p.add_argument("--ns", type=_int_list, default=[2, 4, 8])
    p.add_argument("--restarts", type=_nonneg_int, default=8)
    p.add_argument("--iters", type=_positive_int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-chain", action="store_true",
                   help="do not warm-start each size from the previous best")
    p.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--svg", help="write a log-log chart here")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("certify", help="upper-bound certificate table")
    p.add_argument("--n", type=_positive_int, default=1024, help="largest n (rounded up to 2^K)")
    p.add_argument("--c5", type=float, default=1.0)
    p.add_argument("--base", type=float, default=1.0, help="B(1)")
    p.add_argument("--alpha", type=_rational, default=1.0 / 3.0)
    p.add_argument("--m", type=_positive_int, help="also tabulate the HTRI bound for width m")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("master", help="Master-theorem exponent")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--log-power", type=_nonneg_int, default=0)
    p.add_argument("--tri", action="store_true", help="use the triangle recurrence")
    p.set_defaults(func=cmd_master)

    p = sub.add_parser("gamma", help="largest eigenvalue of the triangle-recursion quadratic form")
    p.set_defaults(func=cmd_gamma)
    return parser


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_families(args) -> None:
    fam = enumerate_family(_descriptor(args))
    text = csv_text(f"mrlab families v1 {fam.descriptor.label()}", FAMILY_COLUMNS, family_rows(fam))
    if args.lattice_csv:
        Path(args.lattice_csv).write_text(f"# mrlab lattice v1 {fam.descriptor.label()}\n" + lattice_csv(fam))
    _emit(text, args.output)


def cmd_decompose(args) -> None:
    if args.n is None:
        raise UsageError("decompose needs --n")
    if args.shape == "tri":
        if args.a is None and args.b is None:
            dec = split_tri(args.n)
        elif args.a is None or args.b is None:
            raise UsageError("give both --a and --b, or neither")
        else:
            dec = classify_tri_member(args.a, args.b, args.n)
    else:
        if args.a is None or args.b is None:
            raise UsageError("htri decomposition needs --a and --b")
        dec = split_htri(TriangleShape(args.a, args.b, args.n), args.m)
    rows, notes = [], []
    for k, (piece, pts) in enumerate(zip(dec.pieces, dec.piece_points())):
        notes.append(f"piece {k} {piece.role} {piece.describe()} points={len(pts)}")
        rows += [[k, piece.role, p.i, p.j] for p in pts]
    notes.append(f"case {dec.case if dec.case is not None else '-'}")
    notes.append("partition " + ("exact" if dec.is_partition() else "FAILED"))
    _emit(csv_text(f"mrlab decompose v1 {dec.parent}", ["piece", "role", "i", "j"], rows, notes),
          args.output)


def cmd_eval(args) -> None:
    if not args.instance:
        raise UsageError("eval needs --instance")
    inst = load_instance(args.instance)
    mf = maximal_function(inst.system, inst.coeffs, inst.family, args.method)
    value = operator_value(inst.system, inst.coeffs, inst.family, args.method)
    rows = [[x, float(w), float(v)] for x, (w, v) in enumerate(zip(inst.system.weights, mf))]
    _emit(csv_text(f"mrlab eval v1 {inst.family.descriptor.label()}",
                   ["point", "weight", "maximal_function"], rows, [f"value {value!r}"]),
          args.output)


def _require_seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required (flag or config)")
    return args.seed


def cmd_estimate(args) -> None:
    seed = _require_seed(args)
    fam = enumerate_family(_descriptor(args))
    init = None
    if args.init:
        inst = load_instance(args.init)
        init = (inst.system, inst.coeffs)
    records = run_restarts(fam, args.M, args.restarts, args.iters, seed, args.workers, init)
    best = best_record(records)
    rows = [[r.family, r.kind, r.n, r.mode, r.restart, r.iters, r.value, r.gram_residual, r.seed]
            for r in records]
    footer = [
        f"summary best_lower_bound={best.value!r} restart={best.restart} members={len(fam)} "
        f"d={fam.d} envelope_sqrt_members={math.sqrt(len(fam))!r}",
    ]
    footer += [f"restart {r.restart} aborted: {r.diagnostic}" for r in records if r.aborted]
    _emit(csv_text(f"mrlab estimate v1 {fam.descriptor.label()} (values are lower bounds on mr)",
                   ESTIMATE_COLUMNS, rows, footer), args.output)


def reference_slope() -> float:
    """Exponent of the triangle recurrence, drawn as the reference line."""
    return master_exponent(tri_recurrence()).exponent


def cmd_scaling(args) -> None:
    seed = _require_seed(args)
    slope_ref = reference_slope()
    ns = sorted(set(args.ns))
    rows, xs, ys = [], [], []
    init = None
    for n in ns:
        fam = enumerate_family(_descriptor(args, n=n))
        if fam.d == 0:
            log.info("skipping n=%d: no index points", n)
            continue
        records = run_restarts(fam, None, args.restarts, args.iters, seed, args.workers, init)
        best = best_record(records)
        if not args.no_chain:
            init = (best.system, best.coeffs)
        lx, ly = math.log2(n), math.log2(best.value)
        slope = (ly - ys[-1]) / (lx - xs[-1]) if xs else None
        xs.append(lx)
        ys.append(ly)
        d = fam.descriptor
        rows.append([d.label(), d.kind, n, d.mode, len(fam), fam.d, best.value, lx, ly, slope, seed])
        log.info("n=%d lower bound %.6f", n, best.value)
    footer = [
        f"reference exponent {slope_ref!r} (upper-bound theorem; slopes of lower bounds are "
        "reported, not asserted)",
    ]
    _emit(csv_text("mrlab scaling v1 (values are lower bounds on mr)", SCALING_COLUMNS, rows, footer),
          args.output)
    if args.svg and xs:
        ref = [ys[0] + slope_ref * (x - xs[0]) for x in xs]
        svg = line_chart_svg(
            [("lower bound (estimate)", xs, ys, "#1f77b4", False),
             (f"reference slope {slope_ref:.7f}", xs, ref, "#d62728", True)],
            title=f"{args.kind}: log2 lower bound vs log2 n",
            xlabel="log2 n", ylabel="log2 estimate",
        )
        Path(args.svg).write_text(svg)


def cmd_certify(args) -> None:
    cert = BoundCertificate(alpha=args.alpha, c5=args.c5, base=args.base)
    K = k_for(args.n)
    table, C = tri_bound_table(K, cert)
    columns = list(CERTIFY_COLUMNS)
    rows = [[r.k, r.n, r.bound, r.envelope] for r in table]
    if args.m:
        columns.append("htri_bound")
        for row, r in zip(rows, table):
            row.append(unroll_htri(r.k, args.m, cert))
    footer = [
        f"envelope C={C!r} exponent={TRI_EXPONENT!r}",
        f"constants alpha={cert.alpha!r} c5={cert.c5!r} base={cert.base!r}; "
        "bounds hold up to the configured absolute constants",
    ]
    _emit(csv_text("mrlab certify v1", columns, rows, footer), args.output)


def cmd_master(args) -> None:
    if args.tri:
        rec = tri_recurrence()
    else:
        if None in (args.a, args.b, args.c):
            raise UsageError("master needs --a, --b and --c (or --tri)")
        rec = Recurrence(args.a, args.b, args.c, args.log_power)
    try:
        res = master_exponent(rec)
    except ValueError as exc:
        if isinstance(exc, BoundaryCaseError):
            raise
        raise UsageError(str(exc)) from exc
    sys.stdout.write(csv_text("mrlab master v1", ["a", "b", "c", "log_power", "case", "exponent"],
                              [[rec.a, rec.b, rec.c, rec.log_power, res.case, res.exponent]]))


def cmd_gamma(args) -> None:
    g = gamma_eigenvalue()
    v = g.eigenvector
    ref = gamma_eigenvector_closed_form()
    lines = [
        f"{g.value:.15f}",
        "eigenvector " + " ".join(f"{x:.15f}" for x in v),
        f"eigenvector_closed_form_error {float(np.max(np.abs(v - ref))):.3e}",
        f"closed_form_error {g.closed_form_error:.3e}",
        f"eigen_residual {g.eigen_residual:.3e}",
        f"charpoly_residual {g.charpoly_residual:.3e}",
        f"power_iterations {g.iterations}",
    ]
    sys.stdout.write("\n".join(lines) + "\n")


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = load_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    dests = set()
    for sp in subparsers.choices.values():
        sp_dests = {a.dest for a in sp._actions}
        dests |= sp_dests
        sp.set_defaults(**{k: v for k, v in cfg.items() if k in sp_dests and k not in ("func", "help")})
    unknown = sorted(set(cfg) - dests)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def _coerce_config_values(args, parser) -> None:
    # argparse only converts string defaults for options that have a type
    for name in ("no_chain", "verbose"):
        val = getattr(args, name, None)
        if isinstance(val, str):
            lowered = val.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"{name} must be a boolean, got {val!r}")
            setattr(args, name, lowered in ("true", "1", "yes"))
    if isinstance(getattr(args, "ns", None), str):
        setattr(args, "ns", _int_list(args.ns))


def _setup_logging(verbose: bool) -> None:
    # progress goes to stderr only; replace any handler left by an earlier call
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        parser = build_parser()
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        _coerce_config_values(args, parser)
        _setup_logging(args.verbose)
        args.func(args)
    except BoundaryCaseError as exc:
        print(f"mrlab: {exc}", file=sys.stderr)
        return EXIT_BOUNDARY
    except InstanceError as exc:
        print(f"mrlab: invalid instance: {exc}", file=sys.stderr)
        return EXIT_INSTANCE
    except (UsageError, ConfigError, FamilyError, GeometryError, argparse.ArgumentTypeError,
            ValueError) as exc:
        print(f"mrlab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
