"""Command-line front end.

Exit codes: 0 when every hard check passes, 1 on a hard failure, 2 on a
usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import circle, flow as flowmod, harness, numeration, roof, shear
from .circle import CirclePoint
from .errors import ArnoldLabError, DomainError, InsufficientDepthError, PreconditionError

USAGE_ERRORS = (DomainError, InsufficientDepthError, PreconditionError, ValueError, KeyError,
                json.JSONDecodeError, OSError)


def _point(text: str, rng: np.random.Generator, bits: int) -> CirclePoint:
    if text == "random":
        return CirclePoint.random(rng, bits)
    return CirclePoint.from_fraction(Fraction(text), bits)


def _emit(args, rows, fields=None) -> None:
    """Write a dict or a list of dicts as JSON (lines) or CSV."""
    if isinstance(rows, dict):
        rows = [rows]
    rows = [harness._jsonable(r) for r in rows]
    buf = io.StringIO()
    if args.format == "csv":
        fields = fields or list(rows[0].keys())
        w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (json.dumps(v) if isinstance(v, (dict, list)) else v) for k, v in r.items()})
    else:
        for r in rows:
            buf.write(json.dumps(r, sort_keys=True) + "\n")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_cf(args, cf, rng):
    if args.value is not None:
        cf = numeration.cf_expand(Fraction(args.value), args.depth, label=f"value:{args.value}")
    depth = min(args.depth, cf.depth)
    rows = [{"n": n, "a_n": cf.a(n) if n else 0, "p_n": cf.p[n], "q_n": cf.q[n]} for n in range(depth + 1)]
    if args.format == "csv":
        _emit(args, rows)
    else:
        _emit(args, {"label": cf.label, "value": float(cf), "quotients": list(cf.quotients[:depth]),
                     "tail": cf.tail, "convergents": [[r["p_n"], r["q_n"]] for r in rows]})
    return 0


def cmd_classify_alpha(args, cf, rng):
    if not cf.is_rational and cf.depth < args.depth + 2:
        cf = cf.extend(args.depth + 2)
    names = numeration.CLASS_NAMES if args.cls == "all" else [args.cls]
    rows = [numeration.classify_alpha(cf, name, args.depth).to_dict() for name in names]
    _emit(args, rows)
    return 0


def cmd_ostrowski(args, cf, rng):
    while cf.q[cf.depth] <= args.m:
        cf = cf.extend(cf.depth + 20)
    d = numeration.ostrowski_expand(args.m, cf)
    _emit(args, {"m": args.m, "digits": list(d.digits), "nonzero": d.nonzero(),
                 "check": numeration.ostrowski_evaluate(d.digits, cf) == args.m})
    return 0


def cmd_orbit(args, cf, rng):
    x = _point(args.x, rng, args.precision)
    cf.require(args.n)
    if args.spacing:
        rep = circle.orbit_spacing_check(x, cf, args.n, bits=args.precision)
        _emit(args, {"n": args.n, "q": rep.q, "min_gap": None if rep.min_gap is None else float(rep.min_gap),
                     "max_gap": float(rep.max_gap), "min_ok": rep.min_ok, "max_ok": rep.max_ok})
        return 0 if rep.ok else 1
    q = cf.q[args.n]
    rows = []
    for j in range(q):
        pt = circle.rotate(x, j, cf, max(args.precision, 64))
        rows.append({"j": j, "value": float(pt), "err": pt.err_float})
    _emit(args, rows)
    return 0


def cmd_birkhoff(args, cf, rng, f):
    x = _point(args.x, rng, args.precision)
    fn = roof.birkhoff_derivative_sum if args.derivative else roof.birkhoff_sum
    b = fn(f, x, args.m, cf, bits=args.precision)
    _emit(args, {"x": x.to_dict(), "m": b.m, "value": b.value, "err": b.err, "min_approach": b.min_approach,
                 "derivative": args.derivative})
    return 0


def cmd_flow(args, cf, rng, f):
    x = _point(args.x, rng, args.precision)
    p = flowmod.FlowPoint(x, args.s)
    if not p.check(f):
        raise DomainError("height s must satisfy 0 <= s < f(x)")
    rows = []
    t_total = 0.0
    for n in range(1, args.steps + 1):
        step = flowmod.flow(f, p, args.t, cf, bits=args.precision)
        t_total += args.t
        p = step.target
        rows.append({"n": n, "t": t_total, "x_value": float(p.x), "x_err": p.x.err_float, "s": p.s, "m": step.m})
    if args.format == "csv":
        _emit(args, rows, ["n", "t", "x_value", "x_err", "s", "m"])
    else:
        _emit(args, rows)
    return 0


def cmd_pair(args, cf, rng):
    x, y = _point(args.x, rng, args.precision), _point(args.y, rng, args.precision)
    rep = shear.classify_pair(x, y, cf, args.order, bits=args.precision)
    _emit(args, rep.to_dict())
    return 0


def cmd_shear(args, cf, rng, f):
    if args.sample:
        pairs = harness.sample_pairs(cf, args.order, args.sample, args.count, int(rng.integers(2**63)))
    else:
        pairs = [(_point(args.x, rng, args.precision), _point(args.y, rng, args.precision))]
    rows = []
    for x, y in pairs:
        rep = shear.classify_pair(x, y, cf, args.order)
        if rep.pair_class in shear.GOOD:
            rep.shear = shear.small_shearing_search(f, x, y, cf, args.order, args.zeta)
        elif rep.pair_class in ("type_I", "type_II"):
            rep.large = shear.large_shearing_check(f, x, y, cf, args.order, check_sets=not args.no_sets)
        row = rep.to_dict()
        row["x"], row["y"] = x.to_dict(), y.to_dict()
        rows.append(row)
    if args.format == "csv":
        rows = _shear_summary(rows, args.order)
        _emit(args, rows, ["order_k", "class", "count", "success_rate", "mean_residual"])
    else:
        _emit(args, rows)
    return 0


def _shear_summary(rows, order):
    out = []
    for cls in shear.PAIR_CLASSES:
        sel = [r for r in rows if r["pair_class"] == cls]
        if not sel:
            continue
        ok, res = [], []
        for r in sel:
            if r["shear"] is not None:
                ok.append(r["shear"]["success"])
                if r["shear"]["success"]:
                    res.append(r["shear"]["residual"])
            elif r["large"] is not None:
                ok.append(r["large"]["lower_ok"] and r["large"]["upper_ok"])
        out.append({"order_k": order, "class": cls, "count": len(sel),
                    "success_rate": sum(ok) / len(ok) if ok else math.nan,
                    "mean_residual": float(np.mean(res)) if res else math.nan})
    return out


def cmd_verify(args):
    if args.config:
        with open(args.config) as fh:
            config = harness.SuiteConfig.from_json(fh.read())
    else:
        config = harness.SuiteConfig(alpha=args.alpha, roof=args.roof, precision_bits=args.precision,
                                     suites=args.suite or [], seed=args.seed)
    if args.list:
        for name, s in harness.REGISTRY.items():
            print(f"{name:24s} hard={sorted(s.hard)}  {s.doc}")
        return 0
    report = harness.run_suite(config)
    if args.format == "csv":
        rows = [{"suite": c.suite, "check": c.name, "verdict": c.verdict, "margin": c.margin,
                 "sample_size": c.sample_size} for c in report.checks]
        _emit(args, rows or [{"suite": "", "check": "", "verdict": "", "margin": "", "sample_size": ""}],
              ["suite", "check", "verdict", "margin", "sample_size"])
    else:
        text = report.to_json()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            print(text)
    if config.csv_out:
        with open(config.csv_out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["order_k", "class", "count", "success_rate", "mean_residual"])
            w.writeheader()
            w.writerows(harness.summary_rows(report))
    for c in report.checks:
        print(f"{c.suite}/{c.name}: {c.verdict}", file=sys.stderr)
    return 0 if report.ok else 1


GLOBAL_DEFAULTS = {"alpha": "golden", "roof": None, "precision": 64, "seed": 0, "out": None, "format": "json"}


def _global_flags(parser, suppress: bool) -> None:
    # flags are accepted before or after the command; the copy on each
    # subcommand must not overwrite a value given before it
    d = (lambda k: argparse.SUPPRESS) if suppress else GLOBAL_DEFAULTS.get
    parser.add_argument("--alpha", default=d("alpha"), help="fixture name, spec or CF JSON file")
    parser.add_argument("--roof", default=d("roof"), help="roof JSON (inline or path)")
    parser.add_argument("--precision", type=int, default=d("precision"), help="working bits for circle points")
    parser.add_argument("--seed", type=int, default=d("seed"), help="PCG64 seed")
    parser.add_argument("--out", default=d("out"), help="output path (default stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default=d("format"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    ap = argparse.ArgumentParser(prog="arnoldlab", description=__doc__.splitlines()[0])
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cf", parents=[common], help="continued fraction and convergents")
    p.add_argument("--value", default=None, help="expand this exact decimal or fraction instead")
    p.add_argument("--depth", type=int, default=20)

    p = sub.add_parser("classify-alpha", parents=[common], help="finite-depth Diophantine class checks")
    p.add_argument("--class", dest="cls", default="all", choices=("all",) + numeration.CLASS_NAMES)
    p.add_argument("--depth", type=int, default=20)

    p = sub.add_parser("ostrowski", parents=[common], help="Ostrowski digits of m")
    p.add_argument("m", type=int)

    p = sub.add_parser("orbit", parents=[common], help="orbit segment of length q_n, or its gap check")
    p.add_argument("--x", default="0")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--spacing", action="store_true")

    p = sub.add_parser("birkhoff", parents=[common], help="Birkhoff sum f^(m)(x)")
    p.add_argument("--x", default="random")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--derivative", action="store_true")

    p = sub.add_parser("flow", parents=[common], help="trajectory of T_t from (x, s)")
    p.add_argument("--x", default="random")
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--t", type=float, default=1.0, help="time per step")
    p.add_argument("--steps", type=int, default=10)

    p = sub.add_parser("pair", parents=[common], help="classify a pair at order n_k")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--order", type=int, required=True)

    p = sub.add_parser("shear", parents=[common], help="small or large shearing analysis")
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--zeta", type=float, default=0.05)
    p.add_argument("--sample", default=None, help="sample pairs of this class instead of --x/--y")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--no-sets", action="store_true", help="skip the E-window preconditions")

    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("--config", default=None, help="SuiteConfig JSON file")
    p.add_argument("--suite", action="append", help="suite name (repeatable)")
    p.add_argument("--list", action="store_true", help="list registered suites")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    rng = np.random.default_rng(args.seed)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        cf = harness.resolve_alpha(args.alpha)
        if args.command in ("birkhoff", "flow", "shear"):
            default = harness.FLOW_ROOF if args.command == "flow" else None
            f = harness.resolve_roof(args.roof if args.roof is not None else default)
            if args.command == "shear" and not args.sample and (args.x is None or args.y is None):
                raise DomainError("shear needs --x and --y, or --sample")
            return {"birkhoff": cmd_birkhoff, "flow": cmd_flow, "shear": cmd_shear}[args.command](args, cf, rng, f)
        handler = {"cf": cmd_cf, "classify-alpha": cmd_classify_alpha, "ostrowski": cmd_ostrowski,
                   "orbit": cmd_orbit, "pair": cmd_pair}[args.command]
        return handler(args, cf, rng)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArnoldLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
