"""Command-line front end.

Curves are written as CSV with a ``#schema=`` first line, scalar reports as
JSON with sorted keys. Rates are in nats unless ``--bits`` is given, and every
number is printed with 9 significant digits so repeated runs are
byte-identical.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import codebook_lab as lab
from .dispersion import dispersion_report
from .errors import ConfigParse, InputError, RateDistortionError
from .exponent import InfeasiblePoint, exponent_curve
from .finite_blocklength import lemma2_check, q_inverse, rate_curve, rate_redundancy_oracle
from .gaussian import GaussianSpec, gaussian_curve_csv, geometric_blocklengths
from .rd_solver import rd_at_distortion, rdf_value
from .source_model import DistortionSpec, load_problem, validate_source

LN2 = math.log(2)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigParse(message)


def _round(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round(obj.item())
    return obj


def _json(obj) -> str:
    return json.dumps(_round(obj), sort_keys=True, indent=2) + "\n"


def _problem(args):
    if args.source and args.probs:
        raise ConfigParse("give either --source or --probs, not both")
    if args.source:
        try:
            return load_problem(args.source, kind=args.distortion, strict=True)
        except OSError as exc:
            raise ConfigParse(f"cannot read {args.source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigParse(f"{args.source} is not valid JSON: {exc}") from exc
    if args.probs:
        try:
            probs = [float(v) for v in args.probs.split(",")]
        except ValueError as exc:
            raise ConfigParse(f"bad --probs value: {exc}") from exc
        source = validate_source(probs, strict=True)
        kind = args.distortion or "hamming"
        if kind != "hamming":
            raise ConfigParse("--probs only supports hamming distortion; use --source")
        return source, DistortionSpec.hamming(source.size)
    raise ConfigParse("a source is required (--source FILE or --probs P1,P2,...)")


def _scale(args):
    return 1.0 / LN2 if args.bits else 1.0


def _unit(args):
    return "bits" if args.bits else "nats"


def cmd_rdf(args):
    source, dist = _problem(args)
    p = source.probs
    D = args.D
    out = {"D": D, "probs": p.tolist(), "distortion": dist.to_dict()}
    lo, hi = dist.minimal_distortion(p), dist.trivial_distortion(p)
    if lo < D < hi:
        sol = rd_at_distortion(p, dist, D)
        out.update(rate=sol.lagrangian - sol.lam * D, slope=sol.lam,
                   repro_marginal=sol.repro_marginal.tolist(), support_size=sol.support_size)
    else:
        out.update(rate=rdf_value(p, dist, D, memo=False))
    out["rate"] *= _scale(args)
    out["unit"] = _unit(args)
    return _json(out)


def cmd_dispersion(args):
    source, dist = _problem(args)
    routes = tuple(args.routes.split(","))
    rep = dispersion_report(source, dist, args.D, routes=routes)
    out = rep.to_dict()
    out["notes"] = list(rep.notes)
    out["D"] = args.D
    return _json(out)


def _floats(text, name):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigParse(f"bad {name} value: {exc}") from exc


def cmd_exponent(args):
    source, dist = _problem(args)
    rates = sorted(_floats(args.rates, "--rates"))
    if not rates:
        raise ConfigParse("--rates needs at least one value")
    s = _scale(args)
    u = _unit(args)
    lines = ["#schema=exponent_curve/1", f"rate_{u},exponent_{u},method,minimizer"]
    for pt in exponent_curve(source, dist, args.D, rates):
        if isinstance(pt, InfeasiblePoint):
            lines.append(f"{pt.rate * s:.9g},inf,infeasible,")
            continue
        q = " ".join(f"{v:.9g}" for v in pt.minimizer)
        lines.append(f"{pt.rate * s:.9g},{pt.value * s:.9g},{pt.method},{q}")
    return "\n".join(lines) + "\n"


def _blocklengths(args):
    if args.n:
        return sorted(set(int(v) for v in _floats(args.n, "-n")))
    return geometric_blocklengths(args.nmin, args.nmax, args.geom)


def cmd_curve(args):
    source, dist = _problem(args)
    curve = rate_curve(source, dist, args.D, args.eps, _blocklengths(args), with_oracle=args.oracle)
    return curve.to_csv(bits=args.bits)


def cmd_oracle(args):
    source, dist = _problem(args)
    p = source.probs
    rows = []
    V = dispersion_report(p, dist, args.D, routes=("tilted",), check_jumps=False).v_tilted
    z = q_inverse(args.eps)
    for n in _blocklengths(args):
        dr, tail = rate_redundancy_oracle(p, dist, args.D, args.eps, n, full_output=True)
        row = {"n": n, "delta_r": dr * _scale(args), "tail_probability": tail}
        if V and V > 0:
            row["normalized"] = dr * math.sqrt(n / V)
            row["deviation"] = abs(row["normalized"] - z)
        rows.append(row)
    return _json({"D": args.D, "eps": args.eps, "q_inverse": z, "dispersion": V,
                  "unit": _unit(args), "records": rows})


def cmd_lemma2(args):
    source, _ = _problem(args)
    ns = _blocklengths(args) if (args.n or args.nmin) else [16, 64, 256, 1024, 4096]
    rows = []
    for n in ns:
        chk = lemma2_check(source, n)
        rows.append({"n": n, "lhs": chk.lhs, "rhs": chk.rhs, "holds": chk.holds})
    return _json({"probs": source.probs.tolist(), "records": rows,
                  "all_hold": all(r["holds"] for r in rows)})


def cmd_codebook(args):
    source, dist = _problem(args)
    n, D, eps = args.blocklength, args.D, args.eps
    if args.method == "greedy":
        cb = lab.greedy_cover_code(source, dist, n, D, eps)
        extra = {}
    elif args.method == "exact":
        cb = lab.exact_min_code(source, dist, n, D, eps)
        extra = {}
    else:
        dr = lab.union_recipe_redundancy(source, dist, n, D, eps)
        cb = lab.type_union_code(source, dist, n, D, dr)
        extra = {"delta_r": dr}
    if args.coverage == "monte_carlo":
        if args.seed is None:
            raise ConfigParse("--seed is required for monte carlo coverage")
        cov = lab.coverage(source, dist, cb, D, mode="monte_carlo", samples=args.samples,
                           seed=args.seed)
    else:
        cov = lab.coverage(source, dist, cb, D)
    if args.codebook_out:
        with open(args.codebook_out, "w") as fh:
            fh.write(cb.to_text())
    report = cov.to_dict()
    report.update(extra, n=n, D=D, eps=eps, method_code=args.method, size=cb.size,
                  rate=cb.rate * _scale(args), unit=_unit(args),
                  converse_rate=lab.converse_rate_bound(source, dist, n, D, eps) * _scale(args))
    return _json(report)


def cmd_gaussian(args):
    spec = GaussianSpec(args.var, args.D, args.eps)
    return gaussian_curve_csv(spec, _blocklengths(args), bits=args.bits)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ratedisp", description="Rate-distortion dispersion toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, source=True):
        if source:
            sp.add_argument("--source", help="JSON problem file")
            sp.add_argument("--probs", help="comma-separated source probabilities (Hamming)")
            sp.add_argument("--distortion", choices=("hamming", "difference", "general"),
                            help="override the distortion kind of the problem file")
        sp.add_argument("-D", "--D", dest="D", type=float, required=True, help="distortion level")
        sp.add_argument("--bits", action="store_true", help="report rates in bits")
        sp.add_argument("--output", "-o", help="write the report here instead of stdout")

    def lengths(sp, need_eps=True):
        if need_eps:
            sp.add_argument("--eps", type=float, required=True)
        sp.add_argument("--nmin", type=int)
        sp.add_argument("--nmax", type=int)
        sp.add_argument("--geom", type=float, default=10.0, help="ratio between blocklengths")
        sp.add_argument("-n", help="explicit comma-separated blocklengths")

    sp = sub.add_parser("rdf", help="R(p, D)")
    common(sp)
    sp.set_defaults(func=cmd_rdf)

    sp = sub.add_parser("dispersion", help="V(p, D) by several routes")
    common(sp)
    sp.add_argument("--routes", default="tilted,derivative,exponent")
    sp.set_defaults(func=cmd_dispersion)

    sp = sub.add_parser("exponent", help="excess-distortion exponent over a rate grid")
    common(sp)
    sp.add_argument("--rates", required=True, help="comma-separated rates in nats")
    sp.set_defaults(func=cmd_exponent)

    sp = sub.add_parser("curve", help="finite-blocklength rate curve (CSV)")
    common(sp)
    lengths(sp)
    sp.add_argument("--oracle", action="store_true", help="add the exact type-enumeration oracle")
    sp.set_defaults(func=cmd_curve)

    sp = sub.add_parser("oracle", help="exact rate redundancy by type enumeration")
    common(sp)
    lengths(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("lemma2", help="exact atypical-type probability against 2L/n^2")
    sp.add_argument("--source")
    sp.add_argument("--probs")
    sp.add_argument("--distortion", choices=("hamming", "difference", "general"))
    sp.add_argument("--output", "-o")
    lengths(sp, need_eps=False)
    sp.set_defaults(func=cmd_lemma2)

    sp = sub.add_parser("codebook", help="build a real code and measure its coverage")
    common(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--blocklength", "--n", dest="blocklength", type=int, required=True)
    sp.add_argument("--method", choices=("greedy", "exact", "type_union"), default="greedy")
    sp.add_argument("--coverage", choices=("exact", "monte_carlo"), default="exact")
    sp.add_argument("--samples", type=int, default=lab.MC_SAMPLES)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--codebook-out", help="write the codebook text here")
    sp.set_defaults(func=cmd_codebook)

    sp = sub.add_parser("gaussian", help="Gaussian finite-n rate bounds (CSV)")
    sp.add_argument("--var", type=float, required=True, help="source variance")
    common(sp, source=False)
    lengths(sp)
    sp.set_defaults(func=cmd_gaussian)
    return parser


def _check_lengths(args):
    if getattr(args, "nmin", None) is None and not getattr(args, "n", None):
        if args.command in ("curve", "oracle", "gaussian"):
            raise ConfigParse("give --nmin/--nmax or -n")
        return
    if getattr(args, "nmin", None) is not None and args.nmax is None:
        args.nmax = args.nmin


def run(argv=None) -> str:
    args = build_parser().parse_args(argv)
    _check_lengths(args)
    text = args.func(args)
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
        return ""
    return text


def main(argv=None) -> int:
    try:
        text = run(argv)
    except RateDistortionError as exc:
        kind = "ConfigParse" if isinstance(exc, ConfigParse) else (
            "InputInvalid" if isinstance(exc, InputError) else "ModuleError")
        msg = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(msg, sort_keys=True) + "\n")
        return 2 if isinstance(exc, ConfigParse) else 1
    except (ValueError, OSError) as exc:
        msg = {"error": "InputInvalid", "type": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(msg, sort_keys=True) + "\n")
        return 1
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
