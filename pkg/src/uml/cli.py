"""Command-line front end.

Every subcommand prints exact values; norms are shown as ``s^k``.  Failures
end with one line on stderr of the form ``error: <kind>: <message>`` and a
nonzero exit status (2 bad input, 3 precondition, 1 failed check).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from uml import acceptance, fourier, pdiff, quasi, weakdist
from uml.measures import CellMeasure, ProductMeasure, StepFunction, convolve, haar, product
from uml.padic import Ball, ClopenSet, PrimePair
from uml.serialize import (
    FormatError,
    dump_measure,
    dump_table,
    frac_str,
    load_measure,
    load_table,
    measure_from_obj,
    parse_frac,
    value_str,
)
from uml.svalues import BParam, DivergentSeries, cyclo_norm_bound, norm_str, s_norm


class CheckFailed(Exception):
    pass


class UsageError(ValueError):
    pass


# -- argument helpers --------------------------------------------------------


def _fracs(text: str) -> tuple[Fraction, ...]:
    try:
        return tuple(parse_frac(t) for t in text.split(",") if t.strip())
    except FormatError as e:
        raise UsageError(str(e)) from e


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as e:
        raise UsageError(f"bad integer list {text!r}") from e


def _ball(p: int, text: str) -> Ball:
    """``center:exp`` with comma-separated coordinates, e.g. ``0,1/2:0,1``."""
    try:
        c, k = text.split(":")
    except ValueError as e:
        raise UsageError(f"ball must look like center:exp, got {text!r}") from e
    center, exps = _fracs(c), _ints(k)
    if len(exps) == 1 and len(center) > 1:
        exps = exps * len(center)
    if len(center) != len(exps):
        raise UsageError(f"ball {text!r}: center and exponents differ in length")
    return Ball(p, center, exps)


def _set(p: int, text: str) -> ClopenSet:
    balls = [_ball(p, t) for t in text.split(";") if t.strip()]
    if not balls:
        raise UsageError("empty set")
    return ClopenSet.of(p, balls, balls[0].dim)


def _matrix(text: str) -> list[list[Fraction]]:
    return [list(_fracs(row)) for row in text.split(";")]


def _read(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from e


def _measure(path: str) -> CellMeasure:
    return load_measure(_read(path))


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _norm(x: Fraction, s: int) -> str:
    return norm_str(s_norm(x, s), s)


def _pp(args) -> PrimePair:
    return PrimePair(args.p, args.s)


def _bparam(args, s: int) -> BParam | None:
    if args.T is not None:
        return BParam.at(parse_frac(args.T), s)
    if args.tnorm is not None:
        return BParam(parse_frac(args.tnorm))
    return None


def _shell_family(pp: PrimePair, levels) -> list:
    return [quasi.shell_measure(pp, n) for n in levels]


def _step_from_measure(mu: CellMeasure) -> StepFunction:
    if mu.dim != 1:
        raise UsageError("step functions for pd are one-dimensional")
    return StepFunction(mu.p, 1, tuple(mu.cells))


# -- subcommands -------------------------------------------------------------


def cmd_haar(args):
    pp = _pp(args)
    B = _ball(pp.p, args.ball)
    _emit(dump_measure(haar(pp, B, parse_frac(args.density))), args.out)


def cmd_shellmeasure(args):
    pp = _pp(args)
    m = quasi.ShellDensityMeasure.build(pp, args.n, args.jmin)
    radial = m.measure if args.normalized else m.raw
    _emit(dump_measure(radial.truncate(args.jmin)), args.out)


def cmd_theta(args):
    mu = _measure(args.measure)
    if args.grid is not None:
        table = fourier.theta_table(mu, args.grid, args.support_exp)
        if args.out:
            _emit(dump_table(table), args.out)
            return
        for z, v in sorted(table.samples.items()):
            print(f"{','.join(map(frac_str, z))}\t{value_str(v)}\t{norm_str(cyclo_norm_bound(v, mu.s), mu.s)}")
        return
    if args.z is None:
        raise UsageError("theta needs --z or --grid")
    v = fourier.theta(mu, _fracs(args.z))
    print(value_str(v))


def cmd_invert(args):
    table = load_table(_read(args.table))
    if args.level is not None and args.level != table.level:
        raise UsageError(f"table level is {table.level}, not {args.level}")
    _emit(dump_measure(fourier.invert(table)), args.out)


def cmd_convolve(args):
    _emit(dump_measure(convolve(_measure(args.a), _measure(args.b))), args.out)


def cmd_product(args):
    _emit(dump_measure(product(_measure(args.a), _measure(args.b))), args.out)


def cmd_kakutani(args):
    if args.factors:
        obj = json.loads(_read(args.factors))
        pairs = [(measure_from_obj(m), measure_from_obj(n)) for m, n in obj.get("pairs", [])]
        tail = obj.get("tail")
        sched = quasi.schedule_from_pairs(
            pairs, None if tail is None else (measure_from_obj(tail[0]), measure_from_obj(tail[1]))
        )
    else:
        tail = None if args.tail is None else parse_frac(args.tail)
        sched = quasi.BetaSchedule(_fracs(args.betas or ""), tail)
    v = quasi.kakutani_classify(sched, args.N, parse_frac(args.tol))
    print(f"betas: {', '.join(map(frac_str, sched.prefix))}" + (f" then {frac_str(sched.tail)} forever" if sched.tail is not None else ""))
    print(f"verdict: {v.kind}")
    print(f"partial product P_{v.N}: {frac_str(v.partial)}")
    if v.envelope is not None:
        print(f"envelope: {frac_str(v.envelope)}")


def cmd_rho(args):
    pp = _pp(args)
    fam = _shell_family(pp, _ints(args.levels))
    a, x = _fracs(args.a), _fracs(args.x)
    if len(a) > len(fam) or len(x) > len(fam):
        raise UsageError(f"--a and --x may have at most {len(fam)} coordinates, one per level")
    r = quasi.rho_shift(fam, a, x, args.trunc)
    print(f"{frac_str(r)}\t|.|_s = {_norm(r, pp.s)}")


def cmd_transform(args):
    pp = _pp(args)
    U = _matrix(args.matrix)
    if args.measure:
        mu = _measure(args.measure)
    else:
        mu = ProductMeasure(tuple(_shell_family(pp, _ints(args.levels))))
    if mu.dim != len(U):
        raise UsageError(f"matrix size {len(U)} does not match dimension {mu.dim}")
    x = _fracs(args.x)
    formula = quasi.transform_density(U, mu, x)
    print(f"formula: {frac_str(formula)}\t|.|_s = {_norm(formula, pp.s)}")
    if args.check:
        oracle = quasi.transform_density_oracle(U, mu, x)
        print(f"pushforward oracle: {frac_str(oracle)}")
        if oracle != formula:
            raise CheckFailed("formula and pushforward oracle disagree")


def cmd_pd(args):
    mu = _measure(args.f)
    f = _step_from_measure(mu)
    r = pdiff.pd_evaluate(f, parse_frac(args.x), mu.pp, args.domain, _bparam(args, mu.s))
    print(f"value: {r.value}")
    if r.at is not None:
        print(f"converges: {'yes' if r.converges else 'no'}")
        for t in r.divergent_tails:
            print(f"divergent tail: {t}")
        if r.number is not None:
            print(f"at T={frac_str(r.at.T)}: {frac_str(r.number)}\t|.|_s = {_norm(r.number, mu.s)}")


def cmd_pdshift(args):
    mu = _measure(args.measure)
    S = _set(mu.p, args.set)
    r = pdiff.pd_measure_shift(mu, _fracs(args.a), S, _bparam(args, mu.s))
    print(f"value: {r.value}")
    if r.number is not None:
        print(f"at T={frac_str(r.at.T)}: {frac_str(r.number)}")


def _tower(args) -> weakdist.WeakDistribution:
    pp = _pp(args)
    if args.haar is not None:
        return weakdist.WeakDistribution.of_products([haar(pp)] * args.haar)
    levels = _ints(args.levels)
    if args.truncate is not None:
        fam = [quasi.shell_measure(pp, n).truncate(n - args.truncate) for n in levels]
    else:
        fam = _shell_family(pp, levels)
    return weakdist.WeakDistribution.of_products(fam)


def cmd_weakdist(args):
    wd = _tower(args)
    s = wd.pp.s
    if args.action == "check":
        v = weakdist.consistency_check(wd, level=args.level)
        print(f"consistent: {'yes' if v.passed else 'no'} ({v.checked} comparisons)")
        if not v.passed:
            n, m, A, lhs, rhs = v.witness
            print(f"witness: dims {n}<{m}, A={A}, {frac_str(lhs)} != {frac_str(rhs)}")
            raise CheckFailed("tower is not consistent")
    elif args.action == "tight":
        lo, hi = _ints(args.exps)
        v = weakdist.tightness_check(wd, parse_frac(args.c), range(lo, hi + 1))
        print(f"least exponents per level: {list(v.least_exps)}")
        print(f"uniform radius: {'none' if v.uniform_exp is None else frac_str(v.uniform_radius)}")
        print(f"sup norm: {norm_str(v.sup_norm, s)}")
        if not v.passed:
            raise CheckFailed("tower is not tight on the grid")
    else:
        if args.truncate is None and args.haar is None:
            raise UsageError("sxi needs --truncate (compactly supported factors)")
        xi = parse_frac(args.xi)
        val = weakdist.s_xi_functional(wd, xi, args.N, args.reading)
        print(f"S_xi (xi={frac_str(xi)}, N={args.N or len(wd.tower)}): {frac_str(val)}")
        print(f"|S_xi - 1|_s = {_norm(val - 1, s)}")


def cmd_selftest(args):
    results = acceptance.run_all()
    for r in results:
        print(r.line())
    if not all(r.passed and r.in_budget for r in results):
        raise CheckFailed("acceptance suite has failures")


# -- parser ------------------------------------------------------------------


def _add_pp(sp):
    sp.add_argument("--p", type=int, default=2)
    sp.add_argument("--s", type=int, default=3)


def _add_t(sp):
    sp.add_argument("--tnorm", help="s-adic norm of T = s^-b")
    sp.add_argument("--T", help="rational value of T for evaluation")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uml", description="Exact non-Archimedean measure computations.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("haar", help="Haar measure on a ball")
    _add_pp(sp)
    sp.add_argument("--ball", default="0:0")
    sp.add_argument("--density", default="1")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_haar)

    sp = sub.add_parser("shellmeasure", help="shell-density measure, truncated")
    _add_pp(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--jmin", type=int, required=True)
    sp.add_argument("--normalized", action="store_true", help="divide by the exact total mass")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_shellmeasure)

    sp = sub.add_parser("theta", help="characteristic functional")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--z")
    sp.add_argument("--grid", type=int, help="tabulate on the full dual grid of this level")
    sp.add_argument("--support-exp", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_theta)

    sp = sub.add_parser("invert", help="measure from a theta table")
    sp.add_argument("--table", required=True)
    sp.add_argument("--level", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_invert)

    for name, fn in (("convolve", cmd_convolve), ("product", cmd_product)):
        sp = sub.add_parser(name)
        sp.add_argument("a")
        sp.add_argument("b")
        sp.add_argument("--out")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("kakutani", help="classify an infinite product")
    sp.add_argument("--factors", help="JSON with 'pairs' and optional 'tail' of measure objects")
    sp.add_argument("--betas", help="comma-separated beta_j prefix")
    sp.add_argument("--tail", help="constant beta after the prefix")
    sp.add_argument("--N", type=int, default=12)
    sp.add_argument("--tol", default="1/59049")
    sp.set_defaults(func=cmd_kakutani)

    sp = sub.add_parser("rho", help="shift cocycle of a shell-measure product")
    _add_pp(sp)
    sp.add_argument("--levels", required=True, help="comma-separated n per coordinate")
    sp.add_argument("--a", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--trunc", type=int)
    sp.set_defaults(func=cmd_rho)

    sp = sub.add_parser("transform", help="density of a linear image")
    _add_pp(sp)
    sp.add_argument("--matrix", required=True, help="rows separated by ';'")
    sp.add_argument("--measure", help="cell measure file (default: shell-measure product)")
    sp.add_argument("--levels", default="1,2")
    sp.add_argument("--x", required=True)
    sp.add_argument("--check", action="store_true", help="compare with the pushforward oracle")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("pd", help="pseudo-differential operator of a step function")
    sp.add_argument("--f", required=True, help="measure file whose cells give the step values")
    sp.add_argument("--x", required=True)
    sp.add_argument("--domain", choices=["full", "unit"], default="full")
    _add_t(sp)
    sp.set_defaults(func=cmd_pd)

    sp = sub.add_parser("pdshift", help="derivative of a measure along a direction")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--a", required=True)
    sp.add_argument("--set", required=True, help="balls center:exp separated by ';'")
    _add_t(sp)
    sp.set_defaults(func=cmd_pdshift)

    sp = sub.add_parser("weakdist", help="weak-distribution towers")
    sp.add_argument("action", choices=["check", "tight", "sxi"])
    _add_pp(sp)
    sp.add_argument("--levels", default="1,2,3,4")
    sp.add_argument("--haar", type=int, help="use a tower of this many Haar factors")
    sp.add_argument("--truncate", type=int, help="keep this many shells below each core")
    sp.add_argument("--level", type=int)
    sp.add_argument("--c", default="1/729")
    sp.add_argument("--exps", default="-6,3")
    sp.add_argument("--xi", default="1")
    sp.add_argument("--N", type=int)
    sp.add_argument("--reading", choices=["quotient", "product"])
    sp.set_defaults(func=cmd_weakdist)

    sp = sub.add_parser("selftest", help="run the acceptance suite")
    sp.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except (UsageError, FormatError, json.JSONDecodeError) as e:
        print(f"error: input: {e}", file=sys.stderr)
        return 2
    except CheckFailed as e:
        print(f"error: check: {e}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, DivergentSeries) as e:
        print(f"error: precondition: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
