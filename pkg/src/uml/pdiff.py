"""Pseudo-differential operators with kernel ``s^((-1-b) ord_p(x-y))``.

Values are Laurent expressions in ``T = s^-b``: on the shell
``ord_p(x - y) = j`` the kernel is ``s^-j T^j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from uml import config
from uml.measures import CellMeasure, ProductMeasure, RadialMeasure, StepFunction
from uml.padic import Ball, ClopenSet, PrimePair, as_fraction, ball, ord_p
from uml.svalues import BParam, LaurentT, Tail, s_ord


def pd_kernel(x, y, pp: PrimePair) -> LaurentT:
    """``g(x, y, b) = s^-j T^j`` with ``j = ord_p(x - y)``."""
    d = as_fraction(x) - as_fraction(y)
    if d == 0:
        raise ValueError("kernel pole at x = y")
    j = int(ord_p(d, pp.p))
    return LaurentT.monomial(j, Fraction(pp.s) ** (-j))


@dataclass(frozen=True)
class PDResult:
    value: LaurentT
    s: int
    at: BParam | None = None

    @property
    def converges(self) -> bool | None:
        return None if self.at is None else self.value.converges(self.s, self.at.t_norm)

    @property
    def divergent_tails(self) -> list[Tail]:
        return [] if self.at is None else self.value.divergent_tails(self.s, self.at.t_norm)

    @property
    def number(self) -> Fraction | None:
        if self.at is None or self.at.T is None or not self.converges:
            return None
        return self.value.evaluate(self.at.T, self.s)

    def __str__(self):
        out = str(self.value)
        if self.at is not None:
            if self.converges:
                out += f"  [converges for |T|_s = {self.at.t_norm}]"
                if self.at.T is not None:
                    out += f"  at T={self.at.T}: {self.number}"
            else:
                out += f"  [diverges for |T|_s = {self.at.t_norm}]"
        return out


def _reach(b: Ball, x: Fraction) -> int:
    """Largest ``e`` with ``b`` inside ``B(x, p^-e)``."""
    d = b.center[0] - x
    k = b.exps[0]
    return k if d == 0 else min(k, int(ord_p(d, b.p)))


def _flat_radius(f: StepFunction, x: Fraction) -> int:
    """An ``e`` with ``f`` constant on ``B(x, p^-e)``."""
    outside = []
    for b, _ in f.pieces:
        if b.contains_point((x,)):
            return b.exps[0]
        outside.append(int(ord_p(x - b.center[0], f.p)) + 1)
    return max(outside, default=0)


def shell_integral(f: StepFunction, x, j: int, domain: ClopenSet | None = None) -> Fraction:
    """``int_{ord(y - x) = j, y in domain} (f(x) - f(y)) dy``."""
    x = as_fraction(x)
    p = f.p
    S = ClopenSet.of(p, [ball(p, x, j)]).difference(ClopenSet.of(p, [ball(p, x, j + 1)]))
    if domain is not None:
        S = S.intersection(domain)
    vol = S.haar()
    if vol == 0:
        return Fraction(0)
    fx = f((x,))
    total = (fx - f.default) * vol
    for b, v in f.pieces:
        w = ClopenSet.of(p, [b]).intersection(S).haar()
        if w:
            total -= (v - f.default) * w
    return total


def _domain(domain, p: int) -> ClopenSet | None:
    if domain in (None, "full", "full-K"):
        return None
    if domain in ("unit", "unit-ball"):
        return ClopenSet.of(p, [ball(p, 0, 0)])
    if isinstance(domain, ClopenSet):
        return domain
    raise ValueError(f"unknown domain {domain!r}")


def pd_evaluate(f: StepFunction, x, pp: PrimePair, domain="full", at: BParam | None = None) -> PDResult:
    """``PD(b, f)(x) = int (f(x) - f(y)) g(x, y, b) dy`` exactly.

    Shells close to ``x`` contribute nothing (``f`` is flat there), the
    middle shells are summed exactly, and for the full line the shells
    beyond the support of ``f`` form one geometric tail in ``T^-1``.
    """
    if f.dim != 1:
        raise ValueError("pseudo-differentiation is one-dimensional")
    x = as_fraction(x)
    p, s = pp.p, pp.s
    D = _domain(domain, p)
    hi = _flat_radius(f, x)
    if D is None:
        lo = min([_reach(b, x) for b, _ in f.pieces] + [hi])
    else:
        lo = min(_reach(b, x) for b in D.balls) if D.balls else hi
    mono: dict[int, Fraction] = {}
    for j in range(lo, hi):
        c = shell_integral(f, x, j, D)
        if c:
            mono[j] = c * Fraction(s) ** (-j)
    tails = ()
    if D is None:
        c = (f((x,)) - f.default) * (1 - Fraction(1, p))
        if c:
            # j < lo: (f(x) - default) s^-j T^j p^-j (1 - 1/p), k = -j >= 1 - lo
            tails = (Tail(c, Fraction(s * p), 1 - lo, -1),)
    return PDResult(LaurentT(mono, tails), s, at)


def pd_shell_sum(f: StepFunction, x, pp: PrimePair, depth: int, T, domain="full") -> Fraction:
    """Oracle: the shells ``ord(y - x) = j`` for ``j`` from the flat radius
    down ``depth`` steps, summed one at a time at a rational ``T``."""
    x, T = as_fraction(x), as_fraction(T)
    D = _domain(domain, pp.p)
    hi = _flat_radius(f, x)
    total = Fraction(0)
    for j in range(hi - 1, hi - 1 - depth, -1):
        total += shell_integral(f, x, j, D) * Fraction(pp.s) ** (-j) * T**j
    return total


# -- derivative of a measure along a direction --------------------------------


def _as_cells(mu) -> CellMeasure:
    if isinstance(mu, CellMeasure):
        return mu
    if isinstance(mu, ProductMeasure):
        return mu.to_cells()
    raise TypeError(f"unsupported measure {type(mu).__name__}")


def shift_profile(mu, a, S: ClopenSet) -> StepFunction:
    """``lambda -> mu(S - lambda a) - mu(S)`` as a step function of ``lambda``."""
    mu = _as_cells(mu)
    p = mu.p
    a = tuple(as_fraction(v) for v in a)
    if len(a) != mu.dim or all(v == 0 for v in a):
        raise ValueError("direction must be a nonzero vector of the measure's dimension")
    base = mu.measure_of(S)
    balls = [b for b, d in mu.cells if d] + list(S.balls)
    if not balls:
        return StepFunction(p, 1, ())
    level = max(max(b.exps) for b in balls)
    reach = min(
        min(k if c == 0 else min(k, int(ord_p(c, p))) for c, k in zip(b.center, b.exps))
        for b in balls
    )
    m = min(int(ord_p(v, p)) for v in a if v)
    # |lambda a| beyond the reach moves S off the support; below the finest
    # level the shift fixes every cell
    outer, inner = reach - m, level - m
    pieces = []
    for b in ball(p, 0, outer).refine((max(inner, outer),)):
        lam = b.center[0]
        moved = S.translate(tuple(-lam * v for v in a))
        pieces.append((b, mu.measure_of(moved) - base))
    return StepFunction(p, 1, tuple(pieces), -base)


def pd_measure_shift(mu, a, S: ClopenSet, at: BParam | None = None) -> PDResult:
    """``int (mu(S - lambda a) - mu(S)) g(lambda, 0, b) d lambda``.

    With ``h`` the shift profile, ``h(0) = 0``, so this is ``-PD(h)(0)``.
    """
    h = shift_profile(mu, a, S)
    r = pd_evaluate(h, 0, _as_cells(mu).pp, "full", at)
    return PDResult(-r.value, r.s, at)


# -- order of smallness of shifts ----------------------------------------------


def nu_prime(pp: PrimePair, xi, q: int, x0=0, reading: str | None = None) -> RadialMeasure:
    """Probability factor with density ``C s^(-q min(0, ord(x - x0, xi)))``.

    ``reading`` selects ``ord_p((x - x0) / xi)`` or ``ord_p((x - x0) xi)``.
    """
    reading = reading or config.ord_reading()
    xi = as_fraction(xi)
    if xi == 0:
        raise ValueError("xi must be nonzero")
    e = int(ord_p(xi, pp.p))
    n = e if reading == "quotient" else -e
    s = Fraction(pp.s)
    # shell j < n: s^(-q (j - n)) = s^(q n) (s^q)^-j
    raw = RadialMeasure(pp, as_fraction(x0), n, Fraction(1), s ** (q * n), s**q)
    return raw.normalized()


@dataclass(frozen=True)
class SmallnessReport:
    q: int
    ts: tuple[Fraction, ...]
    masses: tuple[Fraction, ...]
    gaps: tuple[Fraction, ...]
    slopes: tuple[Fraction, ...]
    passed: bool
    reading: str = field(default="quotient")


def smallness_order(factors: Sequence, y, S: ClopenSet, ts: Sequence, q: int,
                    reading: str | None = None) -> SmallnessReport:
    """s-adic orders of ``mu_N(t y + S)`` against ``log_p |t|``.

    ``mu_N`` is the product of the factors.  Each successive pair of samples
    gives a slope, and the check passes when every slope equals ``q``.  The
    gap ``mu_N(t y + S) - mu_N(S)`` is reported alongside.
    """
    mu = ProductMeasure(tuple(factors))
    y = tuple(as_fraction(v) for v in y)
    ts = tuple(as_fraction(t) for t in ts)
    base = mu.measure_of(S)
    masses, gaps = [], []
    for t in ts:
        m = mu.measure_of(S.translate(tuple(t * v for v in y)))
        masses.append(m)
        gaps.append(m - base)
    slopes = []
    pts = [(-ord_p(t, mu.p), s_ord(m, mu.s)) for t, m in zip(ts, masses) if t and m]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x1 != x0:
            slopes.append(Fraction(y1 - y0) / (x1 - x0))
    passed = bool(slopes) and all(sl == q for sl in slopes)
    return SmallnessReport(q, ts, tuple(masses), tuple(gaps), tuple(slopes), passed,
                           reading or config.ord_reading())
