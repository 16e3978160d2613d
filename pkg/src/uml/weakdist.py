"""Towers of finite-dimensional measures: consistency, tightness and the
concentration functional ``S_xi``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from uml import config
from uml.measures import CellMeasure, ProductMeasure, RadialMeasure, mu_norm
from uml.padic import Ball, ClopenSet, as_fraction, ord_p
from uml.pdiff import nu_prime
from uml.svalues import s_norm


def _sup(mu) -> Fraction:
    return mu_norm(mu) if isinstance(mu, CellMeasure) else mu.sup_norm()


@dataclass(frozen=True)
class WeakDistribution:
    """Measures on ``Q_p^{n_1}, Q_p^{n_2}, ...`` with ``n_1 < n_2 < ...``;
    the projections drop trailing coordinates."""

    tower: tuple

    def __post_init__(self):
        object.__setattr__(self, "tower", tuple(self.tower))
        if not self.tower:
            raise ValueError("a tower needs at least one level")
        dims = self.dims
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise ValueError(f"tower dimensions must increase, got {dims}")
        if len({m.pp for m in self.tower}) > 1:
            raise ValueError("tower members use different prime pairs")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.dim for m in self.tower)

    @property
    def pp(self):
        return self.tower[0].pp

    @classmethod
    def of_products(cls, factors: Sequence, dims: Sequence[int] | None = None) -> "WeakDistribution":
        """The tower of partial products of one-dimensional factors."""
        dims = dims or range(1, len(factors) + 1)
        return cls(tuple(ProductMeasure(tuple(factors[:d])) for d in dims))


def ball_samples(p: int, dim: int, lo: int, level: int) -> list[ClopenSet]:
    """All balls of radius ``p^-level`` inside ``(p^lo Z_p)^dim``, plus the
    union of every other one."""
    step = Fraction(p) ** lo
    reps = [t * step for t in range(p ** (level - lo))]
    balls = [Ball(p, c, (level,) * dim) for c in itertools.product(reps, repeat=dim)]
    out = [ClopenSet(p, dim, (b,)) for b in balls]
    out.append(ClopenSet.of(p, balls[::2], dim))
    return out


@dataclass(frozen=True)
class ConsistencyVerdict:
    passed: bool
    checked: int
    witness: tuple | None = None  # (n, m, A, mu_n(A), mu_m(P^-1 A))


def _cylinder_mass(mu, A: ClopenSet) -> Fraction:
    """``mu(A x Q_p^rest)`` for ``A`` in the leading coordinates."""
    return mu.marginal(A.dim).measure_of(A)


def consistency_check(wd: WeakDistribution, samples: dict | None = None,
                      level: int | None = None, lo: int = -1) -> ConsistencyVerdict:
    """``mu_n(A) == mu_m(A x Q_p^(n_m - n_n))`` for every pair ``n < m``."""
    level = config.default_grid_level() if level is None else level
    samples = dict(samples or {})
    checked = 0
    for i, mu_n in enumerate(wd.tower):
        d = mu_n.dim
        if d not in samples:
            samples[d] = ball_samples(wd.pp.p, d, lo, min(level, max(1, 6 // d)))
        for A in samples[d]:
            lhs = mu_n.measure_of(A)
            for mu_m in wd.tower[i + 1:]:
                rhs = _cylinder_mass(mu_m, A)
                checked += 1
                if lhs != rhs:
                    return ConsistencyVerdict(False, checked, (d, mu_m.dim, A, lhs, rhs))
    return ConsistencyVerdict(True, checked)


@dataclass(frozen=True)
class TightnessVerdict:
    passed: bool
    c: Fraction
    least_exps: tuple[int | None, ...]  # per level: largest e with ||outside B(0, p^-e)|| <= c
    uniform_exp: int | None
    sup_norm: Fraction
    norm_bound: Fraction
    p: int = 2

    @property
    def uniform_radius(self) -> Fraction | None:
        return None if self.uniform_exp is None else Fraction(self.p) ** (-self.uniform_exp)


def tightness_check(wd: WeakDistribution, c, exps: Sequence[int], norm_bound=1) -> TightnessVerdict:
    """For each level the smallest grid ball ``B(0, p^-e)`` with
    ``||Q_p^n \\ B||`` at most ``c``; a uniform ball must serve every level
    and the norms ``||Q_p^n||`` must stay within ``norm_bound``."""
    c, norm_bound = as_fraction(c), as_fraction(norm_bound)
    exps = sorted(set(exps), reverse=True)  # smallest ball first
    least = []
    for mu in wd.tower:
        found = None
        for e in exps:
            if mu.norm_outside(e) <= c:
                found = e
                break
        least.append(found)
    uniform = None if any(e is None for e in least) else min(least)
    sup = max(_sup(mu) for mu in wd.tower)
    passed = uniform is not None and sup <= norm_bound
    return TightnessVerdict(passed, c, tuple(least), uniform, sup, norm_bound, wd.pp.p)


# -- S_xi ----------------------------------------------------------------------


def gamma_xi(pp, xi, reading: str | None = None) -> RadialMeasure:
    """``nu_xi``: density ``C(xi) s^(-2 min(0, ord(y, xi)))``, total mass 1."""
    return nu_prime(pp, xi, 2, 0, reading)


def _ball_integral(g: RadialMeasure, j: int, c: Fraction) -> Fraction:
    """``int_{p^j Z_p} chi(c y) g(dy)`` for ``g`` radial around 0."""
    p = g.p
    vc = None if c == 0 else int(ord_p(c, p))

    def full(e: int) -> Fraction:  # int_{p^e Z_p} chi(c y) dy
        return Fraction(p) ** (-e) if vc is None or vc + e >= 0 else Fraction(0)

    if j >= g.n:
        return g.shell_density(g.n) * full(j)
    total = g.shell_density(g.n) * full(g.n)
    for i in range(j, g.n):
        total += g.shell_density(i) * (full(i) - full(i + 1))
    return total


def cell_factor(g: RadialMeasure, c: Fraction, k: int) -> Fraction:
    """``int theta_cell(y) g(dy)`` for the uniform density-1 cell ``B(c, p^-k)``:
    ``theta_cell(y) = chi(c y) p^-k`` on ``ord y >= -k``, else 0."""
    return Fraction(g.p) ** (-k) * _ball_integral(g, -k, c)


def _factor_value(mu: CellMeasure, g: RadialMeasure) -> Fraction:
    return sum((d * cell_factor(g, b.center[0], b.exps[0]) for b, d in mu.cells), Fraction(0))


def s_xi_value(mu, xi, reading: str | None = None) -> Fraction:
    """``int theta_mu(y) nu_xi^n(dy)``, the pairing of ``mu`` with the
    transform of ``nu_xi``, computed cell by cell."""
    g = gamma_xi(mu.pp, xi, reading)
    if isinstance(mu, ProductMeasure):
        out = mu.scale
        for f in mu.factors:
            if not isinstance(f, CellMeasure):
                raise TypeError("S_xi needs compactly supported (cell) factors")
            out *= _factor_value(f, g)
        return out
    total = Fraction(0)
    for b, d in mu.cells:
        term = d
        for c, k in zip(b.center, b.exps):
            term *= cell_factor(g, c, k)
        total += term
    return total


def s_xi_functional(wd: WeakDistribution, xi, N: int | None = None, reading: str | None = None) -> Fraction:
    """The value at truncation ``N`` (a tower index, default the top)."""
    if as_fraction(xi) == 0:
        raise ValueError("xi must be nonzero")
    mu = wd.tower[-1 if N is None else N - 1]
    return s_xi_value(mu, xi, reading)


@dataclass(frozen=True)
class TrendReport:
    reading: str
    xis: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    gaps: tuple[Fraction, ...]  # |S - 1|_s
    tends_to_one: bool


def s_xi_trend(wd: WeakDistribution, xis: Sequence, N: int | None = None,
               reading: str | None = None) -> TrendReport:
    """``|S_xi - 1|_s`` along a schedule of ``xi``; the trend holds when the
    gaps are nonincreasing and end strictly below where they started."""
    reading = reading or config.ord_reading()
    xis = tuple(as_fraction(x) for x in xis)
    vals = tuple(s_xi_functional(wd, x, N, reading) for x in xis)
    s = wd.pp.s
    gaps = tuple(s_norm(v - 1, s) for v in vals)
    ok = all(b <= a for a, b in zip(gaps, gaps[1:])) and (len(gaps) < 2 or gaps[-1] < gaps[0])
    return TrendReport(reading, xis, vals, gaps, ok)


def trend_schedule(p: int, reading: str | None = None, steps: int = 5) -> list[Fraction]:
    """``xi`` values along which ``S_xi -> 1`` under the given reading:
    ``|xi| -> 0`` for the quotient reading, ``|xi| -> oo`` for the product."""
    reading = reading or config.ord_reading()
    sign = 1 if reading == "quotient" else -1
    return [Fraction(p) ** (sign * k) for k in range(steps)]
