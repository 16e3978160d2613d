"""Characters of Q_p^n, characteristic functionals and finite inversion."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from uml.measures import CellMeasure, image_affine
from uml.padic import Ball, PrimePair, as_fraction, fractional_part, int_ord, ord_p
from uml.svalues import CycloValue, cyclo_norm_bound


def _vec(x) -> tuple[Fraction, ...]:
    if isinstance(x, (list, tuple)):
        return tuple(as_fraction(v) for v in x)
    return (as_fraction(x),)


def pairing(xi, x) -> Fraction:
    return sum((a * b for a, b in zip(_vec(xi), _vec(x))), Fraction(0))


def additive_character(q, p: int) -> CycloValue:
    """``chi(q) = zeta_{p^k}^m`` where ``{q}_p = m / p^k`` in lowest terms."""
    eta = fractional_part(q, p)
    if eta == 0:
        return CycloValue.rational(p, 1)
    k = int_ord(eta.denominator, p)
    return CycloValue.root(p, k, eta.numerator)


def character_value(xi, x, p: int) -> CycloValue:
    return additive_character(pairing(xi, x), p)


def _ball_transform(b: Ball, z: tuple[Fraction, ...]) -> CycloValue:
    """``int_b chi(<z, x>) dx`` for a product ball."""
    p = b.p
    vol = Fraction(1)
    for zi, k in zip(z, b.exps):
        # the character is trivial on p^k Z_p iff z p^k is integral
        if zi and ord_p(zi, p) + k < 0:
            return CycloValue.rational(p, 0)
        vol *= Fraction(p) ** (-k)
    return additive_character(pairing(z, b.center), p) * vol


def theta(mu: CellMeasure, z) -> CycloValue:
    """Characteristic functional ``int chi(<z, x>) mu(dx)``, exactly."""
    z = _vec(z)
    if len(z) != mu.dim:
        raise ValueError("frequency dimension mismatch")
    total = CycloValue.rational(mu.p, 0)
    for b, d in mu.cells:
        if d:
            total = total + _ball_transform(b, z) * d
    return total


def theta_refined(mu: CellMeasure, z) -> CycloValue:
    """Oracle for :func:`theta`: split every cell until ``<z, x>`` is constant
    mod Z_p on each piece, then sum character values times masses."""
    z = _vec(z)
    total = CycloValue.rational(mu.p, 0)
    for b, d in mu.cells:
        target = tuple(
            k if zi == 0 else max(k, -ord_p(zi, mu.p)) for zi, k in zip(z, b.exps)
        )
        for piece in b.refine(target):
            total = total + character_value(z, piece.center, mu.p) * (d * piece.haar())
    return total


def dual_grid(p: int, dim: int, level: int, support_exp: int = 0) -> list[tuple[Fraction, ...]]:
    """Representatives of ``(p^-level Z_p / p^-support_exp Z_p)^dim``."""
    n = p ** (level - support_exp)
    step = Fraction(1, p**level)
    return [tuple(j * step for j in js) for js in itertools.product(range(n), repeat=dim)]


@dataclass(frozen=True)
class ThetaTable:
    """Samples of a characteristic functional on a full dual grid.

    Frequencies are ``j / p^level`` per coordinate with
    ``0 <= j < p^(level - support_exp)``; the table describes a measure
    supported in ``(p^support_exp Z_p)^dim`` with cells no finer than
    ``p^-level``.
    """

    pp: PrimePair
    dim: int
    level: int
    samples: dict = field(hash=False)
    support_exp: int = 0


def theta_table(mu: CellMeasure, level: int, support_exp: int = 0) -> ThetaTable:
    box = Ball(mu.p, (Fraction(0),) * mu.dim, (support_exp,) * mu.dim)
    for b, d in mu.cells:
        if d and not box.contains(b):
            raise ValueError(f"cell {b} lies outside the support box {box}")
        if d and max(b.exps) > level:
            raise ValueError(f"cell {b} is finer than level {level}")
    samples = {z: theta(mu, z) for z in dual_grid(mu.p, mu.dim, level, support_exp)}
    return ThetaTable(mu.pp, mu.dim, level, samples, support_exp)


def invert(table: ThetaTable) -> CellMeasure:
    """Finite Fourier inversion on ``(p^e Z_p / p^m Z_p)^dim``.

    ``mu(c + p^m Z_p^n) = p^-((m-e) n) sum_z theta(z) chi(-<z, c>)``; the sum
    is carried out one axis at a time in the group ring of ``Z / p^(m-e)``.
    """
    p, n, m, e = table.pp.p, table.dim, table.level, table.support_exp
    L = m - e
    N = p**L
    grid = dual_grid(p, n, m, e)
    missing = [z for z in grid if z not in table.samples]
    if missing:
        raise ValueError(f"table incomplete for level {m}: missing {missing[0]}")
    data: dict[tuple[int, ...], list[Fraction]] = {}
    for z in grid:
        idx = tuple(int(zi * p**m) for zi in z)
        v = table.samples[z]
        if v.p != p or v.level > L:
            raise ValueError("sample outside the cyclotomic level of the grid")
        data[idx] = v.group_ring(L)
    for axis in range(n):
        out: dict[tuple[int, ...], list[Fraction]] = {}
        for idx, vec in data.items():
            j = idx[axis]
            for t in range(N):
                key = idx[:axis] + (t,) + idx[axis + 1:]
                acc = out.setdefault(key, [Fraction(0)] * N)
                shift = (-j * t) % N
                for i, c in enumerate(vec):
                    if c:
                        acc[(i + shift) % N] += c
        data = out
    scale = Fraction(1, N**n)
    cell_vol = Fraction(p) ** (m * n)
    cells = []
    for idx, vec in data.items():
        mass = CycloValue.from_group_ring(p, L, vec)
        if not mass.is_rational():
            raise ValueError("table is not the transform of a rational measure")
        mass = mass.to_fraction() * scale
        if mass:
            center = tuple(Fraction(t) * Fraction(p) ** e for t in idx)
            cells.append((Ball(p, center, (m,) * n), mass * cell_vol))
    return CellMeasure(table.pp, n, tuple(cells)).canonical()


# -- identity checks ---------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    passed: bool
    checked: int
    first_failure: object = None
    detail: str = ""


def _support_exp(measures: Sequence[CellMeasure]) -> int:
    """Largest ``e <= 0`` with every cell inside ``(p^e Z_p)^dim``; the
    transforms are then periodic modulo ``p^-e``."""
    e = 0
    for mu in measures:
        for b, d in mu.cells:
            if d:
                for c, k in zip(b.center, b.exps):
                    e = min(e, k if c == 0 else min(k, ord_p(c, mu.p)))
    return int(e)


def full_grid(measures: Sequence[CellMeasure], level: int) -> list[tuple[Fraction, ...]]:
    """A complete set of frequencies of level ``level`` for the given measures."""
    mu = measures[0]
    return dual_grid(mu.p, mu.dim, level, _support_exp(measures))


def check_product(mu: CellMeasure, factors: Sequence[CellMeasure], level: int) -> Verdict:
    """``theta_mu(z_1..z_n) == prod theta_l(z_l)`` on a full grid."""
    dims = [f.dim for f in factors]
    if sum(dims) != mu.dim:
        raise ValueError("factor dimensions do not add up")
    grid = full_grid([mu], level)
    for z in grid:
        rhs = CycloValue.rational(mu.p, 1)
        pos = 0
        for f, k in zip(factors, dims):
            rhs = rhs * theta(f, z[pos:pos + k])
            pos += k
        if theta(mu, z) != rhs:
            return Verdict(False, len(grid), z)
    return Verdict(True, len(grid))


def check_convolution(mu: CellMeasure, mu1: CellMeasure, mu2: CellMeasure, level: int) -> Verdict:
    """``theta_mu(z) == theta_1(z) theta_2(z)`` on a full grid."""
    if not (mu.dim == mu1.dim == mu2.dim):
        raise ValueError("dimension mismatch")
    grid = full_grid([mu, mu1, mu2], level)
    for z in grid:
        if theta(mu, z) != theta(mu1, z) * theta(mu2, z):
            return Verdict(False, len(grid), z)
    return Verdict(True, len(grid))


def check_image(mu: CellMeasure, c, level: int) -> Verdict:
    """``theta(image of mu under x -> c x)(z) == theta_mu(c z)``."""
    c = as_fraction(c)
    img = image_affine(mu, c, 0)
    grid = full_grid([img, mu], level)
    for z in grid:
        if theta(img, z) != theta(mu, tuple(c * zi for zi in z)):
            return Verdict(False, len(grid), z)
    return Verdict(True, len(grid))


@dataclass(frozen=True)
class SazonovEntry:
    x: tuple
    y: tuple
    in_window: bool
    difference: CycloValue | None
    norm_bound: Fraction | None


@dataclass(frozen=True)
class SazonovReport:
    window: str
    entries: tuple[SazonovEntry, ...]

    @property
    def max_bound(self) -> Fraction:
        return max((e.norm_bound for e in self.entries if e.in_window), default=Fraction(0))


def sazonov_gap(mu: CellMeasure, S: Sequence, pairs: Sequence[tuple]) -> SazonovReport:
    """Differences ``theta(y) - theta(x)`` for pairs with ``|<z, S z>|_p < 1``,
    ``z = x - y``, with their s-adic norm bounds.  Out-of-window pairs are
    listed but not evaluated."""
    S = [as_fraction(v) for v in S]
    if len(S) != mu.dim or any(v == 0 for v in S):
        raise ValueError("S must be diagonal with nonzero entries")
    entries = []
    for x, y in pairs:
        x, y = _vec(x), _vec(y)
        z = tuple(a - b for a, b in zip(x, y))
        q = sum((si * zi * zi for si, zi in zip(S, z)), Fraction(0))
        inside = q == 0 or ord_p(q, mu.p) > 0
        if not inside:
            entries.append(SazonovEntry(x, y, False, None, None))
            continue
        diff = theta(mu, y) - theta(mu, x)
        entries.append(SazonovEntry(x, y, True, diff, cyclo_norm_bound(diff, mu.s)))
    return SazonovReport("|<z,Sz>|_p < 1 (p-adic valuation of the quadratic form)", tuple(entries))
