"""Measures with locally constant densities against the normalized Haar measure.

Three concrete kinds share one informal interface (``dim``, ``density_at``,
``measure_of_ball``, ``measure_of``, ``total_mass``):

* :class:`CellMeasure`: finitely many disjoint product balls with rational
  densities;
* :class:`RadialMeasure`: a one-dimensional density that is constant on
  the shells around a center, with a geometric outer tail summed in Q_s;
* :class:`ProductMeasure`: a finite product of one-dimensional factors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from operator import mul
from typing import Iterable, Sequence

from uml.padic import (
    Ball,
    ClopenSet,
    PrimePair,
    as_fraction,
    ball,
    depth_of,
    ord_p,
    parent,
    to_balanced,
)
from uml.svalues import DivergentSeries, s_norm


def _prod(xs: Iterable[Fraction]) -> Fraction:
    return reduce(mul, xs, Fraction(1))


def _as_vector(x) -> tuple[Fraction, ...]:
    if isinstance(x, (list, tuple)):
        return tuple(as_fraction(v) for v in x)
    return (as_fraction(x),)


def _as_set(A, p: int, dim: int) -> ClopenSet:
    if isinstance(A, ClopenSet):
        return A
    if isinstance(A, Ball):
        return ClopenSet(p, dim, (A,))
    return ClopenSet.of(p, A, dim)


# -- overlapping pieces to disjoint cells ------------------------------------


def _split_balanced(b: Ball) -> list[Ball]:
    return b.split(depth_of(b.exps) % b.dim)


def flatten_pieces(pieces: Iterable[tuple[Ball, Fraction]]) -> list[tuple[Ball, Fraction]]:
    """Turn possibly overlapping (ball, density) pieces into disjoint cells
    whose density is the sum over all pieces covering them."""
    acc: dict[Ball, Fraction] = {}
    for b, d in pieces:
        for node in to_balanced(b):
            acc[node] = acc.get(node, Fraction(0)) + d
    return _flatten_nodes(acc)


def _flatten_nodes(acc: dict[Ball, Fraction]) -> list[tuple[Ball, Fraction]]:
    order = sorted(acc, key=lambda b: depth_of(b.exps))
    roots: dict[Ball, list[Ball]] = {}
    for b in order:
        if not roots:
            roots[b] = []
            continue
        a, top = b, min(depth_of(r.exps) for r in roots)
        owner = None
        while depth_of(a.exps) > top:
            a = parent(a)
            if a in roots:
                owner = a
                break
        if owner is None:
            roots[b] = []
        else:
            roots[owner].append(b)
    out = []
    for r, inside in roots.items():
        base = acc[r]
        if not inside:
            out.append((r, base))
            continue
        for child in _split_balanced(r):
            sub = {child: base}
            for b in inside:
                if child.contains(b):
                    sub[b] = sub.get(b, Fraction(0)) + acc[b]
            out.extend(_flatten_nodes(sub))
    return out


def _merge_equal_siblings(cells: dict[Ball, Fraction], p: int) -> dict[Ball, Fraction]:
    changed = True
    while changed:
        changed = False
        groups: dict[Ball, list[Ball]] = {}
        for b in cells:
            groups.setdefault(parent(b), []).append(b)
        for par, kids in groups.items():
            if len(kids) == p and len({cells[k] for k in kids}) == 1:
                d = cells[kids[0]]
                for k in kids:
                    del cells[k]
                cells[par] = d
                changed = True
    return cells


# -- cell measures -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellMeasure:
    """A measure ``sum_cells density * Haar|cell`` on Q_p^dim."""

    pp: PrimePair
    dim: int
    cells: tuple[tuple[Ball, Fraction], ...]

    def __post_init__(self):
        cells = tuple((b, as_fraction(d)) for b, d in self.cells)
        for b, _ in cells:
            if b.dim != self.dim or b.p != self.pp.p:
                raise ValueError(f"cell {b} does not match p={self.pp.p}, dim={self.dim}")
        for (a, _), (b, _) in itertools.combinations(cells, 2):
            if a.intersect(b) is not None:
                raise ValueError(f"cells {a} and {b} overlap")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_pieces(cls, pp: PrimePair, dim: int, pieces: Iterable[tuple[Ball, Fraction]]) -> "CellMeasure":
        return cls(pp, dim, tuple(flatten_pieces(pieces))).canonical()

    @classmethod
    def zero(cls, pp: PrimePair, dim: int = 1) -> "CellMeasure":
        return cls(pp, dim, ())

    @property
    def p(self) -> int:
        return self.pp.p

    @property
    def s(self) -> int:
        return self.pp.s

    def canonical(self) -> "CellMeasure":
        """Balanced cells, zero densities dropped, equal-density siblings
        merged, sorted."""
        acc: dict[Ball, Fraction] = {}
        for b, d in self.cells:
            if d:
                for node in to_balanced(b):
                    acc[node] = d
        acc = _merge_equal_siblings(acc, self.p)
        cells = tuple(sorted(acc.items(), key=lambda bd: bd[0].sort_key()))
        return CellMeasure(self.pp, self.dim, cells)

    def __eq__(self, other):
        if not isinstance(other, CellMeasure):
            return NotImplemented
        a, b = self.canonical(), other.canonical()
        return (a.pp, a.dim, a.cells) == (b.pp, b.dim, b.cells)

    def __hash__(self):
        c = self.canonical()
        return hash((c.pp, c.dim, c.cells))

    def support(self) -> ClopenSet:
        return ClopenSet.of(self.p, [b for b, d in self.cells if d], self.dim)

    def max_level(self) -> int:
        return max((max(b.exps) for b, _ in self.cells), default=0)

    def density_at(self, x) -> Fraction:
        x = _as_vector(x)
        for b, d in self.cells:
            if b.contains_point(x):
                return d
        return Fraction(0)

    def measure_of_ball(self, B: Ball) -> Fraction:
        total = Fraction(0)
        for b, d in self.cells:
            c = b.intersect(B)
            if c is not None:
                total += d * c.haar()
        return total

    def measure_of(self, A) -> Fraction:
        A = _as_set(A, self.p, self.dim)
        return sum((self.measure_of_ball(B) for B in A.balls), Fraction(0))

    def total_mass(self) -> Fraction:
        return sum((d * b.haar() for b, d in self.cells), Fraction(0))

    def is_probability(self) -> bool:
        return self.total_mass() == 1 and mu_norm(self) == 1

    def refine(self, level: int) -> "CellMeasure":
        """Every cell split down to radius exponent ``level`` per coordinate."""
        out = []
        for b, d in self.cells:
            target = tuple(max(k, level) for k in b.exps)
            out.extend((c, d) for c in b.refine(target))
        return CellMeasure(self.pp, self.dim, tuple(out))

    def scaled(self, a) -> "CellMeasure":
        a = as_fraction(a)
        return CellMeasure(self.pp, self.dim, tuple((b, d * a) for b, d in self.cells))

    def marginal(self, k: int) -> "CellMeasure":
        """Image under the projection onto the first ``k`` coordinates."""
        if not 1 <= k <= self.dim:
            raise ValueError("bad marginal dimension")
        if k == self.dim:
            return self
        pieces = []
        for b, d in self.cells:
            rest = Fraction(self.p) ** (-sum(b.exps[k:]))
            pieces.append((Ball(self.p, b.center[:k], b.exps[:k]), d * rest))
        return CellMeasure.from_pieces(self.pp, k, pieces)

    def norm_outside(self, e: int) -> Fraction:
        """``||Q_p^n \\ B(0, p^-e)^n||_mu``."""
        box = Ball(self.p, (Fraction(0),) * self.dim, (e,) * self.dim)
        return max(
            (s_norm(d, self.s) for b, d in self.cells if d and not box.contains(b)),
            default=Fraction(0),
        )

    def __repr__(self):
        inner = ", ".join(f"{b}: {d}" for b, d in self.cells)
        return f"CellMeasure(p={self.p}, s={self.s}, dim={self.dim}, [{inner}])"


def haar(pp: PrimePair, B: Ball | None = None, density=1) -> CellMeasure:
    """Haar measure (times ``density``) restricted to ``B`` (default Z_p)."""
    if B is None:
        B = ball(pp.p, 0, 0)
    return CellMeasure(pp, B.dim, ((B, as_fraction(density)),))


def uniform(pp: PrimePair, B: Ball) -> CellMeasure:
    """Probability measure uniform on ``B``."""
    return haar(pp, B, 1 / B.haar())


# -- norms -------------------------------------------------------------------


def measure_of(mu, A) -> Fraction:
    return mu.measure_of(A)


def mu_norm(mu: CellMeasure, A=None) -> Fraction:
    """``||A||_mu``: the largest ``|density|_s`` over cells meeting ``A``.

    A single sub-ball ``B`` of a cell has ``mu(B) = density * p^-k`` and
    ``|p^-k|_s = 1``, so the sup over sub-clopens is attained.
    """
    if A is None:
        return max((s_norm(d, mu.s) for _, d in mu.cells), default=Fraction(0))
    A = _as_set(A, mu.p, mu.dim)
    best = Fraction(0)
    for b, d in mu.cells:
        if any(b.intersect(B) is not None for B in A.balls):
            best = max(best, s_norm(d, mu.s))
    return best


def mu_norm_bruteforce(mu: CellMeasure, A, level: int) -> Fraction:
    """Oracle for :func:`mu_norm`: max ``|mu(B)|_s`` over the sub-balls of
    ``A`` down to radius exponent ``level`` and over unions of the level
    pieces inside each ball of ``A``."""
    A = _as_set(A, mu.p, mu.dim)
    best = Fraction(0)
    for B in A.balls:
        target = tuple(max(k, level) for k in B.exps)
        leaves = B.refine(target)
        for leaf in leaves:
            best = max(best, s_norm(mu.measure_of_ball(leaf), mu.s))
        # coarser sub-balls
        for k in range(max(B.exps), max(target) + 1):
            for sub in B.refine(tuple(max(kk, k) for kk in B.exps)):
                best = max(best, s_norm(mu.measure_of_ball(sub), mu.s))
        if len(leaves) <= 12:
            for r in range(2, len(leaves) + 1):
                for combo in itertools.combinations(leaves, r):
                    v = sum((mu.measure_of_ball(c) for c in combo), Fraction(0))
                    best = max(best, s_norm(v, mu.s))
    return best


def n_mu(mu, x) -> Fraction:
    """``N_mu(x)``: the s-adic size of the density at ``x``."""
    return s_norm(mu.density_at(x), mu.pp.s)


# -- step functions and integration ------------------------------------------


@dataclass(frozen=True)
class StepFunction:
    """A locally constant function: ``value`` on each (disjoint) piece and
    ``default`` elsewhere.  Values are rationals or :class:`CycloValue`."""

    p: int
    dim: int
    pieces: tuple[tuple[Ball, object], ...]
    default: object = Fraction(0)

    def __post_init__(self):
        for (a, _), (b, _) in itertools.combinations(self.pieces, 2):
            if a.intersect(b) is not None:
                raise ValueError("step function pieces overlap")

    @classmethod
    def indicator(cls, A: ClopenSet, value=1) -> "StepFunction":
        v = as_fraction(value)
        return cls(A.p, A.dim, tuple((b, v) for b in A.balls))

    def __call__(self, x):
        x = _as_vector(x)
        for b, v in self.pieces:
            if b.contains_point(x):
                return v
        return self.default

    def scale(self, a) -> "StepFunction":
        return StepFunction(
            self.p, self.dim, tuple((b, v * a) for b, v in self.pieces), self.default * a
        )

    def translate(self, a) -> "StepFunction":
        """``x -> f(x - a)``."""
        return StepFunction(
            self.p, self.dim, tuple((b.translate(a), v) for b, v in self.pieces), self.default
        )

    def __add__(self, other: "StepFunction") -> "StepFunction":
        acc: list[tuple[Ball, object]] = []
        pieces = [(b, v - self.default) for b, v in self.pieces] + [
            (b, v - other.default) for b, v in other.pieces
        ]
        cells: dict[Ball, object] = {}
        for b, v in pieces:
            for node in to_balanced(b):
                cells[node] = cells.get(node, 0) + v
        for b, v in _flatten_generic(cells):
            acc.append((b, v + self.default + other.default))
        return StepFunction(self.p, self.dim, tuple(acc), self.default + other.default)

    def support_balls(self) -> list[Ball]:
        return [b for b, _ in self.pieces]


def _flatten_generic(acc: dict[Ball, object]) -> list[tuple[Ball, object]]:
    # _flatten_nodes only needs + on values
    return _flatten_nodes(acc)  # type: ignore[arg-type]


def integrate(mu, f: StepFunction):
    """``int f dmu`` for a step function and any measure kind.

    A nonzero ``default`` needs ``mu.total_mass()``.
    """
    total = 0
    for b, v in f.pieces:
        w = v - f.default
        if w:
            total = total + w * mu.measure_of_ball(b)
    if f.default:
        total = total + f.default * mu.total_mass()
    if isinstance(total, int):
        total = Fraction(total)
    return total


# -- product, convolution, images, mixtures ----------------------------------


def product(mu1: CellMeasure, mu2: CellMeasure) -> CellMeasure:
    if mu1.pp != mu2.pp:
        raise ValueError("prime pairs differ")
    cells = tuple(
        (Ball(mu1.p, b1.center + b2.center, b1.exps + b2.exps), d1 * d2)
        for b1, d1 in mu1.cells
        for b2, d2 in mu2.cells
    )
    return CellMeasure(mu1.pp, mu1.dim + mu2.dim, cells)


def convolve(mu1: CellMeasure, mu2: CellMeasure) -> CellMeasure:
    """Image of ``mu1 x mu2`` under ``(x, y) -> x + y``.

    The sum of the uniform measures on two balls is uniform on the sum ball
    ``c1 + c2 + p^min(k1,k2) Z_p`` (per coordinate) with total mass
    ``Haar(B1) Haar(B2)``.
    """
    if mu1.pp != mu2.pp or mu1.dim != mu2.dim:
        raise ValueError("convolution needs equal p and dimension")
    pieces = []
    for b1, d1 in mu1.cells:
        for b2, d2 in mu2.cells:
            center = tuple(c1 + c2 for c1, c2 in zip(b1.center, b2.center))
            exps = tuple(min(k1, k2) for k1, k2 in zip(b1.exps, b2.exps))
            B = Ball(mu1.p, center, exps)
            mass = d1 * b1.haar() * d2 * b2.haar()
            pieces.append((B, mass / B.haar()))
    return CellMeasure.from_pieces(mu1.pp, mu1.dim, pieces)


def image_affine(mu: CellMeasure, c, a=0) -> CellMeasure:
    """Image of ``mu`` under ``x -> c x + a`` (``c`` a nonzero scalar).

    ``measure_of(image, cA + a) == measure_of(mu, A)``; the density of each
    image cell is the original density times ``|c|_p^-dim``.
    """
    c = as_fraction(c)
    if c == 0:
        raise ValueError("c = 0 is not invertible")
    a = _as_vector(a)
    if len(a) == 1 and mu.dim > 1:
        a = a * mu.dim
    v = ord_p(c, mu.p)
    cells = []
    for b, d in mu.cells:
        center = tuple(c * x + ai for x, ai in zip(b.center, a))
        exps = tuple(k + v for k in b.exps)
        cells.append((Ball(mu.p, center, exps), d * Fraction(mu.p) ** (v * mu.dim)))
    return CellMeasure(mu.pp, mu.dim, tuple(cells))


def mix(family: Sequence[tuple[object, CellMeasure]], weights: dict) -> CellMeasure:
    """``mu(A) = sum_y nu(y) mu_y(A)`` over a finite mixing base."""
    if not family:
        raise ValueError("empty family")
    pp, dim = family[0][1].pp, family[0][1].dim
    pieces = []
    for y, m in family:
        if m.dim != dim or m.pp != pp:
            raise ValueError("family members must share p, s and dimension")
        w = as_fraction(weights[y])
        pieces.extend((b, w * d) for b, d in m.cells)
    out = CellMeasure.from_pieces(pp, dim, pieces)
    # ||A||_mu <= sup_y ||A||_{mu_y} * ||Y||_nu
    bound = max(mu_norm(m) for _, m in family) * max(s_norm(as_fraction(weights[y]), pp.s) for y, _ in family)
    assert mu_norm(out) <= bound, "mixture norm bound violated"
    return out


@dataclass(frozen=True)
class ShrinkVerdict:
    norms: tuple[Fraction, ...]
    eventually_zero: bool


def shrink_limit_check(mu, chain: Sequence[ClopenSet]) -> ShrinkVerdict:
    """Check ``mu(A_k) -> 0`` along a nested clopen chain with empty intersection.

    For compact clopen sets the intersection of a finite nested chain is its
    last member, which must therefore be empty.
    """
    for a, b in zip(chain, chain[1:]):
        if not b.is_subset(a):
            raise ValueError("chain is not decreasing")
    if chain and not chain[-1].is_empty():
        raise ValueError("chain has nonempty intersection")
    norms = tuple(s_norm(mu.measure_of(A), mu.pp.s) for A in chain)
    return ShrinkVerdict(norms, not norms or norms[-1] == 0)


# -- radial measures ---------------------------------------------------------


@dataclass(frozen=True)
class RadialMeasure:
    """One-dimensional measure with density ``inner`` on ``B(center, p^-n)``
    and ``outer_coeff * ratio^-j`` on the shell ``ord(x - center) = j < n``.

    ``|ratio|_s < 1`` makes the outer tail summable in Q_s.  ``scale``
    multiplies every density.
    """

    pp: PrimePair
    center: Fraction
    n: int
    inner: Fraction
    outer_coeff: Fraction
    ratio: Fraction
    scale: Fraction = Fraction(1)

    dim = 1

    @property
    def p(self) -> int:
        return self.pp.p

    @property
    def s(self) -> int:
        return self.pp.s

    def shell_density(self, j) -> Fraction:
        if j >= self.n:
            return self.scale * self.inner
        return self.scale * self.outer_coeff * self.ratio ** (-j)

    def shell_of(self, x) -> int:
        v = ord_p(as_fraction(x[0] if isinstance(x, (list, tuple)) else x) - self.center, self.p)
        return self.n if v >= self.n else int(v)

    def density_at(self, x) -> Fraction:
        return self.shell_density(self.shell_of(x))

    def shell_mass(self, j: int) -> Fraction:
        if j >= self.n:
            raise ValueError("shell index must be below n")
        return self.shell_density(j) * Fraction(self.p) ** (-j) * (1 - Fraction(1, self.p))

    def _check_tail(self):
        if self.outer_coeff and s_norm(self.ratio * self.p, self.s) >= 1:
            raise DivergentSeries("outer tail ratio is not s-adically small")

    def mass_below(self, e: int) -> Fraction:
        """Total mass of the shells ``j < e`` (``e <= n``), summed in Q_s."""
        if e > self.n:
            raise ValueError("e must not exceed n")
        if not self.outer_coeff:
            return Fraction(0)
        self._check_tail()
        # sum_{j<e} C r^-j p^-j (1-1/p) = C (1-1/p) sum_{k>=1-e} (r p)^k
        q = self.ratio * self.p
        return self.scale * self.outer_coeff * (1 - Fraction(1, self.p)) * q ** (1 - e) / (1 - q)

    def total_mass(self) -> Fraction:
        return self.scale * self.inner * Fraction(self.p) ** (-self.n) + self.mass_below(self.n)

    def measure_of_ball(self, B: Ball) -> Fraction:
        c, k = B.center[0], B.exps[0]
        j0 = ord_p(c - self.center, self.p)
        if j0 >= k:  # the ball is centered on our center
            if k >= self.n:
                return self.scale * self.inner * B.haar()
            inner = self.scale * self.inner * Fraction(self.p) ** (-self.n)
            return inner + sum((self.shell_mass(j) for j in range(k, self.n)), Fraction(0))
        return self.shell_density(j0) * B.haar()

    def measure_of(self, A) -> Fraction:
        A = _as_set(A, self.p, 1)
        return sum((self.measure_of_ball(B) for B in A.balls), Fraction(0))

    def sup_norm(self) -> Fraction:
        out = s_norm(self.shell_density(self.n), self.s)
        if self.outer_coeff:
            # |C r^-j|_s increases with j when |r|_s < 1
            out = max(out, s_norm(self.shell_density(self.n - 1), self.s))
        return out

    def norm_outside(self, e: int) -> Fraction:
        """sup of ``N`` over ``{x : ord(x - center) < e}``."""
        top = e - 1
        if top >= self.n:
            return self.sup_norm()
        return s_norm(self.shell_density(top), self.s) if self.outer_coeff else Fraction(0)

    def normalized(self) -> "RadialMeasure":
        return RadialMeasure(
            self.pp, self.center, self.n, self.inner, self.outer_coeff, self.ratio,
            self.scale / self.total_mass(),
        )

    def truncate(self, j_min: int) -> CellMeasure:
        """Cell measure keeping the shells ``j_min <= j < n`` and the core."""
        p = self.p
        cells = [(ball(p, self.center, self.n), self.shell_density(self.n))]
        for j in range(j_min, self.n):
            step = Fraction(p) ** j
            for t in range(1, p):
                cells.append((ball(p, self.center + t * step, j + 1), self.shell_density(j)))
        return CellMeasure(self.pp, 1, tuple(cells))

    def shifted(self, a) -> "RadialMeasure":
        """Translate: ``B -> mu(B - a)``."""
        return RadialMeasure(self.pp, self.center + as_fraction(a), self.n, self.inner,
                             self.outer_coeff, self.ratio, self.scale)


@dataclass(frozen=True)
class WeightedMeasure:
    """``g * base`` for a step function ``g`` (one-dimensional)."""

    base: object
    g: StepFunction

    dim = 1

    @property
    def pp(self) -> PrimePair:
        return self.base.pp

    def density_at(self, x) -> Fraction:
        return self.g(x) * self.base.density_at(x)


# -- product of one-dimensional factors ---------------------------------------


@dataclass(frozen=True)
class ProductMeasure:
    """``scale * (factor_1 x ... x factor_n)`` with one-dimensional factors."""

    factors: tuple
    scale: Fraction = Fraction(1)

    @property
    def pp(self) -> PrimePair:
        return self.factors[0].pp

    @property
    def p(self) -> int:
        return self.pp.p

    @property
    def s(self) -> int:
        return self.pp.s

    @property
    def dim(self) -> int:
        return len(self.factors)

    def density_at(self, x) -> Fraction:
        x = _as_vector(x)
        return self.scale * _prod(f.density_at(xi) for f, xi in zip(self.factors, x))

    def measure_of_ball(self, B: Ball) -> Fraction:
        return self.scale * _prod(
            f.measure_of_ball(Ball(B.p, (c,), (k,)))
            for f, c, k in zip(self.factors, B.center, B.exps)
        )

    def measure_of(self, A) -> Fraction:
        A = _as_set(A, self.p, self.dim)
        return sum((self.measure_of_ball(B) for B in A.balls), Fraction(0))

    def total_mass(self) -> Fraction:
        return self.scale * _prod(f.total_mass() for f in self.factors)

    def marginal(self, k: int) -> "ProductMeasure":
        dropped = _prod(f.total_mass() for f in self.factors[k:])
        return ProductMeasure(self.factors[:k], self.scale * dropped)

    def sup_norm(self) -> Fraction:
        return s_norm(self.scale, self.s) * _prod(_factor_sup(f) for f in self.factors)

    def norm_outside(self, e: int) -> Fraction:
        sups = [_factor_sup(f) for f in self.factors]
        best = Fraction(0)
        for i, f in enumerate(self.factors):
            others = _prod(sups[:i] + sups[i + 1:])
            best = max(best, f.norm_outside(e) * others)
        return s_norm(self.scale, self.s) * best

    def to_cells(self) -> CellMeasure:
        """Finite cell form; every factor must be a :class:`CellMeasure`."""
        pieces = []
        for combo in itertools.product(*(f.cells for f in self.factors)):
            center = tuple(b.center[0] for b, _ in combo)
            exps = tuple(b.exps[0] for b, _ in combo)
            d = self.scale * _prod(d for _, d in combo)
            pieces.append((Ball(self.p, center, exps), d))
        return CellMeasure(self.pp, self.dim, tuple(pieces))


def _factor_sup(f) -> Fraction:
    if isinstance(f, CellMeasure):
        return mu_norm(f)
    return f.sup_norm()


# -- pushforward oracle --------------------------------------------------------


def pushforward_ball_mass(U: Sequence[Sequence], mu, x, k: int, fine: int | None = None) -> Fraction:
    """``mu(U^-1 B(x, p^-k))`` by enumerating small balls.

    Membership of a small ball ``y + p^K Z_p^n`` is decided by testing
    ``U y - x`` against ``p^k Z_p^n``; ``K`` is chosen so that ``U`` maps
    each small ball into a single ball of radius ``p^-k``.
    """
    import sympy

    n = len(U)
    p = mu.pp.p
    x = _as_vector(x)
    Um = [[as_fraction(v) for v in row] for row in U]
    min_u = min(ord_p(v, p) for row in Um for v in row if v)
    inv = sympy.Matrix(Um).inv()
    Uinv = [[Fraction(int(inv[i, j].p), int(inv[i, j].q)) for j in range(n)] for i in range(n)]
    min_inv = min(ord_p(v, p) for row in Uinv for v in row if v)
    if fine is None:
        fine = k - min_u
        if isinstance(mu, CellMeasure):
            fine = max(fine, mu.max_level())
    pre = tuple(sum(Uinv[i][j] * x[j] for j in range(n)) for i in range(n))
    box = Ball(p, pre, (k + min_inv,) * n)
    fine = max(fine, k + min_inv)
    total = Fraction(0)
    for y in box.refine((fine,) * n):
        uy = [sum(Um[i][j] * y.center[j] for j in range(n)) for i in range(n)]
        if all(ord_p(uy[i] - x[i], p) >= k for i in range(n)):
            total += mu.measure_of_ball(y)
    return total


def pushforward_density(U, mu, x, k: int) -> Fraction:
    """Density at ``x`` of ``A -> mu(U^-1 A)`` against Haar, read off the
    ball ``B(x, p^-k)``."""
    n = len(U)
    return pushforward_ball_mass(U, mu, x, k) * Fraction(mu.pp.p) ** (k * n)
