"""Exact p-adic arithmetic on rationals, balls and clopen sets of Q_p^n.

Scalars are plain :class:`fractions.Fraction` values; the p-adic structure
lives in the functions below.  A ball is stored by a canonical center and an
integer radius exponent ``k`` per coordinate, denoting
``{y : |y_i - c_i|_p <= p^-k_i}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import inf
from typing import Iterable, Sequence

from uml.config import max_dim

Scalar = Fraction


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class PrimePair:
    """The residue prime ``p`` of the field and the prime ``s`` of the value field."""

    p: int
    s: int

    def __post_init__(self):
        if not (is_prime(self.p) and is_prime(self.s)):
            raise ValueError(f"p={self.p} and s={self.s} must both be prime")
        if self.p == self.s:
            raise ValueError("p and s must differ")


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        raise TypeError("floating point values are not accepted")
    return Fraction(x)


def int_ord(n: int, p: int) -> int:
    """Multiplicity of ``p`` in the nonzero integer ``n``."""
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def ord_p(x, p: int):
    """p-adic valuation of a rational; ``math.inf`` for zero."""
    x = as_fraction(x)
    if x == 0:
        return inf
    return int_ord(x.numerator, p) - int_ord(x.denominator, p)


def abs_p(x, p: int) -> Fraction:
    """``|x|_p = p^-ord(x)`` as an exact rational."""
    v = ord_p(x, p)
    if v == inf:
        return Fraction(0)
    return Fraction(p) ** (-v)


def fractional_part(x, p: int) -> Fraction:
    """The p-adic fractional part ``{x}_p``.

    The unique ``m / p^e`` in ``[0, 1)`` with ``x - m/p^e`` a p-adic integer.
    """
    x = as_fraction(x)
    den = x.denominator
    e = int_ord(den, p)
    if e == 0:
        return Fraction(0)
    pe = p**e
    unit = den // pe
    m = (x.numerator * pow(unit, -1, pe)) % pe
    return Fraction(m, pe)


def reduce_mod(x, k: int, p: int) -> Fraction:
    """Canonical representative of ``x + p^k Z_p``: the unique element of
    ``Z[1/p]`` in ``[0, p^k)`` congruent to ``x``."""
    x = as_fraction(x)
    scale = Fraction(p) ** k
    return fractional_part(x / scale, p) * scale


# -- balls -------------------------------------------------------------------


@dataclass(frozen=True, order=False)
class Ball:
    """A product ball in Q_p^n with canonical center."""

    p: int
    center: tuple[Fraction, ...]
    exps: tuple[int, ...]

    def __post_init__(self):
        if len(self.center) != len(self.exps):
            raise ValueError("center and exps must have the same length")
        if not 1 <= len(self.exps) <= max_dim():
            raise ValueError(f"dimension must be in [1, {max_dim()}]")
        canon = tuple(
            reduce_mod(c, k, self.p) for c, k in zip(self.center, self.exps)
        )
        object.__setattr__(self, "center", canon)
        object.__setattr__(self, "exps", tuple(int(k) for k in self.exps))

    @classmethod
    def make(cls, p: int, center, exps) -> "Ball":
        if not isinstance(center, (tuple, list)):
            center = (center,)
        if isinstance(exps, int):
            exps = (exps,) * len(center)
        return cls(p, tuple(as_fraction(c) for c in center), tuple(exps))

    @property
    def dim(self) -> int:
        return len(self.exps)

    def haar(self) -> Fraction:
        return Fraction(self.p) ** (-sum(self.exps))

    def contains_point(self, x: Sequence) -> bool:
        return all(
            ord_p(as_fraction(xi) - c, self.p) >= k
            for xi, c, k in zip(x, self.center, self.exps)
        )

    def contains(self, other: "Ball") -> bool:
        return all(
            ko >= k and ord_p(co - c, self.p) >= k
            for c, k, co, ko in zip(self.center, self.exps, other.center, other.exps)
        )

    def intersect(self, other: "Ball") -> "Ball | None":
        center, exps = [], []
        for c, k, co, ko in zip(self.center, self.exps, other.center, other.exps):
            if ord_p(co - c, self.p) < min(k, ko):
                return None
            if k >= ko:
                center.append(c)
                exps.append(k)
            else:
                center.append(co)
                exps.append(ko)
        return Ball(self.p, tuple(center), tuple(exps))

    def split(self, axis: int = 0) -> list["Ball"]:
        """The ``p`` sub-balls one level finer along ``axis``."""
        step = Fraction(self.p) ** self.exps[axis]
        out = []
        for t in range(self.p):
            c = list(self.center)
            c[axis] = c[axis] + t * step
            e = list(self.exps)
            e[axis] += 1
            out.append(Ball(self.p, tuple(c), tuple(e)))
        return out

    def refine(self, exps: Sequence[int]) -> list["Ball"]:
        """All sub-balls with the (finer or equal) radius exponents ``exps``."""
        axes = []
        for c, k, kk in zip(self.center, self.exps, exps):
            if kk < k:
                raise ValueError("refine target must be finer")
            step = Fraction(self.p) ** k
            axes.append([c + t * step for t in range(self.p ** (kk - k))])
        return [Ball(self.p, tuple(cs), tuple(exps)) for cs in itertools.product(*axes)]

    def translate(self, a: Sequence) -> "Ball":
        return Ball(
            self.p,
            tuple(c + as_fraction(ai) for c, ai in zip(self.center, a)),
            self.exps,
        )

    def sort_key(self):
        return (tuple(-k for k in self.exps), self.center)

    def __repr__(self):
        cs = ",".join(str(c) for c in self.center)
        ks = ",".join(str(k) for k in self.exps)
        return f"B({cs}; exp {ks})"


def ball(p: int, center, exps) -> Ball:
    return Ball.make(p, center, exps)


# Canonical clopen sets are unions of "balanced" product balls: the nodes of
# the tree obtained by refining coordinates round-robin.  Balanced balls are
# pairwise nested or disjoint, which makes the maximal-node form unique.


def balanced_exps(depth: int, n: int) -> tuple[int, ...]:
    q, r = divmod(depth, n)
    return tuple(q + 1 if i < r else q for i in range(n))


def is_balanced(exps: Sequence[int]) -> bool:
    return max(exps) - min(exps) <= 1 and list(exps) == sorted(exps, reverse=True)


def depth_of(exps: Sequence[int]) -> int:
    return sum(exps)


def balanced_cover_depth(exps: Sequence[int]) -> int:
    """Smallest depth whose balanced exponents are >= ``exps`` coordinatewise."""
    n = len(exps)
    d = n * max(exps)
    while all(b >= e for b, e in zip(balanced_exps(d - 1, n), exps)):
        d -= 1
    return d


def to_balanced(b: Ball) -> list[Ball]:
    if is_balanced(b.exps):
        return [b]
    return b.refine(balanced_exps(balanced_cover_depth(b.exps), b.dim))


def parent(b: Ball) -> Ball:
    """Parent of a balanced ball in the round-robin tree."""
    d = depth_of(b.exps)
    exps = balanced_exps(d - 1, b.dim)
    return Ball(b.p, b.center, exps)


def _drop_nested(nodes: Iterable[Ball]) -> list[Ball]:
    keep: set[Ball] = set()
    for b in sorted(set(nodes), key=lambda x: depth_of(x.exps)):
        if not keep:
            keep.add(b)
            continue
        min_depth = min(depth_of(k.exps) for k in keep)
        a = b
        covered = False
        while depth_of(a.exps) > min_depth:
            a = parent(a)
            if a in keep:
                covered = True
                break
        if not covered:
            keep.add(b)
    return list(keep)


def _merge_siblings(nodes: set[Ball], p: int) -> set[Ball]:
    changed = True
    while changed:
        changed = False
        groups: dict[Ball, list[Ball]] = {}
        for b in nodes:
            groups.setdefault(parent(b), []).append(b)
        for par, kids in groups.items():
            if len(kids) == p:
                nodes.difference_update(kids)
                nodes.add(par)
                changed = True
    return nodes


@dataclass(frozen=True)
class ClopenSet:
    """A compact clopen subset of Q_p^n in canonical form."""

    p: int
    dim: int
    balls: tuple[Ball, ...]

    @classmethod
    def empty(cls, p: int, dim: int = 1) -> "ClopenSet":
        return cls(p, dim, ())

    @classmethod
    def of(cls, p: int, balls: Iterable[Ball], dim: int | None = None) -> "ClopenSet":
        return canonicalize(list(balls), p=p, dim=dim)

    def is_empty(self) -> bool:
        return not self.balls

    def haar(self) -> Fraction:
        return sum((b.haar() for b in self.balls), Fraction(0))

    def contains_point(self, x) -> bool:
        return any(b.contains_point(x) for b in self.balls)

    def union(self, other: "ClopenSet") -> "ClopenSet":
        return canonicalize(self.balls + other.balls, p=self.p, dim=self.dim)

    def intersection(self, other: "ClopenSet") -> "ClopenSet":
        out = []
        for a in self.balls:
            for b in other.balls:
                c = a.intersect(b)
                if c is not None:
                    out.append(c)
        return canonicalize(out, p=self.p, dim=self.dim)

    def difference(self, other: "ClopenSet") -> "ClopenSet":
        out: list[Ball] = []
        for a in self.balls:
            out.extend(_subtract(a, [b for b in other.balls if a.intersect(b) is not None]))
        return canonicalize(out, p=self.p, dim=self.dim)

    def complement_in(self, bound: Ball) -> "ClopenSet":
        return ClopenSet.of(self.p, [bound], self.dim).difference(self)

    def is_subset(self, other: "ClopenSet") -> bool:
        return self.difference(other).is_empty()

    def translate(self, a) -> "ClopenSet":
        return canonicalize([b.translate(a) for b in self.balls], p=self.p, dim=self.dim)

    def __repr__(self):
        return "{" + " ∪ ".join(map(repr, self.balls)) + "}" if self.balls else "∅"


def _subtract(a: Ball, others: list[Ball]) -> list[Ball]:
    if not others:
        return [a]
    if any(o.contains(a) for o in others):
        return []
    axis = _split_axis(a)
    out = []
    for child in a.split(axis):
        out.extend(_subtract(child, [o for o in others if child.intersect(o) is not None]))
    return out


def _split_axis(b: Ball) -> int:
    # refine the coarsest coordinate first; ties go to the lowest index
    return min(range(b.dim), key=lambda i: (b.exps[i], i))


def canonicalize(balls: Sequence[Ball], p: int | None = None, dim: int | None = None) -> ClopenSet:
    """Unique sorted disjoint representation of a finite union of balls.

    Nested balls are absorbed and complete sibling families are merged.
    """
    balls = list(balls)
    if not balls:
        if p is None:
            raise ValueError("p is required for an empty set")
        return ClopenSet(p, dim or 1, ())
    p = balls[0].p if p is None else p
    dim = balls[0].dim if dim is None else dim
    if any(b.p != p or b.dim != dim for b in balls):
        raise ValueError("balls must share p and dimension")
    nodes: list[Ball] = []
    for b in balls:
        nodes.extend(to_balanced(b))
    kept = _merge_siblings(set(_drop_nested(nodes)), p)
    kept = set(_drop_nested(kept))
    return ClopenSet(p, dim, tuple(sorted(kept, key=Ball.sort_key)))


# -- shells ------------------------------------------------------------------


@dataclass(frozen=True)
class Shell:
    j: int
    set: ClopenSet
    haar: Fraction


@dataclass(frozen=True)
class ShellSystem:
    """Shells ``S(j,n) = p^j Z_p \\ p^(j+1) Z_p`` for ``j_min <= j < n`` and
    ``S(n,n) = p^n Z_p``."""

    pp: PrimePair
    n: int
    j_min: int
    shells: tuple[Shell, ...]

    def shell_index(self, x) -> int:
        """Index ``j`` of the shell containing ``x`` (may lie below the window)."""
        v = ord_p(x, self.pp.p)
        return self.n if v >= self.n else int(v)


def shell_set(p: int, j: int, n: int, center=0) -> ClopenSet:
    if j == n:
        return ClopenSet.of(p, [ball(p, center, n)])
    outer = ClopenSet.of(p, [ball(p, center, j)])
    inner = ClopenSet.of(p, [ball(p, center, j + 1)])
    return outer.difference(inner)


def shell_haar(p: int, j: int, n: int) -> Fraction:
    if j == n:
        return Fraction(p) ** (-n)
    return Fraction(p) ** (-j) * (1 - Fraction(1, p))


def shells(pp: PrimePair, n: int, j_min: int) -> ShellSystem:
    if j_min > n:
        raise ValueError("j_min must not exceed n")
    out = tuple(
        Shell(j, shell_set(pp.p, j, n), shell_haar(pp.p, j, n))
        for j in range(j_min, n + 1)
    )
    return ShellSystem(pp, n, j_min, out)
