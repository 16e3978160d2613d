"""The value side: s-adic norms, cyclotomic values, and Laurent values in T.

Measures take values in Q_s.  Character sums land in the cyclotomic ring
generated by p-power roots of unity, and pseudo-differential integrals are
kept symbolic in ``T = s^-b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import inf
from typing import Mapping

from uml.padic import as_fraction, ord_p


class DivergentSeries(ArithmeticError):
    """A geometric tail whose ratio has s-adic norm >= 1."""


def s_ord(x, s: int):
    return ord_p(x, s)


def s_norm(x, s: int) -> Fraction:
    """``|x|_s`` as an exact rational power of ``s`` (0 for zero)."""
    v = s_ord(x, s)
    if v == inf:
        return Fraction(0)
    return Fraction(s) ** (-v)


def norm_str(x: Fraction, s: int) -> str:
    """Render an s-adic norm value as ``s^k`` (or ``0``)."""
    if x == 0:
        return "0"
    return f"{s}^{ord_p(x, s)}"


def is_s_small(x, s: int, precision: int) -> bool:
    """``|x|_s <= s^-precision``."""
    return s_ord(x, s) >= precision


# -- cyclotomic values -------------------------------------------------------


def _phi(p: int, k: int) -> int:
    return 1 if k == 0 else p ** (k - 1) * (p - 1)


@dataclass(frozen=True)
class CycloValue:
    """An element of Q(zeta_{p^k}) in the power basis, reduced mod Phi_{p^k}.

    ``coeffs[i]`` is the coefficient of ``zeta^i``, ``0 <= i < phi(p^k)``.
    The level is lowered whenever the value lies in a smaller cyclotomic
    field, so equal values have equal representations.
    """

    p: int
    level: int
    coeffs: tuple[Fraction, ...]

    @classmethod
    def from_group_ring(cls, p: int, level: int, vec: Mapping[int, Fraction] | list) -> "CycloValue":
        """Reduce ``sum vec[e] zeta_{p^level}^e`` (``e`` mod ``p^level``)."""
        n = p**level
        if level == 0:
            total = sum((Fraction(c) for c in (vec.values() if isinstance(vec, Mapping) else vec)), Fraction(0))
            return cls(p, 0, (total,))
        phi = _phi(p, level)
        step = p ** (level - 1)
        out = [Fraction(0)] * phi
        items = vec.items() if isinstance(vec, Mapping) else enumerate(vec)
        for e, c in items:
            if not c:
                continue
            e %= n
            if e < phi:
                out[e] += c
            else:
                t = e - phi
                for i in range(p - 1):
                    out[t + i * step] -= c
        return cls._lowered(p, level, out)

    @classmethod
    def _lowered(cls, p: int, level: int, coeffs: list[Fraction]) -> "CycloValue":
        while level > 0:
            if any(c for i, c in enumerate(coeffs) if i % p):
                break
            # zeta_{p^k}^{p i} = zeta_{p^(k-1)}^i, and Phi-reduction keeps the
            # coefficient layout consistent for exponents divisible by p
            coeffs = coeffs[::p][: _phi(p, level - 1)]
            level -= 1
        return cls(p, level, tuple(coeffs))

    @classmethod
    def rational(cls, p: int, x) -> "CycloValue":
        return cls(p, 0, (as_fraction(x),))

    @classmethod
    def root(cls, p: int, level: int, m: int) -> "CycloValue":
        """``zeta_{p^level}^m``."""
        return cls.from_group_ring(p, level, {m % p**level: Fraction(1)})

    def group_ring(self, level: int) -> list[Fraction]:
        """Coefficient vector indexed by exponents mod ``p^level``."""
        if level < self.level:
            raise ValueError("cannot lower level")
        vec = [Fraction(0)] * (self.p**level)
        mult = self.p ** (level - self.level)
        for i, c in enumerate(self.coeffs):
            if c:
                vec[i * mult] += c
        return vec

    def is_rational(self) -> bool:
        return self.level == 0

    def to_fraction(self) -> Fraction:
        if self.level:
            raise ValueError(f"{self} is not rational")
        return self.coeffs[0]

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def _coerce(self, other) -> "CycloValue":
        if isinstance(other, CycloValue):
            if other.p != self.p:
                raise ValueError("mismatched p")
            return other
        return CycloValue.rational(self.p, other)

    def __add__(self, other):
        other = self._coerce(other)
        level = max(self.level, other.level)
        a, b = self.group_ring(level), other.group_ring(level)
        return CycloValue.from_group_ring(self.p, level, [x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self):
        return CycloValue(self.p, self.level, tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other.level == 0:
            k = other.coeffs[0]
            return CycloValue._lowered(self.p, self.level, [c * k for c in self.coeffs]) if k else CycloValue.rational(self.p, 0)
        if self.level == 0:
            return other * self
        level = max(self.level, other.level)
        n = self.p**level
        ma, mb = self.p ** (level - self.level), self.p ** (level - other.level)
        vec: dict[int, Fraction] = {}
        for i, c in enumerate(self.coeffs):
            if not c:
                continue
            for j, d in enumerate(other.coeffs):
                if d:
                    e = (i * ma + j * mb) % n
                    vec[e] = vec.get(e, Fraction(0)) + c * d
        return CycloValue.from_group_ring(self.p, level, vec)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.level == 0 and self.coeffs[0] == other
        if not isinstance(other, CycloValue):
            return NotImplemented
        return (self.p, self.level, self.coeffs) == (other.p, other.level, other.coeffs)

    def __hash__(self):
        return hash((self.p, self.level, self.coeffs))

    def __str__(self):
        if self.level == 0:
            return str(self.coeffs[0])
        z = f"z{self.p ** self.level}"
        terms = []
        for i, c in enumerate(self.coeffs):
            if not c:
                continue
            mon = "" if i == 0 else (z if i == 1 else f"{z}^{i}")
            if not mon:
                terms.append(str(c))
            elif c == 1:
                terms.append(mon)
            else:
                terms.append(f"({c})*{mon}")
        return " + ".join(terms) if terms else "0"


def cyclo_mul(a: CycloValue, b: CycloValue) -> CycloValue:
    return a * b


def cyclo_norm_bound(a: CycloValue, s: int) -> Fraction:
    """``max_i |c_i|_s``; an upper bound on ``|a|_s``, exact for rationals."""
    return max((s_norm(c, s) for c in a.coeffs), default=Fraction(0))


# -- Laurent values in T = s^-b ----------------------------------------------


@dataclass(frozen=True)
class Tail:
    """``sum_{k >= k0} c * (u * T^direction)^k`` with ``direction`` = +1 or -1."""

    c: Fraction
    u: Fraction
    k0: int
    direction: int = 1

    def ratio_norm(self, s: int, t_norm: Fraction) -> Fraction:
        return s_norm(self.u, s) * Fraction(t_norm) ** self.direction

    def term(self, k: int) -> tuple[int, Fraction]:
        """The k-th term as ``(T-exponent, coefficient)``."""
        return self.direction * k, self.c * self.u**k


@dataclass(frozen=True)
class BParam:
    """Convergence data for ``T = s^-b``: the norm ``|T|_s`` and optionally a
    concrete rational ``T`` for closed-form evaluation."""

    t_norm: Fraction
    T: Fraction | None = None

    def __post_init__(self):
        if self.t_norm <= 0:
            raise ValueError("t_norm must be positive")

    @classmethod
    def at(cls, T, s: int) -> "BParam":
        T = as_fraction(T)
        if T == 0:
            raise ValueError("T = s^-b is never zero")
        return cls(s_norm(T, s), T)


def _geometric(c: Fraction, r: Fraction, k0: int) -> Fraction:
    return c * r**k0 / (1 - r)


def tail_sum(c, u, k0: int, at: BParam, s: int, direction: int = 1):
    """Closed form of ``sum_{k>=k0} c (u T^direction)^k`` in Q_s.

    Returns an exact rational when ``at.T`` is given, otherwise a symbolic
    :class:`LaurentT`.  Raises :class:`DivergentSeries` when the ratio has
    s-adic norm >= 1.
    """
    c, u = as_fraction(c), as_fraction(u)
    if c == 0:
        return Fraction(0)
    t = Tail(c, u, k0, direction)
    if t.ratio_norm(s, at.t_norm) >= 1:
        raise DivergentSeries(
            f"|u|_s * |T|_s^{direction} = {t.ratio_norm(s, at.t_norm)} >= 1 for tail {t}"
        )
    if at.T is None:
        return LaurentT(tails=(t,))
    return _geometric(c, u * at.T**direction, k0)


@dataclass(frozen=True)
class LaurentT:
    """A Laurent polynomial in ``T`` plus geometric tails."""

    monomials: Mapping[int, Fraction] = field(default_factory=dict)
    tails: tuple[Tail, ...] = ()

    def __post_init__(self):
        clean = {int(k): Fraction(v) for k, v in dict(self.monomials).items() if v}
        object.__setattr__(self, "monomials", clean)
        object.__setattr__(self, "tails", tuple(t for t in self.tails if t.c and t.u))

    @classmethod
    def zero(cls) -> "LaurentT":
        return cls()

    @classmethod
    def monomial(cls, k: int, c) -> "LaurentT":
        return cls({k: as_fraction(c)})

    def __add__(self, other: "LaurentT") -> "LaurentT":
        m = dict(self.monomials)
        for k, v in other.monomials.items():
            m[k] = m.get(k, Fraction(0)) + v
        return LaurentT(m, _merge_tails(self.tails + other.tails))

    def scale(self, a) -> "LaurentT":
        a = as_fraction(a)
        if a == 0:
            return LaurentT()
        return LaurentT(
            {k: v * a for k, v in self.monomials.items()},
            tuple(Tail(t.c * a, t.u, t.k0, t.direction) for t in self.tails),
        )

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self) -> bool:
        return not self.monomials and not self.tails

    def converges(self, s: int, t_norm: Fraction) -> bool:
        return all(t.ratio_norm(s, t_norm) < 1 for t in self.tails)

    def divergent_tails(self, s: int, t_norm: Fraction) -> list[Tail]:
        return [t for t in self.tails if t.ratio_norm(s, t_norm) >= 1]

    def evaluate(self, T, s: int) -> Fraction:
        """Exact value at a rational ``T``; raises if any tail diverges there."""
        T = as_fraction(T)
        at = BParam.at(T, s)
        total = sum((v * T**k for k, v in self.monomials.items()), Fraction(0))
        for t in self.tails:
            total += tail_sum(t.c, t.u, t.k0, at, s, t.direction)
        return total

    def expand(self, terms: int) -> dict[int, Fraction]:
        """Monomials plus the first ``terms`` terms of every tail."""
        m = dict(self.monomials)
        for t in self.tails:
            for k in range(t.k0, t.k0 + terms):
                e, c = t.term(k)
                m[e] = m.get(e, Fraction(0)) + c
        return {k: v for k, v in m.items() if v}

    def partial_value(self, T, terms: int) -> Fraction:
        T = as_fraction(T)
        return sum((v * T**k for k, v in self.expand(terms).items()), Fraction(0))

    def canonical(self) -> "LaurentT":
        """Equal values get equal representations: tails are normalized to
        start at ``k0 = 1`` with the leading terms moved into monomials."""
        m = dict(self.monomials)
        tails = []
        for t in self.tails:
            if t.k0 < 1:
                for k in range(t.k0, 1):
                    e, c = t.term(k)
                    m[e] = m.get(e, Fraction(0)) + c
            elif t.k0 > 1:
                for k in range(1, t.k0):
                    e, c = t.term(k)
                    m[e] = m.get(e, Fraction(0)) - c
            tails.append(Tail(t.c, t.u, 1, t.direction))
        return LaurentT(m, _merge_tails(tuple(tails)))

    def __eq__(self, other):
        if not isinstance(other, LaurentT):
            return NotImplemented
        a, b = self.canonical(), other.canonical()
        return a.monomials == b.monomials and set(a.tails) == set(b.tails)

    def __hash__(self):
        c = self.canonical()
        return hash((tuple(sorted(c.monomials.items())), frozenset(c.tails)))

    def __str__(self):
        parts = [f"({v})*T^{k}" for k, v in sorted(self.monomials.items())]
        for t in self.tails:
            base = "T" if t.direction == 1 else "T^-1"
            parts.append(f"sum_{{k>={t.k0}}} ({t.c})*(({t.u})*{base})^k")
        return " + ".join(parts) if parts else "0"


def _merge_tails(tails: tuple[Tail, ...]) -> tuple[Tail, ...]:
    acc: dict[tuple[Fraction, int, int], Fraction] = {}
    for t in tails:
        key = (t.u, t.k0, t.direction)
        acc[key] = acc.get(key, Fraction(0)) + t.c
    return tuple(
        Tail(c, u, k0, d) for (u, k0, d), c in sorted(acc.items()) if c
    )
