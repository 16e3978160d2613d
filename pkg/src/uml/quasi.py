"""Quasi-invariant product measures: shell densities, shift cocycles, the
Kakutani dichotomy and densities of linear images."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from uml.measures import (
    CellMeasure,
    ProductMeasure,
    RadialMeasure,
    StepFunction,
    _as_vector,
    _prod,
    integrate,
)
from uml.padic import Ball, ClopenSet, PrimePair, as_fraction, ball, ord_p, shell_haar
from uml.svalues import norm_str, s_norm, tail_sum, BParam


class UndefinedCocycle(ArithmeticError):
    """A density vanishes at an evaluation point of ``rho(a, x)``."""

    def __init__(self, point, coordinate: int | None = None):
        self.point = point
        self.coordinate = coordinate
        where = "" if coordinate is None else f" (coordinate {coordinate})"
        super().__init__(f"zero density at {point}{where}")


# -- shell-density measures ----------------------------------------------------


def shell_coefficient(pp: PrimePair, j: int, n: int) -> Fraction:
    """Raw density ``a(j, n)`` on the shell ``S(j, n)``."""
    p, s = pp.p, Fraction(pp.s)
    if j > n:
        raise ValueError("shell index exceeds n")
    if j == n:
        return (1 - s ** (-n)) * Fraction(p) ** (-n)
    return (1 - s) * (1 - Fraction(1, p)) * s ** (2 * n - 1 - j) * Fraction(p) ** (-n)


def shell_density(pp: PrimePair, n: int, x) -> Fraction:
    """``a(j, n)`` for the shell containing ``x`` (``x = 0`` lies in ``S(n, n)``)."""
    v = ord_p(as_fraction(x), pp.p)
    return shell_coefficient(pp, n if v >= n else int(v), n)


def raw_shell_measure(pp: PrimePair, n: int, center=0) -> RadialMeasure:
    s = Fraction(pp.s)
    outer = (1 - s) * (1 - Fraction(1, pp.p)) * s ** (2 * n - 1) * Fraction(pp.p) ** (-n)
    inner = shell_coefficient(pp, n, n)
    return RadialMeasure(pp, as_fraction(center), n, inner, outer, s)


@dataclass(frozen=True)
class ShellDensityMeasure:
    """The shell measure at level ``n`` divided by its exact total mass."""

    pp: PrimePair
    n: int
    j_min: int
    raw: RadialMeasure
    normalizer: Fraction

    @classmethod
    def build(cls, pp: PrimePair, n: int, j_min: int | None = None, center=0) -> "ShellDensityMeasure":
        raw = raw_shell_measure(pp, n, center)
        return cls(pp, n, n - 8 if j_min is None else j_min, raw, raw.total_mass())

    @property
    def measure(self) -> RadialMeasure:
        r = self.raw
        return RadialMeasure(r.pp, r.center, r.n, r.inner, r.outer_coeff, r.ratio, 1 / self.normalizer)

    def density(self, j: int) -> Fraction:
        return shell_coefficient(self.pp, j, self.n) / self.normalizer

    def truncated(self) -> CellMeasure:
        return self.measure.truncate(self.j_min)


def shell_measure(pp: PrimePair, n: int, center=0) -> RadialMeasure:
    """Normalized shell measure (total mass exactly 1)."""
    return ShellDensityMeasure.build(pp, n, center=center).measure


@dataclass(frozen=True)
class NormalizeReport:
    n: int
    raw_total: Fraction
    normalizer: Fraction
    total: Fraction
    window_sum: Fraction
    window_error_norm: Fraction
    core_mass: Fraction
    core_gap_norm: Fraction
    c: Fraction
    passed: bool


def normalize_check(pp: PrimePair, n: int, j_min: int, c=1) -> NormalizeReport:
    """Exact total mass of the shell measure.

    The window ``j_min <= j <= n`` is summed shell by shell, the shells below
    it in closed form, and the raw total divides out to give mass 1.
    """
    if j_min > n:
        raise ValueError("j_min must not exceed n")
    s, p = pp.s, pp.p
    c = as_fraction(c)
    m = ShellDensityMeasure.build(pp, n, j_min)
    window = sum(
        (shell_coefficient(pp, j, n) * shell_haar(p, j, n) for j in range(j_min, n + 1)),
        Fraction(0),
    )
    tail = Fraction(0)
    if m.raw.outer_coeff:
        # sum_{j < j_min} A s^-j p^-j (1 - 1/p) = A (1 - 1/p) sum_{k > -j_min} (s p)^k
        coeff = m.raw.outer_coeff * (1 - Fraction(1, p))
        tail = tail_sum(coeff, Fraction(s * p), 1 - j_min, BParam.at(1, s), s)
    raw_total = window + tail
    normalized_total = raw_total / m.normalizer
    window_norm = window / m.normalizer
    core = shell_coefficient(pp, n, n) * Fraction(p) ** (-n) / m.normalizer
    gap = s_norm(core - 1, s)
    ok = normalized_total == 1 and raw_total == m.normalizer and gap < c
    return NormalizeReport(
        n, raw_total, m.normalizer, normalized_total, window_norm,
        s_norm(window_norm - 1, s), core, gap, c, ok,
    )


# -- shift cocycles ------------------------------------------------------------


def _density(f, x: Fraction) -> Fraction:
    return f.density_at(x)


def factor_ratio(f, a, x) -> Fraction:
    """``d(a, x) = f(x - a) / f(x)`` for one factor."""
    a, x = as_fraction(a), as_fraction(x)
    den = _density(f, x)
    if den == 0:
        raise UndefinedCocycle(x)
    num = _density(f, x - a)
    if num == 0:
        raise UndefinedCocycle(x - a)
    return num / den


def _padded(v, N: int) -> tuple[Fraction, ...]:
    v = _as_vector(v)
    return v + (Fraction(0),) * max(0, N - len(v))


def rho_shift(factors: Sequence, a, x, N: int | None = None) -> Fraction:
    """Truncated product ``prod_{j < N} f_j(x_j - a_j) / f_j(x_j)``."""
    N = len(factors) if N is None else N
    if N > len(factors):
        raise ValueError(f"truncation {N} exceeds the {len(factors)} available factors")
    a, x = _padded(a, N), _padded(x, N)
    out = Fraction(1)
    for j in range(N):
        if a[j] == 0:
            continue
        try:
            out *= factor_ratio(factors[j], a[j], x[j])
        except UndefinedCocycle as e:
            raise UndefinedCocycle(e.point, j) from None
    return out


def cocycle(density: Callable[[tuple], Fraction]) -> Callable:
    """``rho(a, x) = density(x - a) / density(x)`` for a density on vectors."""

    def rho(a, x) -> Fraction:
        a, x = _as_vector(a), _as_vector(x)
        den = density(x)
        shifted = tuple(xi - ai for xi, ai in zip(x, a))
        if den == 0:
            raise UndefinedCocycle(x)
        num = density(shifted)
        if num == 0:
            raise UndefinedCocycle(shifted)
        return num / den

    return rho


@dataclass(frozen=True)
class GapReport:
    max_gap: Fraction
    c_prime: Fraction
    checked: int
    passed: bool


def quasi_invariance_gap(factor, shifts: Sequence, xs: Sequence, c_prime=1) -> GapReport:
    """Max ``|d(a, x) - 1|_s`` over a grid of shifts and points."""
    c_prime = as_fraction(c_prime)
    s = factor.pp.s
    worst = Fraction(0)
    count = 0
    for a in shifts:
        for x in xs:
            worst = max(worst, s_norm(factor_ratio(factor, a, x) - 1, s))
            count += 1
    return GapReport(worst, c_prime, count, worst < c_prime)


def level_grid(p: int, lo: int, hi: int) -> list[Fraction]:
    """Representatives of ``p^lo Z_p / p^hi Z_p``."""
    step = Fraction(p) ** lo
    return [t * step for t in range(p ** (hi - lo))]


# -- Kakutani dichotomy ----------------------------------------------------------


def common_cells(mu1: CellMeasure, mu2: CellMeasure) -> list[tuple[Ball, Fraction, Fraction]]:
    """Disjoint pieces covering both supports with the two densities on each."""
    if mu1.dim != mu2.dim or mu1.p != mu2.p:
        raise ValueError("measures differ in p or dimension")
    p, dim = mu1.p, mu1.dim
    out = []
    for b1, d1 in mu1.cells:
        for b2, d2 in mu2.cells:
            c = b1.intersect(b2)
            if c is not None:
                out.append((c, d1, d2))
    s1, s2 = ClopenSet.of(p, [b for b, _ in mu1.cells], dim), ClopenSet.of(p, [b for b, _ in mu2.cells], dim)
    for b, d in mu1.cells:
        for piece in ClopenSet.of(p, [b], dim).difference(s2).balls:
            out.append((piece, d, Fraction(0)))
    for b, d in mu2.cells:
        for piece in ClopenSet.of(p, [b], dim).difference(s1).balls:
            out.append((piece, Fraction(0), d))
    return out


class AbsoluteContinuityError(ValueError):
    pass


def beta_factor(mu: CellMeasure, nu: CellMeasure) -> Fraction:
    """``beta = sup |rho|_s N_nu`` with ``rho = d mu / d nu``.

    On a cell ``N_nu = |d_nu|_s``, so each cell contributes ``|d_mu|_s``.
    """
    best = Fraction(0)
    for b, dm, dn in common_cells(mu, nu):
        if dn == 0:
            if dm != 0:
                raise AbsoluteContinuityError(f"mu charges {b} where nu vanishes")
            continue
        best = max(best, s_norm(dm / dn, mu.s) * s_norm(dn, mu.s))
    return best


@dataclass(frozen=True)
class BetaSchedule:
    """``beta_j`` for ``j = 1..len(prefix)``, then ``tail`` forever
    (``tail=None``: nothing is known beyond the prefix)."""

    prefix: tuple[Fraction, ...]
    tail: Fraction | None = None

    def __post_init__(self):
        vals = [as_fraction(b) for b in self.prefix]
        object.__setattr__(self, "prefix", tuple(vals))
        if self.tail is not None:
            object.__setattr__(self, "tail", as_fraction(self.tail))
            vals.append(self.tail)
        for b in vals:
            if b > 1:
                raise ValueError(f"beta {b} > 1 is impossible for a pair of factors")
            if b <= 0:
                raise ValueError(f"beta {b} must be positive")

    def beta(self, j: int) -> Fraction:
        if j <= len(self.prefix):
            return self.prefix[j - 1]
        if self.tail is None:
            raise IndexError(f"beta_{j} unknown")
        return self.tail

    def partial(self, N: int) -> Fraction:
        return _prod(self.beta(j) for j in range(1, N + 1))


@dataclass(frozen=True)
class KakutaniVerdict:
    kind: str  # Equivalent | Singular | Inconclusive
    partial: Fraction
    N: int
    envelope: Fraction | None = None

    def __str__(self):
        env = "" if self.envelope is None else f" envelope={self.envelope}"
        return f"{self.kind} P_{self.N}={self.partial}{env}"


def kakutani_classify(betas, N: int = 12, tol=Fraction(1, 3**10), max_N: int = 10_000) -> KakutaniVerdict:
    """Decide equivalence or singularity of infinite products of factors.

    A constant tail of 1 leaves a finite product, hence Equivalent.  A
    constant tail ``q < 1`` is a geometric envelope: the partial products
    are followed until they drop below ``tol``.  A bare list proves
    nothing about the infinite product.
    """
    if not isinstance(betas, BetaSchedule):
        betas = BetaSchedule(tuple(betas))
    tol = as_fraction(tol)
    if betas.tail is None:
        N = min(N, len(betas.prefix))
        return KakutaniVerdict("Inconclusive", betas.partial(N), N)
    if betas.tail == 1:
        n = len(betas.prefix)
        return KakutaniVerdict("Equivalent", betas.partial(n), n)
    P, n = betas.partial(N), N
    while P > tol and n < max_N:
        n += 1
        P *= betas.beta(n)
    if P > tol:
        return KakutaniVerdict("Inconclusive", P, n, betas.tail)
    return KakutaniVerdict("Singular", P, n, betas.tail)


def schedule_from_pairs(pairs: Sequence[tuple[CellMeasure, CellMeasure]],
                        tail_pair: tuple[CellMeasure, CellMeasure] | None = None) -> BetaSchedule:
    """Betas of explicit factor pairs; ``tail_pair`` repeats forever."""
    prefix = tuple(beta_factor(m, n) for m, n in pairs)
    tail = None if tail_pair is None else beta_factor(*tail_pair)
    return BetaSchedule(prefix, tail)


@dataclass(frozen=True)
class ProductInspection:
    sup: Fraction
    all_nonzero: bool
    cells: int


def inspect_finite_product(pairs: Sequence[tuple[CellMeasure, CellMeasure]]) -> ProductInspection:
    """Direct look at ``mu_1 x .. x mu_N`` against ``nu_1 x .. x nu_N``:
    ``sup |d mu / d nu|_s N_nu`` over all product cells, and whether the
    density ratio is nonzero on the whole common support."""
    per = []
    for mu, nu in pairs:
        cells = []
        for b, dm, dn in common_cells(mu, nu):
            if dn == 0 and dm != 0:
                raise AbsoluteContinuityError(f"mu charges {b} where nu vanishes")
            if dn != 0:
                cells.append((dm, dn))
        per.append(cells)
    s = pairs[0][0].s
    best = Fraction(0)
    nonzero = True
    count = 0
    for combo in itertools.product(*per):
        dm = _prod(c[0] for c in combo)
        dn = _prod(c[1] for c in combo)
        best = max(best, s_norm(dm / dn, s) * s_norm(dn, s))
        nonzero = nonzero and dm != 0
        count += 1
    return ProductInspection(best, nonzero, count)


# -- orthogonality and support radii ---------------------------------------------


@dataclass(frozen=True)
class OrthogonalityVerdict:
    orthogonal: bool
    separating: ClopenSet
    witness: Ball | None = None


def orthogonality_check(mu1: CellMeasure, mu2: CellMeasure) -> OrthogonalityVerdict:
    """Orthogonal iff ``N_mu1 N_mu2`` vanishes everywhere; ``separating`` is
    the part of the support of ``mu1`` where ``N_mu2 = 0``."""
    pieces = common_cells(mu1, mu2)
    F = ClopenSet.of(mu1.p, [b for b, d1, d2 in pieces if d1 and not d2], mu1.dim)
    for b, d1, d2 in pieces:
        if d1 and d2:
            return OrthogonalityVerdict(False, F, b)
    return OrthogonalityVerdict(True, F)


def _reach(center: Fraction, k: int, p: int) -> int:
    # largest e with the ball inside p^e Z_p
    return k if center == 0 else min(k, int(ord_p(center, p)))


def support_radius(factor, c, p: int) -> Fraction:
    """Radius of the smallest ball around 0 holding ``{x : N(x) >= c}``."""
    c = as_fraction(c)
    s = factor.pp.s
    reach = None
    if isinstance(factor, CellMeasure):
        for b, d in factor.cells:
            if d and s_norm(d, s) >= c:
                e = _reach(b.center[0], b.exps[0], p)
                reach = e if reach is None else min(reach, e)
    elif isinstance(factor, RadialMeasure):
        if factor.center != 0:
            raise ValueError("radial factor must be centered at 0")
        if s_norm(factor.shell_density(factor.n), s) >= c:
            reach = factor.n
        # |outer_coeff ratio^-j|_s grows with j, so the admissible shells
        # form an interval [j0, n)
        if factor.outer_coeff:
            r = s_norm(factor.ratio, s)
            base = s_norm(factor.scale * factor.outer_coeff, s)
            # |density_j| = base * r^-j >= c  <=>  j >= log(c / base) / log(1 / r)
            j = factor.n - 1
            if base * r ** (-j) >= c:
                while base * r ** (-(j - 1)) >= c:
                    j -= 1
                reach = j
    else:
        raise TypeError(f"unsupported factor {type(factor).__name__}")
    if reach is None:
        return Fraction(0)
    return Fraction(p) ** (-reach)


@dataclass(frozen=True)
class RadiiReport:
    radii: tuple[Fraction, ...]
    thresholds: tuple[Fraction, ...]
    shrinking: bool


def support_radii(factors: Sequence, thresholds: Sequence | None = None) -> RadiiReport:
    """``r_j`` for each factor at threshold ``c_j`` (default ``s^-j``)."""
    if thresholds is None:
        thresholds = [Fraction(1, factors[0].pp.s ** j) for j in range(1, len(factors) + 1)]
    thresholds = tuple(as_fraction(c) for c in thresholds)
    radii = tuple(support_radius(f, c, f.pp.p) for f, c in zip(factors, thresholds))
    shrinking = all(b <= a for a, b in zip(radii, radii[1:])) and (len(radii) < 2 or radii[-1] < radii[0])
    return RadiiReport(radii, thresholds, shrinking)


# -- linear images -----------------------------------------------------------------


def _matrix(U) -> list[list[Fraction]]:
    M = [[as_fraction(v) for v in row] for row in U]
    if any(len(row) != len(M) for row in M):
        raise ValueError("matrix must be square")
    return M


def inverse_and_det(U) -> tuple[list[list[Fraction]], Fraction]:
    import sympy

    M = sympy.Matrix(_matrix(U))
    det = M.det()
    if det == 0:
        raise ValueError("matrix is singular")
    inv = M.inv()
    n = M.shape[0]
    conv = lambda v: Fraction(int(v.p), int(v.q))  # noqa: E731
    return [[conv(inv[i, j]) for j in range(n)] for i in range(n)], conv(det)


def transform_density(U, mu, x) -> Fraction:
    """Density at ``x`` of ``A -> mu(U^-1 A)`` against ``mu``.

    Equals ``|det U^-1|_p * rho(x - U^-1 x, x)``.
    """
    inv, det = inverse_and_det(U)
    x = _as_vector(x)
    n = len(x)
    pre = tuple(sum(inv[i][j] * x[j] for j in range(n)) for i in range(n))
    a = tuple(xi - yi for xi, yi in zip(x, pre))
    p = mu.pp.p
    mod_inv = Fraction(p) ** int(ord_p(det, p))  # |det U^-1|_p = p^ord(det U)
    return mod_inv * cocycle(mu.density_at)(a, x)


def oracle_level(U, mu) -> int:
    """A ball level at which the pushforward density is constant."""
    inv, _ = inverse_and_det(U)
    p = mu.pp.p
    min_inv = min(int(ord_p(v, p)) for row in inv for v in row if v)
    if isinstance(mu, ProductMeasure):
        finest = max(f.n if isinstance(f, RadialMeasure) else f.max_level() for f in mu.factors)
    else:
        finest = mu.max_level()
    return finest - min_inv


def transform_density_oracle(U, mu, x) -> Fraction:
    """Pushforward density at ``x`` divided by the density of ``mu`` there."""
    from uml.measures import pushforward_density

    k = oracle_level(U, mu)
    den = mu.density_at(x)
    if den == 0:
        raise UndefinedCocycle(x)
    return pushforward_density(U, mu, x, k) / den


# -- martingale identity -------------------------------------------------------------


def ratio_step(factor, a) -> StepFunction:
    """``x -> f(x - a) / f(x)`` as a step function with default 1."""
    a = as_fraction(a)
    p = factor.pp.p
    if a == 0:
        return StepFunction(p, 1, (), Fraction(1))
    if isinstance(factor, RadialMeasure):
        e = int(ord_p(a, p))
        if e >= factor.n:
            return StepFunction(p, 1, (), Fraction(1))
        region, level = [ball(p, factor.center, e)], factor.n
    elif isinstance(factor, CellMeasure):
        supp = factor.support()
        region = list(supp.union(supp.translate((a,))).balls)
        level = factor.max_level()
    else:
        raise TypeError(f"unsupported factor {type(factor).__name__}")
    pieces = []
    for B in region:
        for b in B.refine((max(level, B.exps[0]),)):
            pieces.append((b, factor_ratio(factor, a, b.center[0])))
    return StepFunction(p, 1, tuple(pieces), Fraction(1))


@dataclass(frozen=True)
class MartingaleVerdict:
    passed: bool
    values: tuple[Fraction, ...]
    first_failure: int | None = None


def martingale_check(factors: Sequence, a, psi: StepFunction, N: int) -> MartingaleVerdict:
    """``int rho_{n+1}(a, .) psi dmu == int rho_n(a, .) psi dmu`` for
    ``psi.dim <= n < N``.

    ``rho_n psi mu`` is ``psi`` integrated against the product whose first
    ``n`` factors are shifted; each later factor contributes
    ``int d_j dmu_j``, computed by integrating the ratio step function.
    """
    m = psi.dim
    if N > len(factors) or m > N:
        raise ValueError("truncation exceeds the factor family")
    a = _padded(a, N)
    head = []
    for j in range(m):
        f = factors[j]
        head.append(f.shifted(a[j]) if isinstance(f, RadialMeasure) else _shift_cells(f, a[j]))
    base = integrate(ProductMeasure(tuple(head)), psi)
    values = []
    acc = base
    for n in range(m, N + 1):
        values.append(acc)
        if n < N:
            acc = acc * integrate(factors[n], ratio_step(factors[n], a[n]))
    for i, (u, v) in enumerate(zip(values, values[1:])):
        if u != v:
            return MartingaleVerdict(False, tuple(values), m + i)
    return MartingaleVerdict(True, tuple(values))


def _shift_cells(mu: CellMeasure, a) -> CellMeasure:
    return CellMeasure(mu.pp, 1, tuple((b.translate((a,)), d) for b, d in mu.cells))


def describe_norm(x: Fraction, s: int) -> str:
    return f"{x} (|.|_s = {norm_str(s_norm(x, s), s)})"
