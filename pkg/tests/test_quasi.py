import random
from fractions import Fraction

import pytest

from uml.generators import padic_point, random_measure, random_step
from uml.measures import CellMeasure, ProductMeasure, StepFunction, haar, integrate, mu_norm
from uml.padic import PrimePair, ball
from uml.quasi import (
    AbsoluteContinuityError, BetaSchedule, ShellDensityMeasure, UndefinedCocycle, beta_factor,
    cocycle, factor_ratio, inspect_finite_product, kakutani_classify, level_grid, martingale_check,
    normalize_check, orthogonality_check, quasi_invariance_gap, ratio_step, rho_shift,
    schedule_from_pairs, shell_coefficient, shell_density, shell_measure, support_radii,
    support_radius, transform_density, transform_density_oracle,
)
from uml.svalues import s_norm

PP = PrimePair(2, 3)
H = haar(PP)


@pytest.mark.parametrize("x, expected", [(1, Fraction(-3, 2)), (2, Fraction(1, 3)), (Fraction(1, 2), Fraction(-9, 2))])
def test_shell_density_examples(x, expected):
    assert shell_density(PP, 1, x) == expected


def test_raw_total_and_normalization():
    m = ShellDensityMeasure.build(PP, 1)
    assert m.normalizer == Fraction(19, 60)
    assert shell_measure(PP, 1).total_mass() == 1


@pytest.mark.parametrize("pp", [PrimePair(2, 3), PrimePair(3, 2), PrimePair(2, 5), PrimePair(5, 7)])
@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_normalize_check(pp, n):
    r = normalize_check(pp, n, n - 10)
    assert r.total == 1 and r.raw_total == r.normalizer


def test_partial_sums_stabilize_to_raw_total():
    # oracle: shells summed one at a time converge s-adically to the closed form
    Z = ShellDensityMeasure.build(PP, 1).normalizer
    partial = shell_coefficient(PP, 1, 1) * Fraction(1, 2)
    norms = []
    for j in range(0, -25, -1):
        partial += shell_coefficient(PP, j, 1) * Fraction(2) ** (-j) / 2
        norms.append(s_norm(partial - Z, 3))
    assert norms == sorted(norms, reverse=True)
    assert norms[-1] <= Fraction(1, 3**10)


def test_degenerate_window_reports_core():
    r = normalize_check(PP, 2, 2)
    assert r.window_sum == shell_coefficient(PP, 2, 2) * Fraction(1, 4) / r.normalizer


def test_shell_densities_are_small_outside_core():
    for n in (1, 2, 3):
        m = shell_measure(PP, n)
        assert m.sup_norm() == 1
        for j in range(n - 6, n):
            assert s_norm(m.shell_density(j), 3) <= Fraction(1, 3 ** (2 * n - 1 - j))


def test_rho_examples():
    f = [shell_measure(PP, 1)]
    assert rho_shift(f, 0, 1) == 1
    assert rho_shift(f, 2, 1) == 1
    assert rho_shift(f, 1, 1) == Fraction(-2, 9)


def test_rho_undefined_on_zero_density():
    f = [H]
    with pytest.raises(UndefinedCocycle) as e:
        rho_shift(f, 1, Fraction(1, 2))
    assert e.value.coordinate == 0
    with pytest.raises(ValueError):
        rho_shift(f, (1, 1), (0, 0), 2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_quasi_invariance_gap(n):
    m = shell_measure(PP, n)
    r = quasi_invariance_gap(m, level_grid(2, n, n + 3), level_grid(2, -3, n + 3))
    assert r.max_gap == 0 and r.passed
    assert quasi_invariance_gap(m, [0], level_grid(2, -2, 2)).max_gap == 0
    # a shift of size p^(n-1) moves some points across shells
    assert quasi_invariance_gap(m, [Fraction(2) ** (n - 1)], level_grid(2, -1, n + 1)).max_gap > 0


def _family(N):
    return [shell_measure(PP, 1 + j % 3) for j in range(N)]


def _vec(rng, N):
    return tuple(padic_point(rng, 2, -2, 4) for _ in range(N))


@pytest.mark.parametrize("seed", range(5))
def test_cocycle_identities(seed):
    rng = random.Random(seed)
    N = 6
    fam = _family(N)
    g = random_step(rng, 2, 2, 2, lo=-1, default=Fraction(2))
    g = StepFunction(2, 2, tuple((b, v or Fraction(1)) for b, v in g.pieces), g.default)
    rho_nu = cocycle(lambda x: g(x[:2]) * _prod_density(fam, x))
    r = lambda a, x: rho_shift(fam, a, x, N)  # noqa: E731
    for _ in range(40):
        a, b, x = _vec(rng, N), _vec(rng, N), _vec(rng, N)
        ab = tuple(u + v for u, v in zip(a, b))
        xa = tuple(u - v for u, v in zip(x, a))
        xpa = tuple(u + v for u, v in zip(x, a))
        assert r(ab, x) == r(a, x) * r(b, xa)
        assert r(tuple(-v for v in a), x) == 1 / r(a, xpa)
        assert rho_nu(a, x) == g(xa[:2]) / g(x[:2]) * r(a, x)


def _prod_density(fam, x):
    out = Fraction(1)
    for f, xi in zip(fam, x):
        out *= f.density_at(xi)
    return out


def test_inverse_cocycle_needs_plus_sign():
    # rho(-a, x) = 1 / rho(a, x + a); the variant with x - a fails in general
    rng = random.Random(11)
    fam = _family(3)
    bad = 0
    for _ in range(100):
        a, x = _vec(rng, 3), _vec(rng, 3)
        xa = tuple(u - v for u, v in zip(x, a))
        bad += rho_shift(fam, tuple(-v for v in a), x) != 1 / rho_shift(fam, a, xa)
    assert bad > 0


# -- Kakutani -------------------------------------------------------------------


def _singular_pair():
    mu = CellMeasure(PP, 1, ((ball(2, 0, 1), Fraction(3)), (ball(2, 1, 1), Fraction(6))))
    return mu, H


def test_beta_examples():
    assert beta_factor(H, H) == 1
    assert beta_factor(*_singular_pair()) == Fraction(1, 3)
    mu = CellMeasure(PP, 1, ((ball(2, 0, 1), Fraction(9)), (ball(2, 1, 1), Fraction(18))))
    assert beta_factor(mu, H) == Fraction(1, 9)
    with pytest.raises(AbsoluteContinuityError):
        beta_factor(haar(PP, ball(2, 0, -1)), H)


def test_beta_against_haar_is_the_norm():
    # with nu = Haar on Z_2, |rho|_s N_nu reduces to |d_mu|_s cell by cell
    rng = random.Random(4)
    for _ in range(20):
        mu = random_measure(rng, PP, 1, 3, zero_prob=0)
        assert beta_factor(mu, H) == mu_norm(mu)


def test_kakutani_examples():
    assert kakutani_classify(BetaSchedule((), Fraction(1))).kind == "Equivalent"
    v = kakutani_classify(BetaSchedule((), Fraction(1, 3)), N=12, tol=Fraction(1, 3**12))
    assert v.kind == "Singular" and v.partial == Fraction(1, 3**12)
    w = kakutani_classify(BetaSchedule((Fraction(1, 3),) * 5, Fraction(1)))
    assert w.kind == "Equivalent" and w.partial == Fraction(1, 3**5)
    assert kakutani_classify([Fraction(1, 3)] * 4).kind == "Inconclusive"
    with pytest.raises(ValueError):
        BetaSchedule((Fraction(3),))


@pytest.mark.parametrize("N", [1, 2, 3, 6])
def test_schedule_matches_direct_product(N):
    mu, nu = _singular_pair()
    sched = schedule_from_pairs([], tail_pair=(mu, nu))
    direct = inspect_finite_product([(mu, nu)] * N)
    assert direct.sup == sched.partial(N) and direct.all_nonzero
    assert direct.cells == 2**N


def test_orthogonality_examples():
    m1 = H
    m2 = haar(PP, ball(2, Fraction(1, 2), 1))  # 1/2 + 2Z_2, outside Z_2
    v = orthogonality_check(m1, m2)
    assert v.orthogonal and v.separating == m1.support()
    assert not orthogonality_check(H, H).orthogonal
    m3 = CellMeasure(PP, 1, ((ball(2, 0, 1), Fraction(0)), (ball(2, 1, 1), Fraction(2))))
    m4 = CellMeasure(PP, 1, ((ball(2, 0, 1), Fraction(5)),))
    assert orthogonality_check(m4, m3).orthogonal


def test_support_radius_examples():
    assert support_radius(H, Fraction(1, 3), 2) == 1
    for k in range(4):
        assert support_radius(haar(PP, ball(2, 0, k)), 1, 2) == Fraction(1, 2**k)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("e", [0, 1, 2, 4])
def test_shell_support_radius_against_scan(n, e):
    m = shell_measure(PP, n)
    c = Fraction(1, 3**e)
    admissible = [j for j in range(n - 40, n + 1) if s_norm(m.shell_density(j), 3) >= c]
    expect = Fraction(2) ** (-min(admissible)) if admissible else 0
    assert support_radius(m, c, 2) == expect


def test_support_radii_shrink_for_shell_family():
    r = support_radii([shell_measure(PP, n) for n in (1, 2, 3, 4)], [1] * 4)
    assert r.shrinking and r.radii == tuple(Fraction(1, 2**n) for n in (1, 2, 3, 4))


# -- transforms -----------------------------------------------------------------


def test_transform_examples():
    assert transform_density([[1]], H, (Fraction(1, 1),)) == 1
    assert transform_density([[3]], H, (Fraction(5),)) == 1
    mu = ProductMeasure((shell_measure(PP, 1),))
    for x in level_grid(2, -2, 3):
        assert transform_density([[2]], mu, (x,)) == transform_density_oracle([[2]], mu, (x,))


@pytest.mark.parametrize("U", [[[1, 1], [0, 2]], [[Fraction(1, 2), 0], [1, 2]], [[3, 0], [0, 5]], [[0, 1], [1, 0]]])
def test_transform_against_pushforward(U):
    rng = random.Random(3)
    mu = ProductMeasure((shell_measure(PP, 1), shell_measure(PP, 2)))
    for _ in range(8):
        x = (padic_point(rng, 2, -2, 3), padic_point(rng, 2, -2, 3))
        assert transform_density(U, mu, x) == transform_density_oracle(U, mu, x)


def test_singular_matrix_rejected():
    with pytest.raises(ValueError):
        transform_density([[1, 2], [2, 4]], H, (0, 0))


# -- martingale -----------------------------------------------------------------


@pytest.mark.parametrize("seed", range(6))
def test_ratio_integrates_to_one(seed):
    rng = random.Random(seed)
    for f in _family(3) + [random_measure(rng, PP, 1, 2, zero_prob=0, probability=True)]:
        a = padic_point(rng, 2, -1, 3)
        if isinstance(f, CellMeasure) and a and not _support_invariant(f, a):
            continue
        assert integrate(f, ratio_step(f, a)) == 1


def _support_invariant(f, a):
    supp = f.support()
    return supp.translate((a,)) == supp


def test_martingale_examples():
    rng = random.Random(8)
    fam = _family(5)
    psi = random_step(rng, 2, 1, 2)
    zero = martingale_check(fam, (0,) * 5, psi, 5)
    assert zero.passed and zero.values[0] == integrate(fam[0], psi)
    one = StepFunction(2, 2, (), Fraction(1))
    r = martingale_check(fam, tuple(padic_point(rng, 2, -1, 3) for _ in range(5)), one, 5)
    assert r.passed and set(r.values) == {1}
    r2 = martingale_check(fam, (Fraction(1, 2),) + (0,) * 4, psi, 5)
    assert r2.passed


@pytest.mark.parametrize("seed", range(6))
def test_martingale_random(seed):
    rng = random.Random(40 + seed)
    fam = _family(6)
    psi = random_step(rng, 2, 1 + seed % 2, 2, lo=-1)
    a = tuple(padic_point(rng, 2, -2, 3) for _ in range(6))
    assert martingale_check(fam, a, psi, 6).passed


def test_factor_ratio_on_cell_measure():
    mu, _ = _singular_pair()
    assert factor_ratio(mu, 1, 1) == Fraction(1, 2)
    with pytest.raises(UndefinedCocycle):
        factor_ratio(mu, Fraction(1, 2), 1)
