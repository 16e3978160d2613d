import itertools
import random
from fractions import Fraction

import pytest

from uml.fourier import theta
from uml.generators import random_measure
from uml.measures import CellMeasure, haar, product, uniform
from uml.padic import Ball, PrimePair, ball
from uml.quasi import shell_measure
from uml.svalues import CycloValue, s_norm
from uml.weakdist import (
    WeakDistribution, consistency_check, gamma_xi, s_xi_functional, s_xi_trend, s_xi_value,
    tightness_check, trend_schedule,
)

PP = PrimePair(2, 3)
H = haar(PP)


def test_tower_validation():
    with pytest.raises(ValueError):
        WeakDistribution(())
    with pytest.raises(ValueError):
        WeakDistribution((product(H, H), H))


def test_consistency_examples():
    shells = [shell_measure(PP, n) for n in (1, 2, 3)]
    assert consistency_check(WeakDistribution.of_products(shells), level=2).passed
    assert consistency_check(WeakDistribution((H,))).passed
    bad = WeakDistribution((product(H, H), product(product(H, H), haar(PP, density=2))))
    v = consistency_check(bad)
    assert not v.passed
    d, m, A, lhs, rhs = v.witness
    assert (d, m) == (2, 3) and lhs != rhs and rhs == 2 * lhs


def test_consistency_of_random_products_and_transitivity():
    rng = random.Random(3)
    fs = [random_measure(rng, PP, 1, 2, probability=True) for _ in range(3)]
    p2 = product(fs[0], fs[1])
    p3 = product(p2, fs[2])
    full = WeakDistribution((fs[0], p2, p3))
    assert consistency_check(full, level=2).passed
    # pairwise consistency of (1,2) and (2,3) carries over to (1,3)
    assert consistency_check(WeakDistribution((fs[0], p3)), level=2).passed


def test_consistency_catches_non_marginal_level():
    rng = random.Random(4)
    m = random_measure(rng, PP, 2, 2, probability=True)
    other = random_measure(rng, PP, 1, 2, probability=True)
    if m.marginal(1) != other:
        assert not consistency_check(WeakDistribution((other, m)), level=2).passed


def test_tightness_haar_tower():
    wd = WeakDistribution.of_products([H] * 4)
    for c in (Fraction(1, 3), Fraction(1, 3**8)):
        v = tightness_check(wd, c, range(-4, 4))
        assert v.passed and v.uniform_radius == 1
    # c = 1 bounds every norm, so the smallest grid ball already works
    assert tightness_check(wd, 1, range(-4, 4)).uniform_exp == 3


def test_tightness_shell_tower_monotone_in_c():
    wd = WeakDistribution.of_products([shell_measure(PP, n) for n in (1, 2, 3, 4)])
    prev = None
    for e in range(0, 9):
        v = tightness_check(wd, Fraction(1, 3**e), range(-10, 6))
        assert v.passed
        # a smaller c never permits a smaller ball
        if prev is not None:
            assert v.uniform_exp <= prev
        prev = v.uniform_exp


def test_tightness_fails_for_unbounded_norms():
    wd = WeakDistribution((haar(PP, density=Fraction(1, 9)),))
    v = tightness_check(wd, 1, range(-2, 2))
    assert not v.passed and v.sup_norm == 9
    assert tightness_check(wd, 1, range(-2, 2), norm_bound=9).passed


def test_tightness_fails_without_grid_ball():
    far = haar(PP, ball(2, Fraction(1, 2**6), 0))
    v = tightness_check(WeakDistribution((far,)), Fraction(1, 3), range(-2, 2))
    assert not v.passed and v.least_exps == (None,)


@pytest.mark.parametrize("xi", [1, 2, Fraction(1, 2), 12])
@pytest.mark.parametrize("reading", ["quotient", "product"])
def test_gamma_is_probability(xi, reading):
    assert gamma_xi(PP, xi, reading).total_mass() == 1


def _oracle(mu: CellMeasure, xi, reading) -> Fraction:
    """int theta_mu dnu_xi^dim by truncation and refinement: theta_mu
    vanishes off p^-L Z_p and is constant on cosets of p^L Z_p."""
    g = gamma_xi(mu.pp, xi, reading)
    L = max(max(b.exps) for b, _ in mu.cells)
    cells = [(b.center[0], d * b.haar()) for b, d in g.truncate(-L).refine(L).cells]
    total = CycloValue.rational(2, 0)
    for combo in itertools.product(cells, repeat=mu.dim):
        mass = Fraction(1)
        for _, m in combo:
            mass *= m
        total = total + theta(mu, tuple(y for y, _ in combo)) * mass
    return total.to_fraction()


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("reading", ["quotient", "product"])
def test_s_xi_against_oracle(seed, reading):
    rng = random.Random(seed)
    dim = 1 + seed % 2
    mu = random_measure(rng, PP, dim, 2)
    xi = rng.choice([1, 2, Fraction(1, 2), 4])
    assert s_xi_value(mu, xi, reading) == _oracle(mu, xi, reading)


def test_s_xi_product_tower_matches_cells():
    fs = [uniform(PP, ball(2, 0, j)) for j in (1, 2)]
    wd = WeakDistribution.of_products(fs)
    assert s_xi_functional(wd, 2) == s_xi_value(product(*fs), 2)


def test_s_xi_stabilizes_in_N():
    wd = WeakDistribution.of_products([uniform(PP, ball(2, 0, j)) for j in range(1, 11)])
    for xi in (1, 2, Fraction(1, 2)):
        vals = [s_xi_functional(wd, xi, N) for N in range(1, 11)]
        diffs = [s_norm(b - a, 3) for a, b in zip(vals, vals[1:])]
        assert diffs == sorted(diffs, reverse=True)
        assert diffs[7] <= Fraction(1, 3**10)


@pytest.mark.parametrize("reading", ["quotient", "product"])
def test_point_mass_trend(reading):
    wd = WeakDistribution((uniform(PP, ball(2, 0, 3)),))
    r = s_xi_trend(wd, trend_schedule(2, reading, 6), reading=reading)
    assert r.tends_to_one and r.reading == reading
    # the opposite direction moves away from 1
    other = "product" if reading == "quotient" else "quotient"
    assert not s_xi_trend(wd, trend_schedule(2, other, 6), reading=reading).tends_to_one


def test_s_xi_rejects_zero_frequency():
    with pytest.raises(ValueError):
        s_xi_functional(WeakDistribution((H,)), 0)


def test_product_tower_dims():
    wd = WeakDistribution.of_products([H] * 5, dims=[1, 3, 5])
    assert wd.dims == (1, 3, 5)
    assert isinstance(wd.tower[1].to_cells().cells[0][0], Ball)
