"""Seeded random objects for property checks."""

from __future__ import annotations

import random
from fractions import Fraction

from uml.measures import CellMeasure, StepFunction
from uml.padic import Ball, PrimePair, ball


def rational(rng: random.Random, num: int = 9, den: int = 6, nonzero: bool = False) -> Fraction:
    while True:
        x = Fraction(rng.randint(-num, num), rng.randint(1, den))
        if x or not nonzero:
            return x


def padic_point(rng: random.Random, p: int, lo: int = -2, hi: int = 4) -> Fraction:
    """A point of ``p^lo Z`` reduced below ``p^hi`` (so at most ``p^-lo`` in
    the denominator)."""
    return Fraction(rng.randrange(p ** (hi - lo))) * Fraction(p) ** lo


def random_partition(rng: random.Random, p: int, dim: int, max_level: int,
                     root: Ball | None = None, split_prob: float = 0.6) -> list[Ball]:
    """Disjoint balls covering ``root`` (default the unit box), split at random."""
    root = root or Ball(p, (Fraction(0),) * dim, (0,) * dim)
    out, stack = [], [root]
    while stack:
        b = stack.pop()
        axis = rng.randrange(dim)
        if b.exps[axis] < max_level and rng.random() < split_prob:
            stack.extend(b.split(axis))
        else:
            out.append(b)
    return out


def random_measure(rng: random.Random, pp: PrimePair, dim: int, max_level: int,
                   zero_prob: float = 0.25, probability: bool = False) -> CellMeasure:
    """Random cells inside the unit box with rational densities."""
    while True:
        cells = []
        for b in random_partition(rng, pp.p, dim, max_level):
            d = Fraction(0) if rng.random() < zero_prob else rational(rng, nonzero=True)
            cells.append((b, d))
        mu = CellMeasure(pp, dim, tuple(cells))
        if not probability:
            return mu
        m = mu.total_mass()
        if m:
            return mu.scaled(1 / m)


def random_step(rng: random.Random, p: int, dim: int = 1, max_level: int = 3,
                lo: int = -1, default=None) -> StepFunction:
    """Random step function supported in ``(p^lo Z_p)^dim``."""
    root = Ball(p, (Fraction(0),) * dim, (lo,) * dim)
    pieces = tuple(
        (b, rational(rng)) for b in random_partition(rng, p, dim, max_level, root)
    )
    return StepFunction(p, dim, pieces, Fraction(0) if default is None else default)


def random_pieces_step(rng: random.Random, p: int, count: int = 3, lo: int = -1,
                       max_level: int = 3) -> StepFunction:
    """A sparse one-dimensional step function: a few disjoint random balls."""
    balls: list[Ball] = []
    tries = 0
    while len(balls) < count and tries < 50:
        tries += 1
        k = rng.randint(lo, max_level)
        b = ball(p, padic_point(rng, p, lo, k), k)
        if all(b.intersect(o) is None for o in balls):
            balls.append(b)
    return StepFunction(p, 1, tuple((b, rational(rng, nonzero=True)) for b in balls))
