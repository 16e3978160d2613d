import random

import pytest

from uml.padic import PrimePair


@pytest.fixture
def pp():
    return PrimePair(2, 3)


@pytest.fixture
def rng():
    return random.Random(1234)
