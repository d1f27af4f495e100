from fractions import Fraction

import pytest

from bisandwich.core import BiregularParams, BipartiteGraph
from bisandwich.enumeration import list_biregular


@pytest.fixture(scope="session")
def p442():
    return BiregularParams(4, 4, Fraction(1, 2))


@pytest.fixture(scope="session")
def graphs442(p442):
    return list_biregular(p442)


@pytest.fixture
def empty44():
    return BipartiteGraph.empty(4, 4)
