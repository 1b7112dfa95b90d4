import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)

from src.generators.families import SIGNATURE
from src.sequences.sequence import StructureSequence
from src.structures.structure import Structure


def graph(n, edges, weights='uniform'):
    """Simple graph over `adj` with both orientations of every edge"""
    pairs = [(int(u), int(v)) for u, v in edges]
    pairs += [(v, u) for u, v in pairs]
    return Structure(n, {'adj': pairs}, weights, signature=SIGNATURE)


def complete(n, weights='uniform'):
    return graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)], weights)


def path(n, weights='uniform'):
    return graph(n, [(i, i + 1) for i in range(n - 1)], weights)


def cycle(n, weights='uniform'):
    return graph(n, [(i, (i + 1) % n) for i in range(n)], weights)


def random_graph(rng, n, p=0.4):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    weights = rng.random(n) + 0.05
    return graph(n, edges, weights / weights.sum())


@pytest.fixture
def k3():
    return complete(3)


@pytest.fixture
def k4():
    return complete(4)


@pytest.fixture
def path3():
    return path(3)


@pytest.fixture
def p4():
    return path(4)


@pytest.fixture
def two_k2():
    return graph(4, [(0, 1), (2, 3)])


@pytest.fixture
def star3():
    return graph(4, [(0, 1), (0, 2), (0, 3)])


@pytest.fixture
def c8():
    return cycle(8)


@pytest.fixture(scope='session')
def clique_pair():
    return StructureSequence.from_generator('clique-pair', {'measures': [0.5, 0.5]}, (1, 16))


@pytest.fixture(scope='session')
def clique_pair_residual():
    return StructureSequence.from_generator('clique-pair-residual', {'measures': [0.5, 0.3]}, (2, 16))


@pytest.fixture(scope='session')
def cycles():
    return StructureSequence.from_generator('cycle', {}, (2, 40))


@pytest.fixture(scope='session')
def star_forest():
    return StructureSequence.from_generator('star-forest', {}, (1, 8))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
