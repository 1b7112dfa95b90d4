import math

import numpy as np
import pytest

from src.generators.families import GeneratorSpec, families, generate, random_regular
from src.utils.errors import InputError


def build(family, n, params=None, index_range=(1, 40), seed=0):
    return generate(GeneratorSpec(family, dict(params or {}), index_range, seed), n)


def label_counts(generated):
    names, counts = np.unique(generated.annotation['labels'], return_counts=True)
    return dict(zip(names.tolist(), counts.tolist()))


def test_family_list():
    names = [f['name'] for f in families()]
    assert names == sorted(names)
    assert {'clique-pair', 'clique-pair-residual', 'cycle', 'star-forest', 'expander',
            'expander-union', 'linked-components'} <= set(names)


class TestCliquePair:
    def test_sizes_and_weights(self):
        g = build('clique-pair', 3)
        A = g.structure
        assert label_counts(g) == {'C1': 3, 'C2': 4}
        assert np.allclose(A.weights[:3], 0.5 / 3)
        assert np.allclose(A.weights[3:], 0.5 / 4)
        assert g.annotation['atoms'] == [{'lambda': 0.5, 'count': 2}]
        assert g.annotation['residual_mass'] == 0.0

    def test_distinct_measures(self):
        g = build('clique-pair', 2, {'measures': [0.6, 0.4]})
        assert g.annotation['atoms'] == [{'lambda': 0.6, 'count': 1}, {'lambda': 0.4, 'count': 1}]

    def test_measures_must_sum_to_one(self):
        with pytest.raises(InputError):
            build('clique-pair', 2, {'measures': [0.5, 0.4]})

    def test_residual_path(self):
        g = build('clique-pair-residual', 3, index_range=(2, 10))
        counts = label_counts(g)
        assert counts['C1'] == 3 and counts['C2'] == 4
        assert counts['R'] + counts['S'] == 9
        assert counts['S'] == 2
        assert g.annotation['residual_mass'] == pytest.approx(0.2)


def test_cycle():
    A = build('cycle', 3, index_range=(2, 10)).structure
    assert A.n == 6
    assert A.degrees().tolist() == [2] * 6


def test_star_forest_weights():
    g = build('star-forest', 2)
    A = g.structure
    raw = [(2.0 ** -i + 0.25) / 2 for i in range(1, 5)]
    labels = np.array(g.annotation['labels'])
    for i, w in enumerate(raw, start=1):
        assert A.weights[labels == f"C{i}"].sum() == pytest.approx(w / sum(raw))
    assert label_counts(g)['C1'] == 64
    assert label_counts(g)['C2'] == math.ceil(64 * raw[1] / raw[0])
    assert g.annotation['atoms'] == [{'lambda': 0.25, 'count': 1}, {'lambda': 0.125, 'count': 1}]


class TestExpanders:
    def test_regular_and_deterministic(self):
        first = build('expander', 2).structure
        again = build('expander', 2).structure
        assert first == again
        assert first.n == 16
        assert set(first.degrees().tolist()) == {3}
        assert len(np.unique(first.components())) == 1

    def test_seed_changes_the_graph(self):
        assert build('expander', 3, seed=1).structure != build('expander', 3, seed=2).structure

    def test_union_odd_index(self):
        assert label_counts(build('expander-union', 3)) == {'E1': 24, 'E2': 24, 'E3': 24}

    def test_union_even_index(self):
        assert label_counts(build('expander-union', 2)) == {'E1': 16, 'E2': 32}

    def test_no_regular_graph(self):
        with pytest.raises(InputError):
            random_regular(5, 3, np.random.default_rng(0))


def test_linked_components():
    g = build('linked-components', 4)
    assert label_counts(g) == {'C1': 8, 'C2': 8, 'R': 2}
    assert np.allclose(g.structure.weights, 1 / 18)
    assert len(np.unique(g.structure.components())) == 1


class TestSpecErrors:
    def test_unknown_family(self):
        with pytest.raises(InputError, match='unknown generator family'):
            build('hypercube', 1)

    def test_unknown_parameter(self):
        with pytest.raises(InputError):
            build('cycle', 2, {'length': 4}, index_range=(2, 10))

    def test_below_min_index(self):
        with pytest.raises(InputError):
            build('cycle', 2, index_range=(1, 10))

    def test_outside_range(self):
        with pytest.raises(InputError):
            build('clique-pair', 50)

    def test_negative_seed(self):
        with pytest.raises(InputError):
            build('expander', 1, seed=-1)
