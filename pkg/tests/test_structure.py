import json
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import complete, cycle, graph, path, random_graph
from src.structures.io import load_structure, save_structure, structure_from_dict
from src.structures.structure import (
    ball, ball_measure_table, induce, mark, measure, outer_boundary, shadow, weighted_sum,
)
from src.utils.errors import DomainError, InputError


def bfs_ball(A, sources, d):
    seen = set(sources)
    queue = deque((v, 0) for v in sources)
    while queue:
        v, k = queue.popleft()
        if k == d:
            continue
        for u in A.adjacency.indices[A.adjacency.indptr[v]:A.adjacency.indptr[v + 1]]:
            if u not in seen:
                seen.add(int(u))
                queue.append((int(u), k + 1))
    return seen


def ids(mask):
    return set(np.flatnonzero(mask).tolist())


class TestBall:
    def test_radius_one_on_path(self, path3):
        assert ids(ball(path3, [1], 1)) == {0, 1, 2}

    def test_radius_zero_is_identity(self, path3):
        assert ids(ball(path3, [0], 0)) == {0}

    def test_stays_in_component(self, two_k2):
        assert ids(ball(two_k2, [0], 5)) == {0, 1}

    def test_rejects_out_of_range_ids(self, path3):
        with pytest.raises(InputError):
            ball(path3, [3], 1)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 9), st.integers(0, 4), st.integers(0, 2 ** 16))
    def test_matches_bfs(self, n, d, seed):
        rng = np.random.default_rng(seed)
        A = random_graph(rng, n)
        X = [int(v) for v in np.flatnonzero(rng.random(n) < 0.3)]
        assert ids(ball(A, X, d)) == bfs_ball(A, X, d)


class TestBoundaryAndMeasure:
    def test_full_domain_has_no_boundary(self, k3):
        assert not outer_boundary(k3, [0, 1, 2]).any()

    def test_path_end(self, path3):
        assert ids(outer_boundary(path3, [0])) == {1}

    def test_component_has_no_boundary(self, two_k2):
        assert not outer_boundary(two_k2, [0, 1]).any()

    def test_uniform_half(self, two_k2):
        assert measure(two_k2, [0, 2]) == pytest.approx(0.5)

    def test_empty(self, two_k2):
        assert measure(two_k2, []) == 0

    def test_weighted(self):
        A = graph(4, [], [0.1, 0.2, 0.3, 0.4])
        assert measure(A, [1, 3]) == pytest.approx(0.6)


class TestInduce:
    def test_full_domain(self, k4):
        assert induce(k4, np.ones(4, dtype=bool)) == k4

    def test_renormalises(self, two_k2):
        B = induce(two_k2, [0, 1])
        assert B.n == 2
        assert np.allclose(B.weights, [0.5, 0.5])
        assert B.relations['adj'] == frozenset({(0, 1), (1, 0)})

    def test_zero_measure_is_an_error(self):
        A = graph(3, [(0, 1)], [0.5, 0.5, 0.0])
        with pytest.raises(DomainError):
            induce(A, [2])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(4, 10), st.integers(0, 2 ** 16))
    def test_induce_twice_is_induce_once(self, n, seed):
        rng = np.random.default_rng(seed)
        A = random_graph(rng, n)
        X = rng.random(n) < 0.7
        X[0] = True
        B = induce(A, X)
        Y = rng.random(B.n) < 0.6
        Y[0] = True
        inner = np.zeros(n, dtype=bool)
        inner[np.flatnonzero(X)[Y]] = True
        twice, once = induce(B, Y), induce(A, inner)
        assert twice.n == once.n
        assert twice.relations == once.relations
        assert np.allclose(twice.weights, once.weights)


class TestWeightedSum:
    def test_single_part(self, k3):
        assert weighted_sum([(1.0, k3)]) == k3

    def test_two_edges(self):
        A = weighted_sum([(0.5, complete(2)), (0.5, complete(2))])
        assert A.n == 4
        assert np.allclose(A.weights, 0.25)
        assert ids(ball(A, [0], 3)) == {0, 1}

    def test_isolated_points(self):
        A = weighted_sum([(0.3, graph(1, [])), (0.7, graph(1, []))])
        assert np.allclose(A.weights, [0.3, 0.7])

    def test_coefficients_must_sum_to_one(self, k3):
        with pytest.raises(InputError):
            weighted_sum([(0.4, k3), (0.4, k3)])


class TestMarks:
    def test_shadow_undoes_mark(self, p4):
        assert shadow(mark(p4, 'M', [0, 2])) == p4

    def test_empty_mark(self, p4):
        assert not mark(p4, 'M', []).relation_mask('M').any()

    def test_marks_commute(self, p4):
        a = mark(mark(p4, 'M1', [0]), 'M2', [1, 2])
        b = mark(mark(p4, 'M2', [1, 2]), 'M1', [0])
        assert a == b

    def test_mark_keeps_gaifman_graph(self, p4):
        assert (mark(p4, 'M', [0, 3]).adjacency != p4.adjacency).nnz == 0


def test_ball_measure_table_agrees_with_balls(rng):
    A = random_graph(rng, 9)
    table = ball_measure_table(A, 4)
    for v in range(A.n):
        for d in range(5):
            assert table[v, d] == pytest.approx(measure(A, ball(A, [v], d)))


def test_ball_measure_table_on_a_long_cycle():
    n = 1200
    A = cycle(n)
    table = ball_measure_table(A, 6)
    for d in range(7):
        assert np.allclose(table[:, d], (2 * d + 1) / n)
    assert A._distances is None


def test_ball_measure_table_matches_all_pairs_distances(rng):
    A = weighted_sum([(0.5, random_graph(rng, 12)), (0.5, path(7))])
    dist = A.distances()
    table = ball_measure_table(A, 5)
    for d in range(6):
        assert np.allclose(table[:, d], [(A.weights * (dist[v] <= d)).sum() for v in range(A.n)])


class TestFiles:
    def test_save_and_load(self, tmp_path, rng):
        A = random_graph(rng, 6)
        path_ = tmp_path / 'a.json'
        save_structure(A, str(path_))
        B = load_structure(str(path_))
        assert B.n == A.n and B.relations == A.relations
        assert np.allclose(B.weights, A.weights)

    def test_rational_weights(self):
        A = structure_from_dict({'n': 3, 'weights': ['1/3', '1/3', '1/3'],
                                 'relations': {'adj': {'arity': 2, 'tuples': [[0, 1], [1, 0]]}}})
        assert np.allclose(A.weights, 1 / 3)

    def test_names_the_bad_tuple(self):
        with pytest.raises(InputError, match=r'tuples\[0\]'):
            structure_from_dict({'n': 2, 'relations': {'adj': {'arity': 2, 'tuples': [[0, 5]]}}})

    def test_invalid_json(self, tmp_path):
        bad = tmp_path / 'bad.json'
        bad.write_text('{"n": 2,')
        with pytest.raises(InputError, match='line 1'):
            load_structure(str(bad))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InputError):
            structure_from_dict(json.loads('{"n": 2, "weights": [0.2, 0.2]}'))


def test_path_helper_degrees():
    assert path(5).degrees().tolist() == [1, 2, 2, 2, 1]
