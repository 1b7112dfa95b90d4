import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from conftest import complete, graph, path, random_graph
from src.generators.families import random_regular
from src.logic.parser import parse
from src.sequences.clusters import (
    boolean_combinations_are_clusters, interweaving, intersection_dichotomy, is_cluster,
    pre_cluster_check, universal_at_scale, wrap,
)
from src.sequences.dispersion import classify, column_limit, dispersion_row, saturating_radius
from src.sequences.expansion import clean_expander, degree_bound_h_out, expansion_check
from src.sequences.negligible import (
    ball_profile, check_fragmentation, check_negligible_bound, equivalent, is_included, negligible_profile,
)
from src.sequences.sequence import StructureSequence, SubsetSequence, convergence_diagnostic, tail_window
from src.structures.structure import ball, measure, weighted_sum
from src.utils.errors import InputError, PreconditionError

LOCAL_FORMULAS = [
    "adj(x1,x2)",
    "adj(x1,x2) & adj(x2,x3)",
    "exists y in B[1](x1): adj(y,x2)",
    "~adj(x1,x2) & x1 != x2",
]


@pytest.fixture(scope='module')
def long_paths():
    return StructureSequence(lambda n: path(100 * n), range(1, 13))


@pytest.fixture
def k10_k2():
    edges = [(u, v) for u in range(10) for v in range(u + 1, 10)] + [(10, 11)]
    return graph(12, edges)


@pytest.fixture(scope='module')
def short_paths():
    return StructureSequence(lambda n: path(4 * n), range(1, 25))


def first_half(S):
    return SubsetSequence(S, lambda n, A: np.arange(A.n) < A.n // 2, 'half')


def brute_force_h_out(A):
    """min ν(ball¹(X)∖X)/ν(X) over 0 < ν(X) ≤ 1/2, by listing every subset"""
    best = np.inf
    for size in range(1, A.n):
        for ids in itertools.combinations(range(A.n), size):
            mass = measure(A, list(ids))
            if mass <= 0.5 + 1e-12:
                best = min(best, (measure(A, ball(A, list(ids), 1)) - mass) / mass)
    return best


def first_vertices(S, count):
    return SubsetSequence(S, lambda n, A: np.arange(A.n) < count, f"first{count}")


def clique(S, label):
    return SubsetSequence.from_annotation(S, label)


class TestSequence:
    def test_tail_window(self):
        assert tail_window(range(1, 17), 0.25) == [13, 14, 15, 16]
        assert tail_window([1, 2, 3], 0.1) == [3]

    def test_unknown_index(self, clique_pair):
        with pytest.raises(InputError):
            clique_pair[99]

    def test_subsequence_must_increase(self, clique_pair):
        with pytest.raises(InputError):
            clique_pair.subsequence([3, 2])

    def test_misaligned_subsets(self, clique_pair, cycles):
        with pytest.raises(InputError):
            SubsetSequence.full(clique_pair) | SubsetSequence.full(cycles)

    def test_annotation_labels(self, clique_pair_residual):
        assert clique_pair_residual.annotation_labels() == ['C1', 'C2', 'R', 'S']

    def test_definable(self, clique_pair):
        X = SubsetSequence.definable(clique_pair, parse("exists y in B[1](x1): adj(x1,y)"))
        assert X[5].all()

    def test_convergence_of_clique_pair(self, clique_pair):
        diagnostic = convergence_diagnostic(clique_pair, [('adj', parse("adj(x1,x2)"))])
        assert diagnostic.passes(0.05)
        assert diagnostic.limits()['adj'] == pytest.approx(0.5, abs=0.05)


class TestNegligible:
    def test_ball_profile_on_path(self):
        assert ball_profile(path(5), [0], 3).tolist() == pytest.approx([0.2, 0.4, 0.6, 0.8])

    def test_empty_sequence(self, clique_pair):
        profile = negligible_profile(clique_pair, SubsetSequence.empty(clique_pair))
        assert (profile.table.to_numpy() == 0).all()
        assert profile.negligible

    def test_full_sequence(self, clique_pair):
        profile = negligible_profile(clique_pair, SubsetSequence.full(clique_pair))
        assert profile.tail_sup.min() == pytest.approx(1.0)
        assert profile.verdict == 'not-negligible'

    def test_single_vertex_of_long_paths(self, long_paths):
        assert negligible_profile(long_paths, first_vertices(long_paths, 1)).negligible

    def test_one_vertex_does_not_change_the_class(self, long_paths):
        X, Y = first_vertices(long_paths, 50), first_vertices(long_paths, 51)
        assert equivalent(long_paths, X, Y).negligible
        assert is_included(long_paths, Y, X).negligible

    def test_square_root_links_are_negligible(self):
        S = StructureSequence.from_generator('linked-components', {}, (200, 260))
        links = clique(S, 'R')
        profile = negligible_profile(S, links, dmax=2)
        assert profile.negligible
        assert profile.table.loc[260, 2] < profile.table.loc[200, 2]
        assert negligible_profile(S, clique(S, 'C1'), dmax=2).tail_sup.min() > 0.4

    def test_clique_is_not_negligible(self, clique_pair):
        assert not negligible_profile(clique_pair, clique(clique_pair, 'C1')).negligible

    def test_bound_holds(self, k10_k2):
        report = check_negligible_bound(k10_k2, [10, 11], parse("adj(x1,x2)"), 2, 0.2)
        assert report.precondition
        assert report.difference == pytest.approx(0.9 - 92 / 144)
        assert report.bound == pytest.approx(0.8)
        assert report.holds

    def test_bound_needs_a_small_ball(self, k10_k2):
        report = check_negligible_bound(k10_k2, [10, 11], parse("adj(x1,x2)"), 2, 0.1)
        assert not report.precondition
        assert report.holds is None

    def test_bound_needs_radius_below_d(self, k10_k2):
        report = check_negligible_bound(k10_k2, [10, 11], parse("exists y in B[2](x1): adj(x1,y)"), 2, 0.2)
        assert not report.precondition

    @pytest.mark.parametrize('epsilon', [0.0, 1.0, 1.5])
    def test_bound_needs_epsilon_below_one(self, k10_k2, epsilon):
        with pytest.raises(InputError, match='epsilon'):
            check_negligible_bound(k10_k2, np.ones(12, dtype=bool), parse("adj(x1,x2)"), 2, epsilon)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(3, 10), st.integers(0, 2 ** 16), st.sampled_from(LOCAL_FORMULAS))
    def test_bound_holds_whenever_x_is_negligible(self, n, seed, text):
        rng = np.random.default_rng(seed)
        A = weighted_sum([(0.5, random_graph(rng, n)), (0.5, path(6))])
        X = np.zeros(A.n, dtype=bool)
        X[int(np.argmin(A.weights[:n]))] = True
        epsilon = measure(A, ball(A, X, 2)) + 1e-3
        report = check_negligible_bound(A, X, parse(text), 2, epsilon)
        assert report.precondition
        assert report.holds

    def test_fragmentation(self, k10_k2):
        out = check_fragmentation(k10_k2, [list(range(10)), [10, 11]], parse("adj(x1,x2)"), 1, 0.05)
        assert out['precondition']
        assert out['difference'] == pytest.approx(0.0, abs=1e-12)
        assert out['holds']

    def test_fragmentation_parts_must_be_disjoint(self, k10_k2):
        with pytest.raises(InputError):
            check_fragmentation(k10_k2, [[0, 1], [1, 2]], parse("adj(x1,x2)"), 1, 0.05)


class TestClusters:
    def test_full_domain(self, clique_pair):
        assert is_cluster(clique_pair, SubsetSequence.full(clique_pair)).is_cluster

    def test_empty_set(self, clique_pair):
        verdict = is_cluster(clique_pair, SubsetSequence.empty(clique_pair))
        assert verdict.is_cluster
        assert verdict.alternative['note'] == 'negligible cluster'

    def test_clique_component(self, clique_pair):
        verdict = is_cluster(clique_pair, clique(clique_pair, 'C1'))
        assert verdict.is_cluster
        assert verdict.limit_measure() == pytest.approx(0.5)
        assert verdict.alternative['holds']

    def test_complement_of_a_cluster_is_a_cluster(self, short_paths):
        X = first_half(short_paths)
        verdict = is_cluster(short_paths, X, dmax=1, tol=0.1)
        rest = is_cluster(short_paths, X.complement(), dmax=1, tol=0.1)
        assert verdict.is_cluster and rest.is_cluster
        assert verdict.limit_measure() + rest.limit_measure() == pytest.approx(1.0)

    def test_complement_of_a_clique(self, clique_pair):
        X = clique(clique_pair, 'C1')
        assert is_cluster(clique_pair, X.complement()).is_cluster
        assert equivalent(clique_pair, X.complement(), clique(clique_pair, 'C2')).negligible

    def test_negligible_change_keeps_a_cluster(self, short_paths):
        X = first_half(short_paths)
        Y = SubsetSequence(short_paths, lambda n, A: np.arange(A.n) <= A.n // 2, 'half+1')
        assert is_cluster(short_paths, X, dmax=1, tol=0.1).is_cluster
        assert equivalent(short_paths, X, Y, dmax=1, tol=0.1).negligible
        assert is_cluster(short_paths, Y, dmax=1, tol=0.1).is_cluster

    def test_alternating_cliques(self):
        A = weighted_sum([(0.4, complete(10)), (0.6, complete(10))])
        S = StructureSequence(lambda n: A, range(1, 17))
        X = SubsetSequence(S, lambda n, B: (np.arange(20) < 10) == (n % 2 == 0), 'alternating')
        verdict = is_cluster(S, X)
        assert verdict.verdict == 'not-cluster'
        assert 'oscillates' in verdict.failing

    def test_single_index_window(self, clique_pair):
        verdict = is_cluster(clique_pair, SubsetSequence.full(clique_pair), window_fraction=0.01)
        assert verdict.verdict == 'inconclusive'

    def test_twin_cliques_interweave(self, clique_pair):
        assert interweaving(clique_pair, clique(clique_pair, 'C1'), clique(clique_pair, 'C2')).interweaving

    def test_clique_and_whole_do_not_interweave(self, clique_pair):
        verdict = interweaving(clique_pair, clique(clique_pair, 'C1'), SubsetSequence.full(clique_pair))
        assert not verdict.interweaving
        assert verdict.measure_difference == pytest.approx(0.5)

    def test_boolean_combinations(self, clique_pair):
        out = boolean_combinations_are_clusters(clique_pair, [clique(clique_pair, 'C1'), clique(clique_pair, 'C2')])
        assert out['premise'] and out['conclusion']

    def test_intersection_dichotomy(self, clique_pair):
        X = clique(clique_pair, 'C1')
        assert intersection_dichotomy(clique_pair, X, X)['limit'] == 1
        assert intersection_dichotomy(clique_pair, X, clique(clique_pair, 'C2'))['limit'] == 0

    def test_universal_reports_every_lift(self, clique_pair):
        verdict = universal_at_scale(clique_pair, clique(clique_pair, 'C1'), lifts=2, seed=3)
        assert len(verdict.to_dict()['lifts']) == 2


class TestWrap:
    def test_isolated_clique_wraps_to_itself(self, clique_pair):
        X = clique(clique_pair, 'C1')
        result = wrap(clique_pair, X, radius_cap=4)
        assert set(result.radii.values()) == {4}
        assert (result.halo == 0).all()
        assert (result.W[16] == X[16]).all()

    def test_empty_set_is_not_a_pre_cluster(self, clique_pair):
        assert pre_cluster_check(clique_pair, SubsetSequence.empty(clique_pair))
        with pytest.raises(PreconditionError):
            wrap(clique_pair, SubsetSequence.empty(clique_pair))


class TestExpansion:
    def test_complete_graph(self, k4):
        report = expansion_check(k4, 1, 0.1, mode='exact')
        assert report.h_out == pytest.approx(1.0)
        assert report.delta == pytest.approx(1 / 3)

    def test_disconnected_graph(self, two_k2):
        assert expansion_check(two_k2, 1, 0.1, mode='exact').delta == 0

    def test_cycle(self, c8):
        assert expansion_check(c8, 1, 0.1, mode='exact').h_out == pytest.approx(0.5)

    def test_sampled_never_underestimates(self, k4):
        report = expansion_check(k4, 1, 0.1, mode='sampled', sample_count=200, seed=1)
        assert report.mode == 'sampled'
        assert report.h_out >= 1.0 - 1e-12

    def test_exact_refused_above_cap(self, k4):
        with pytest.raises(InputError):
            expansion_check(k4, 1, 0.1, mode='exact', exact_cap=3)

    def test_unknown_mode(self, k4):
        with pytest.raises(InputError):
            expansion_check(k4, 1, 0.1, mode='fast')

    def test_clean_complete_graph(self, k4):
        report = clean_expander(k4, 1, 0.1, 0.2)
        assert report.Y == []
        assert report.verified

    def test_clean_needs_small_epsilon(self, k4):
        with pytest.raises(PreconditionError):
            clean_expander(k4, 1, 0.2, 0.2)

    def test_clean_needs_expansion(self, k4):
        with pytest.raises(PreconditionError):
            clean_expander(k4, 1, 0.1, 0.5)

    def test_clean_clique_with_pendant(self):
        epsilon = 0.1
        weights = np.append(np.full(8, (1 - epsilon / 2) / 8), epsilon / 2)
        A = graph(9, [(u, v) for u in range(8) for v in range(u + 1, 8)] + [(0, 8)], weights)
        report = clean_expander(A, 1, epsilon, 0.1)
        # the pendant's ball takes in a heavy clique vertex, so nothing needs removing
        assert report.Y == []
        assert report.measure <= epsilon
        assert report.verified

    @pytest.mark.parametrize('seed', range(5))
    def test_h_out_of_cubic_graphs(self, seed):
        A = graph(12, random_regular(12, 3, np.random.default_rng(seed)))
        report = expansion_check(A, 1, 0.1, mode='exact')
        assert report.h_out == pytest.approx(brute_force_h_out(A))
        assert 0 < report.h_out <= 1
        cleaned = clean_expander(A, 1, 0.1, report.delta / 2)
        assert cleaned.measure <= 0.1
        assert cleaned.verified

    def test_degree_bound(self):
        assert degree_bound_h_out(0.5, 3, 1) == pytest.approx(0.25)


class TestClassify:
    def test_dispersion_row(self, p4):
        assert dispersion_row(p4, np.ones(4, dtype=bool), 3).tolist() == pytest.approx([0.25, 0.75, 1.0, 1.0])

    def test_saturating_radius(self):
        profile = pd.DataFrame([[0.2, 0.96], [0.1, 0.5]], index=[1, 2])
        assert saturating_radius(profile, 0.05).tolist()[0] == 1
        assert np.isnan(saturating_radius(profile, 0.05).tolist()[1])

    def test_clique_is_globular(self, clique_pair):
        assert classify(clique_pair, clique(clique_pair, 'C1')).label == 'globular'

    def test_growing_cycle_is_residual(self, cycles):
        result = classify(cycles, SubsetSequence.full(cycles))
        assert result.label == 'residual'
        assert max(result.h_out.values()) < 0.1

    def test_column_limit(self):
        n = np.arange(31, 41)
        assert column_limit(n, 5 / (2 * n), 0.05) == pytest.approx(0.0, abs=1e-9)
        assert column_limit(n, (n + 1) / (2 * n + 1), 0.05) == pytest.approx(0.5, abs=1e-3)

    def test_plateau_is_not_residual(self):
        """Two cliques of measure near ½ each: the columns drift down but stay far above ε"""
        S = StructureSequence(
            lambda n: weighted_sum([(n / (2 * n + 1), complete(n)), ((n + 1) / (2 * n + 1), complete(n + 1))]),
            range(4, 30))
        result = classify(S, SubsetSequence.full(S), dmax=4, expansion_threshold=10.0)
        assert result.label == 'inconclusive'
        assert 'tends to 0.5' in result.reason

    def test_expander_is_open(self):
        S = StructureSequence.from_generator('expander', {}, (8, 16))
        assert classify(S, SubsetSequence.full(S), dmax=3).label == 'open'
