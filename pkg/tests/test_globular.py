import numpy as np
import pytest

from conftest import complete, path
from src.globular.assembly import (
    RESIDUAL, SEPARATOR, UNMARKED, ClusteringResult, assemble_clustering, build_centers, build_Z,
    globular_mark, parse_globular,
)
from src.globular.characterize import characterize_globular
from src.globular.comb import canonical_clip, clip_comb, naive_top_k, refined_clip
from src.globular.schedule import AtomSchedule, Level, build_schedule, first_level
from src.sequences.sequence import StructureSequence, SubsetSequence
from src.spectrum.detection import detect_spectrum
from src.structures.structure import outer_boundary, weighted_sum
from src.utils.errors import InputError


@pytest.fixture(scope='module')
def clique_pair_run(clique_pair):
    report = detect_spectrum(clique_pair)
    schedule = build_schedule(report, clique_pair)
    return report, schedule, assemble_clustering(clique_pair, report, schedule)


@pytest.fixture(scope='module')
def residual_run(clique_pair_residual):
    report = detect_spectrum(clique_pair_residual)
    schedule = build_schedule(report, clique_pair_residual)
    return report, schedule, assemble_clustering(clique_pair_residual, report, schedule)


@pytest.fixture(scope='module')
def clique_and_path():
    """K_n and a path on n² vertices, half the measure each"""
    return StructureSequence(lambda n: weighted_sum([(0.5, complete(n)), (0.5, path(n * n))]), range(2, 17))


def annotation(S, label):
    return SubsetSequence.from_annotation(S, label)


class TestSchedule:
    def test_first_level(self):
        assert first_level(0.5) == 7
        assert first_level(0.25) == 9
        with pytest.raises(InputError):
            first_level(0.0)

    def test_clique_levels(self, clique_pair_run):
        _, schedule, _ = clique_pair_run
        [atom] = schedule.atoms
        assert atom.z0 == 7
        assert atom.depth == 3
        assert [level.z for level in atom.levels] == [7, 8, 9]
        assert atom.levels[0].delta == 1
        for level in atom.levels:
            assert level.alpha < 0.5 < level.beta
            assert level.beta - level.alpha < level.epsilon

    def test_levels_start_below_z0_under_finite_scale_spread(self, residual_run):
        _, schedule, _ = residual_run
        assert [round(atom.value, 1) for atom in schedule.atoms] == [0.5, 0.3]
        for atom in schedule.atoms:
            assert atom.depth >= 1
            assert atom.start == atom.levels[0].z
            assert atom.shift > 0
            assert atom.to_dict()['shift'] == atom.shift
        assert any('levels start' in warning for warning in schedule.warnings)

    def test_radii_and_thresholds_never_decrease(self, clique_pair_run):
        _, schedule, _ = clique_pair_run
        levels = schedule.atoms[0].levels
        assert all(a.delta <= b.delta and a.eta <= b.eta for a, b in zip(levels, levels[1:]))

    def test_no_atoms(self, cycles):
        schedule = build_schedule(detect_spectrum(cycles), cycles)
        assert schedule.atoms == []

    def test_radius_cap_too_small(self, clique_pair, clique_pair_run):
        report, _, _ = clique_pair_run
        with pytest.raises(InputError):
            build_schedule(report, clique_pair, radius_cap=4)

    def test_active_level(self):
        atom = AtomSchedule(0.5, 1.0, 2, 7, [Level(7, 0.49, 0.51, 1, 3), Level(8, 0.495, 0.505, 1, 6)])
        assert atom.active(2) is None
        assert atom.active(4).z == 7
        assert atom.active(9).z == 8
        with pytest.raises(InputError):
            atom.level(9)


class TestBuildingBlocks:
    def test_mark_names(self):
        assert globular_mark(1, 2, 3) == 'M_1_2_3'
        assert parse_globular('M_1_2_3') == (1, 2, 3)
        assert parse_globular(RESIDUAL) is None

    def test_build_Z(self, clique_pair):
        A = clique_pair[5]
        atom = AtomSchedule(0.5, 1.0, 2, 7, [Level(7, 0.49, 0.51, 1, 3)])
        assert build_Z(A, 5, atom, 7).all()
        assert not build_Z(A, 2, atom, 7).any()

    def test_centers_are_spread(self):
        A = path(10)
        assert build_centers(A, np.ones(10, dtype=bool), 3).tolist() == [0, 3, 6, 9]

    def test_centers_one_per_component(self, clique_pair):
        A = clique_pair[6]
        assert build_centers(A, np.ones(A.n, dtype=bool), 7).tolist() == [0, 6]


class TestAssembly:
    def test_cliques_are_marked(self, clique_pair, clique_pair_run):
        _, _, result = clique_pair_run
        assert result.status == 'verified'
        for n in result.window:
            labels = result.labels[n]
            assert all(parse_globular(str(v)) for v in labels)
            assert not (labels == SEPARATOR).any()
            assert sum(len(per.get(n, [])) for per in result.centers.values()) == 2

    def test_interweaving_cliques_share_a_subgroup(self, clique_pair_run):
        _, _, result = clique_pair_run
        n = result.indices[-1]
        labels = result.labels[n]
        assert set(labels.tolist()) == {'M_1_1_1', 'M_1_1_2'}
        assert (labels[:n] == 'M_1_1_1').all()

    def test_two_atom_classes_with_residual_path(self, clique_pair_residual, residual_run):
        _, schedule, result = residual_run
        reach = max(level.delta for atom in schedule.atoms for level in atom.levels)
        assert result.status == 'verified'
        checks = {c['check'] for c in result.checks if c['in_window']}
        assert {'core-inside', 'centers', 'measure', 'boundary', 'disjoint', 'partition'} <= checks
        for n in result.window:
            A = clique_pair_residual[n]
            truth = np.asarray(clique_pair_residual.annotation(n)['labels'])
            labels = result.labels[n]
            on_path = np.isin(truth, ['R', 'S'])
            assert {parse_globular(str(v))[0] for v in labels[truth == 'C1']} == {1}
            assert {parse_globular(str(v))[0] for v in labels[truth == 'C2']} == {2}
            separator = labels == SEPARATOR
            globular = np.array([parse_globular(str(v)) is not None for v in labels])
            assert separator.sum() == 2
            assert on_path[separator].all()
            assert (separator & outer_boundary(A, globular)).sum() == 2
            residual = labels == RESIDUAL
            assert on_path[residual].all()
            assert residual.sum() >= n * n - 2 * (2 * reach + 1)

    def test_partition_check_passes(self, clique_pair_run):
        _, _, result = clique_pair_run
        [partition] = [c for c in result.checks if c['check'] == 'partition']
        assert partition['passed']

    def test_label_codes(self, clique_pair_run):
        _, _, result = clique_pair_run
        n = result.indices[-1]
        table = result.marks()
        assert [table[c] for c in result.codes(n)] == result.labels[n].tolist()

    def test_marked_structure(self, clique_pair, clique_pair_run):
        _, _, result = clique_pair_run
        n = result.indices[-1]
        lifted = result.marked_structure(clique_pair, n)
        for name in result.marks():
            assert (lifted.relation_mask(name) == result.mask(n, name)).all()

    def test_cycles_stay_residual(self, cycles):
        report = detect_spectrum(cycles)
        result = assemble_clustering(cycles, report, build_schedule(report, cycles))
        assert result.marks() == [RESIDUAL]
        assert result.status == 'verified'


class TestComb:
    def test_canonical_clip(self):
        table = np.array([[0.5, 0.5]] * 3)
        assert canonical_clip([1, 2, 3], table, np.array([0.5, 0.5]), 0.05).tolist() == [1, 2, 2]

    def test_refined_clip_waits_for_thresholds(self):
        T = np.full((3, 3), np.inf)
        T[1, 1] = 2
        assert refined_clip([1, 2, 3], np.array([1, 2, 2]), T).tolist() == [0, 1, 1]

    def test_star_forest(self, star_forest):
        clusters = [annotation(star_forest, label) for label in star_forest.annotation_labels()]
        naive = naive_top_k(star_forest, clusters, 8)
        combed = clip_comb(star_forest, clusters)
        assert min(naive.unmarked_mass(n) for n in naive.window) >= 0.4
        assert max(combed.unmarked_mass(n) for n in combed.window) <= 0.1
        assert not combed.violations(window_only=True)

    def test_single_full_cluster(self, clique_pair):
        result = clip_comb(clique_pair, [SubsetSequence.full(clique_pair)])
        assert set(result.labels[16].tolist()) == {'M_1'}
        assert result.clip[16] == {'F': 1, 'G': 1}

    def test_naive_marks_largest_first(self, clique_pair):
        result = naive_top_k(clique_pair, [annotation(clique_pair, 'C1'), annotation(clique_pair, 'C2')], 1)
        assert set(result.labels[16].tolist()) == {'M_1', UNMARKED}
        assert result.unmarked_mass(16) == pytest.approx(0.5)

    def test_needs_clusters(self, clique_pair):
        with pytest.raises(InputError):
            clip_comb(clique_pair, [])


class TestCharacterize:
    def test_clique_matches_a_group(self, clique_pair, clique_pair_run):
        _, _, result = clique_pair_run
        match = characterize_globular(clique_pair, annotation(clique_pair, 'C1'), result)
        assert match.matched
        assert match.group[0] == 1
        assert match.tail_sup < 0.05

    def test_single_vertex_matches_nothing(self, clique_pair, clique_pair_run):
        _, _, result = clique_pair_run
        X = SubsetSequence(clique_pair, lambda n, A: np.arange(A.n) == 0, 'v0')
        assert not characterize_globular(clique_pair, X, result).matched

    def test_far_extra_vertex_is_absorbed(self, clique_and_path):
        S = clique_and_path
        labels = {n: np.array(['M_1_1_1'] * n + [RESIDUAL] * (n * n)) for n in S.indices}
        result = ClusteringResult('assembly', list(S.indices), S.window(), labels)
        X = SubsetSequence(S, lambda n, A: np.arange(A.n) < n, 'clique')
        padded = SubsetSequence(S, lambda n, A: (np.arange(A.n) < n) | (np.arange(A.n) == A.n - 1), 'padded')
        assert characterize_globular(S, X, result).matched
        assert characterize_globular(S, padded, result).matched

    def test_path_matches_nothing(self, clique_and_path):
        S = clique_and_path
        labels = {n: np.array(['M_1_1_1'] * n + [RESIDUAL] * (n * n)) for n in S.indices}
        result = ClusteringResult('assembly', list(S.indices), S.window(), labels)
        X = SubsetSequence(S, lambda n, A: np.arange(A.n) >= n, 'path')
        match = characterize_globular(S, X, result)
        assert not match.matched
        assert match.candidates
