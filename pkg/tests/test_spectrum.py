import numpy as np
import pytest

from conftest import path
from src.logic.evaluator import stone_pairing
from src.spectrum.detection import continuity_point, detect_spectrum, group_support, stable_radii
from src.spectrum.distribution import (
    EmpiricalCDF, ball_measure_distribution, interval_sandwich, moment_table, moment_table_from_cdf, psi_formula,
)
from src.spectrum.inversion import (
    atom_mass, characteristic_function, direct_characteristic_function, inversion_constant, inversion_grid,
    mixture_characteristic_function, truncation_bound,
)
from src.utils.errors import InputError


class TestDistribution:
    def test_two_edges(self, two_k2):
        F = ball_measure_distribution(two_k2, 1)
        assert F.atoms() == [(0.5, 1.0)]
        assert F(0.49) == 0.0
        assert F(0.5) == 1.0

    def test_path(self, p4):
        F = ball_measure_distribution(p4, 1)
        assert F.atoms() == [(0.5, 0.5), (0.75, 0.5)]
        assert F.mean() == pytest.approx(0.625)

    def test_frame(self, p4):
        frame = ball_measure_distribution(p4, 1).to_frame()
        assert list(frame.columns) == ['t', 'F']
        assert frame['F'].iloc[-1] == pytest.approx(1.0)

    def test_mass_at(self):
        F = EmpiricalCDF([0.1, 0.11, 0.5], [0.2, 0.3, 0.5])
        assert F.mass_at(0.1, 0.02) == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            EmpiricalCDF([0.1, 0.2], [1.0])

    def test_second_moment(self, p4):
        table = moment_table(p4, 1, 2)
        assert table.moments[2] == pytest.approx(0.40625)
        assert stone_pairing(p4, psi_formula(1, 2)) == pytest.approx(0.40625)

    def test_moments_from_cdf(self, p4):
        direct = moment_table(p4, 1, 4).moments
        via = moment_table_from_cdf(ball_measure_distribution(p4, 1), 1, 4).moments
        assert np.allclose(direct, via)

    def test_moment_order_limit(self, p4):
        with pytest.raises(InputError):
            moment_table(p4, 1, 65)

    def test_interval_sandwich(self):
        out = interval_sandwich(path(9), 1, 2, 0.2, 0.6)
        assert out['holds']


class TestInversion:
    def test_value_at_zero(self, p4):
        series = characteristic_function(moment_table(p4, 1, 10), [0.0])
        assert series.values[0] == pytest.approx(1.0)
        assert mixture_characteristic_function([0.3, 0.7], [0.5, 0.5], [0.0]).values[0] == pytest.approx(1.0)

    def test_series_matches_direct_sum(self, p4):
        t = np.linspace(-5, 5, 21)
        series = characteristic_function(moment_table(p4, 1, 40), t)
        direct = direct_characteristic_function(ball_measure_distribution(p4, 1), t)
        assert not series.warning
        assert np.allclose(series.values, direct.values, atol=1e-9)

    def test_truncation_warning(self, p4):
        assert characteristic_function(moment_table(p4, 1, 2), [50.0]).warning

    def test_truncation_bound(self):
        assert truncation_bound(1.0, 0) == pytest.approx(1.0)
        assert truncation_bound(2.0, 1, 0.5) == pytest.approx(0.5)

    @pytest.mark.parametrize('T, bound', [(200, 0.05), (2000, 0.01)])
    def test_two_atoms(self, T, bound):
        gamma = mixture_characteristic_function([0.3, 0.7], [0.5, 0.5], inversion_grid(T))
        for a in (0.3, 0.7):
            assert atom_mass(gamma, a, T, 0.7).mass == pytest.approx(0.5, abs=bound)

    def test_no_atom_between(self):
        gamma = mixture_characteristic_function([0.3, 0.7], [0.5, 0.5], inversion_grid(2000))
        assert abs(atom_mass(gamma, 0.5, 2000, 0.7).mass) < 0.01

    def test_coarse_grid(self):
        gamma = mixture_characteristic_function([0.5], [1.0], inversion_grid(200, 11))
        with pytest.raises(InputError):
            atom_mass(gamma, 0.5, 200)

    def test_constant(self):
        out = inversion_constant([0.25, 0.75], [0.5, 0.5], T_values=(100, 400), points=8193)
        assert out['C'] < 5
        assert len(out['rows']) == 4


class TestDetection:
    def test_helpers(self):
        assert stable_radii([1, 2, 4, 8]) == [4, 8]
        F = EmpiricalCDF([0.1, 0.11, 0.5], [0.2, 0.3, 0.5])
        assert [round(g[1], 6) for g in group_support(F, 0.02)] == [0.5, 0.5]

    def test_continuity_point(self):
        observed = np.array([0.5])
        above = continuity_point(0.5, 1, observed)
        below = continuity_point(0.5, -1, observed)
        assert below < 0.5 < above
        assert above - 0.5 < 1e-6

    def test_twin_cliques(self, clique_pair):
        report = detect_spectrum(clique_pair)
        assert len(report.atoms) == 1
        atom = report.atoms[0]
        assert atom.value == pytest.approx(0.5)
        assert atom.count == 2
        assert not atom.unstable and atom.mass_bound_ok
        assert atom.inversion_mass == pytest.approx(1.0, abs=0.05)
        assert report.residual_mass == pytest.approx(0.0, abs=1e-9)
        assert not report.characteristic['warning']

    def test_cliques_with_residual_path(self, clique_pair_residual):
        report = detect_spectrum(clique_pair_residual)
        assert [a.count for a in report.atoms] == [1, 1]
        assert report.values == pytest.approx([0.5, 0.3], abs=0.02)
        assert report.residual_mass == pytest.approx(0.2, abs=0.05)

    def test_growing_cycle_has_no_atoms(self, cycles):
        report = detect_spectrum(cycles)
        assert report.atoms == []
        assert report.residual_mass == 1.0

    def test_report_keeps_the_window_laws(self, clique_pair):
        report = detect_spectrum(clique_pair, d_schedule=(1, 2))
        assert sorted(report.cdfs) == [(n, d) for n in report.window for d in (1, 2)]
        assert report.to_dict()['d_schedule'] == [1, 2]

    def test_empty_schedule(self, clique_pair):
        with pytest.raises(InputError):
            detect_spectrum(clique_pair, d_schedule=())
