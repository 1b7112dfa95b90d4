import numpy as np
import pytest

from conftest import random_graph
from src.logic.formula import TRUE
from src.logic.parser import parse
from src.spectrum.random_lift import box_distance, box_metric, random_lift_distribution
from src.utils.errors import InputError

EDGE = parse("adj(x1,x2)")


def test_reflexive_formula_is_a_point_mass(k3):
    P = random_lift_distribution(k3, [parse("x1 = x1")])
    [(point, mass)] = P.atoms()
    assert point == (1.0,)
    assert mass == pytest.approx(1.0)


def test_path_edge_statistic(path3):
    P = random_lift_distribution(path3, [('adj', EDGE)])
    values = sorted((round(p[0], 9), round(m, 9)) for p, m in P.atoms())
    assert values == [(round(1 / 3, 9), round(2 / 3, 9)), (round(2 / 3, 9), round(1 / 3, 9))]
    assert P.mean()[0] == pytest.approx(4 / 9)


def test_plain_formulas_are_named(path3):
    P = random_lift_distribution(path3, [EDGE, parse("x1 = x1")])
    assert P.names == ['phi1', 'phi2']
    assert P.dimension == 2


def test_sentence_is_rejected(k3):
    with pytest.raises(InputError):
        random_lift_distribution(k3, [TRUE])


def test_empty_battery(k3):
    with pytest.raises(InputError):
        random_lift_distribution(k3, [])


class TestBoxMetric:
    def test_equal_points(self):
        assert box_metric([0.2, 0.4], [0.2, 0.4]) == 0.0

    def test_first_coordinate(self):
        assert box_metric([0.5], [0.0]) == pytest.approx(0.5)

    def test_far_coordinates_matter_less(self):
        assert box_metric([0, 0, 0.9], [0, 0, 0]) == pytest.approx(1 / 3)

    def test_identical_laws(self, path3):
        P = random_lift_distribution(path3, [('adj', EDGE)])
        assert box_distance(P, P) == 0.0

    def test_path_against_triangle(self, path3, k3):
        P = random_lift_distribution(path3, [('adj', EDGE)])
        Q = random_lift_distribution(k3, [('adj', EDGE)])
        assert box_distance(P, Q, resolution=1) == pytest.approx(0.0)
        assert box_distance(P, Q, resolution=3) == pytest.approx(2 / 3)

    def test_batteries_must_match(self, path3):
        P = random_lift_distribution(path3, [('adj', EDGE)])
        Q = random_lift_distribution(path3, [('edge', EDGE)])
        with pytest.raises(InputError):
            box_distance(P, Q)

    def test_resolution_must_be_positive(self, path3):
        P = random_lift_distribution(path3, [('adj', EDGE)])
        with pytest.raises(InputError):
            box_distance(P, P, resolution=0)


def test_lift_masses_sum_to_one(rng):
    A = random_graph(rng, 7)
    P = random_lift_distribution(A, [EDGE, parse("exists y in B[1](x1): adj(x1,y) & y != x1")])
    assert P.masses.sum() == pytest.approx(1.0)
    assert np.all((P.points >= 0) & (P.points <= 1))
