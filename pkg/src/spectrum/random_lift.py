"""Law of the local-pairing vector (⟨φ1,A⟩_v, …, ⟨φk,A⟩_v) for v drawn with weight ν."""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.logic.batteries import Battery
from src.logic.evaluator import local_pairings
from src.logic.formula import Formula, arity
from src.spectrum.distribution import VALUE_DECIMALS
from src.structures.structure import Structure
from src.utils.errors import InputError


@dataclass
class LiftDistribution:
    names: List[str]
    points: np.ndarray
    masses: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.names)

    def mean(self) -> np.ndarray:
        return self.masses @ self.points

    def atoms(self) -> List[Tuple[Tuple[float, ...], float]]:
        return [(tuple(float(x) for x in row), float(m)) for row, m in zip(self.points, self.masses)]

    def to_dict(self) -> Dict:
        return {'names': list(self.names),
                'atoms': [{'point': list(p), 'mass': m} for p, m in self.atoms()]}


def _named(battery) -> Battery:
    out = []
    for i, item in enumerate(battery):
        if isinstance(item, Formula):
            out.append((f"phi{i + 1}", item))
        else:
            out.append((item[0], item[1]))
    return out


def random_lift_distribution(A: Structure, battery: Sequence) -> LiftDistribution:
    """Accepts a Battery or a plain list of formulas"""
    battery = _named(battery)
    if not battery:
        raise InputError("the battery is empty")
    columns = []
    for name, phi in battery:
        if arity(phi) < 1:
            raise InputError(f"formula '{name}' has no free variable")
        columns.append(local_pairings(A, phi))
    vectors = np.round(np.column_stack(columns), VALUE_DECIMALS)
    points, inverse = np.unique(vectors, axis=0, return_inverse=True)
    masses = np.bincount(inverse.reshape(-1), weights=A.weights, minlength=points.shape[0])
    return LiftDistribution([name for name, _ in battery], points, masses)


def box_metric(u: Sequence[float], v: Sequence[float]) -> float:
    """inf{ε > 0 : |u_i − v_i| ≤ ε for every i ≤ 1/ε}"""
    gaps = np.abs(np.asarray(u, dtype=float) - np.asarray(v, dtype=float))
    if gaps.size == 0:
        return 0.0
    running = np.maximum.accumulate(gaps)
    best = float(running[-1])
    for m in range(gaps.size):
        checked = float(running[m - 1]) if m else 0.0
        best = min(best, max(checked, 1.0 / (m + 1)))
    return best


def _box_masses(P: LiftDistribution, k: int, side: int) -> Dict[Tuple[int, ...], float]:
    cells = np.minimum(np.floor(P.points[:, :k] * side).astype(np.int64), side - 1)
    out: Dict[Tuple[int, ...], float] = {}
    for cell, mass in zip(map(tuple, cells), P.masses):
        out[cell] = out.get(cell, 0.0) + float(mass)
    return out


def box_distance(P: LiftDistribution, Q: LiftDistribution, resolution: Optional[int] = None) -> float:
    """Total variation between P and Q on the cube partition of side 1/b of the first b coordinates.

    b defaults to the battery size; at b the box metric of two points in the
    same cell is at most 1/b.
    """
    if P.names != Q.names:
        raise InputError("lift distributions over different batteries")
    side = P.dimension if resolution is None else int(resolution)
    if side < 1:
        raise InputError(f"box resolution must be positive, got {side}")
    k = min(side, P.dimension)
    left, right = _box_masses(P, k, side), _box_masses(Q, k, side)
    total = sum(abs(left.get(c, 0.0) - right.get(c, 0.0)) for c in set(left) | set(right))
    return 0.5 * total
