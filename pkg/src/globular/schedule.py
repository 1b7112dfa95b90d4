"""Per-atom level schedule for the globular construction.

Level z of atom λ carries a bracket α_z < λ < β_z narrower than ε_z = 2^-z,
a radius δ_z from which the ball-measure law is settled at the bracket, and
an index η_z from which every later index agrees with the tail at the radii
k·δ_z, k = 1..8.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from src.sequences.sequence import StructureSequence, tail_window
from src.spectrum.detection import SpectrumAtom, SpectrumReport, continuity_point
from src.spectrum.distribution import VALUE_DECIMALS
from src.structures.structure import ball_measure_table
from src.utils.errors import InputError
from src.utils.logger import get_logger

logger = get_logger(__name__)

RADIUS_FACTORS = range(1, 9)
BRACKET_SHARE = 0.4


def first_level(value: float) -> int:
    """z₀(λ) = ⌈5 − 2·log₂ λ⌉"""
    if not 0 < value <= 1:
        raise InputError(f"atom value must lie in (0, 1], got {value}")
    return math.ceil(5 - 2 * math.log2(value))


@dataclass
class Level:
    z: int
    alpha: float
    beta: float
    delta: int
    eta: int

    @property
    def epsilon(self) -> float:
        return 2.0 ** -self.z

    def to_dict(self) -> Dict:
        return {'z': self.z, 'epsilon': self.epsilon, 'alpha': self.alpha, 'beta': self.beta,
                'delta': self.delta, 'eta': self.eta}


@dataclass
class AtomSchedule:
    value: float
    mass: float
    count: int
    z0: int
    levels: List[Level] = field(default_factory=list)
    shift: int = 0

    @property
    def start(self) -> int:
        """First scheduled level, z₀ lowered by the finite-scale shift"""
        return self.z0 - self.shift

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level(self, z: int) -> Level:
        for level in self.levels:
            if level.z == z:
                return level
        raise InputError(f"atom {self.value:.4f} has no scheduled level z={z}")

    def active(self, n: int) -> Optional[Level]:
        """Deepest level with η_z ≤ n"""
        current = None
        for level in self.levels:
            if level.eta <= n:
                current = level
        return current

    def to_dict(self) -> Dict:
        return {'lambda': self.value, 'mass': self.mass, 'count': self.count, 'z0': self.z0,
                'shift': self.shift, 'levels': [level.to_dict() for level in self.levels]}


@dataclass
class Schedule:
    atoms: List[AtomSchedule]
    window: List[int]
    reference_radius: int
    table_radius: int
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {'atoms': [a.to_dict() for a in self.atoms], 'window': list(self.window),
                'reference_radius': self.reference_radius, 'table_radius': self.table_radius,
                'warnings': list(self.warnings)}


class _Laws:
    """Ball-measure tables of every index, read as CDFs at chosen points"""

    def __init__(self, S: StructureSequence, dmax: int, workers: int):
        self.indices = list(S.indices)
        self.weights = {n: S[n].weights for n in self.indices}
        tables = S.map(lambda n, A: ball_measure_table(A, dmax), workers)
        self.tables = dict(zip(self.indices, tables))

    def cdf(self, n: int, d: int, x: float) -> float:
        return float(self.weights[n][self.tables[n][:, d] <= x].sum())

    def near(self, indices: Sequence[int], radii: Sequence[int], value: float, radius: float):
        """Lowest and highest D_d(v) within radius of value, or None when nothing is near"""
        lows, highs = [], []
        for n in indices:
            values = np.round(self.tables[n][:, list(radii)], VALUE_DECIMALS)
            near = values[np.abs(values - value) <= radius]
            if near.size:
                lows.append(near.min())
                highs.append(near.max())
        if not lows:
            return None
        return float(min(lows)), float(max(highs))

    def observed(self, indices: Sequence[int]) -> np.ndarray:
        return np.unique(np.round(np.concatenate([self.tables[n].ravel() for n in indices]), VALUE_DECIMALS))


def _settled(laws: _Laws, window, delta, reference, points, epsilon) -> bool:
    return all(abs(laws.cdf(n, delta, x) - laws.cdf(n, reference, x)) < epsilon
               for n in window for x in points)


def _threshold(laws: _Laws, window, delta, points, epsilon) -> Optional[int]:
    """Smallest index from which all later indices sit within ε of the tail mean at k·δ"""
    reference = {(k, x): np.mean([laws.cdf(n, k * delta, x) for n in window])
                 for k in RADIUS_FACTORS for x in points}

    def agrees(n):
        return all(abs(laws.cdf(n, k * delta, x) - reference[(k, x)]) < epsilon
                   for k in RADIUS_FACTORS for x in points)

    eta = None
    for n in reversed(laws.indices):
        if not agrees(n):
            break
        eta = n
    return eta


def _find_level(z: int, lam: float, others: List[float], laws: _Laws, window: List[int],
                observed: np.ndarray, reference: int, dmax: int, atom_tol: float,
                previous: Tuple[float, float, int, int]) -> Optional[Level]:
    epsilon = 2.0 ** -z
    alpha_prev, beta_prev, delta_prev, eta_prev = previous
    for delta in range(delta_prev, dmax // 8 + 1):
        support = laws.near(window, [k * delta for k in RADIUS_FACTORS], lam, atom_tol)
        if support is None:
            continue
        lo, hi = support
        alpha = max(continuity_point(min(lam - BRACKET_SHARE * epsilon, lo), -1, observed), alpha_prev)
        beta = min(continuity_point(max(lam + BRACKET_SHARE * epsilon, hi), 1, observed), beta_prev)
        if not (alpha < lo and hi < beta and beta - alpha < epsilon):
            continue
        if any(alpha <= other <= beta for other in others):
            continue
        if not _settled(laws, window, delta, reference, (alpha, beta), epsilon):
            continue
        eta = _threshold(laws, window, delta, (alpha, beta), epsilon)
        if eta is None:
            continue
        return Level(z, alpha, beta, delta, max(eta, eta_prev))
    return None


def _schedule_atom(atom: SpectrumAtom, others: List[float], laws: _Laws, window: List[int],
                   observed: np.ndarray, depth: int, reference: int, dmax: int,
                   atom_tol: float, warnings: List[str]) -> AtomSchedule:
    schedule = AtomSchedule(atom.value, atom.mass, atom.count, first_level(atom.value))
    lam = atom.value

    def search(z, previous):
        return _find_level(z, lam, others, laws, window, observed, reference, dmax, atom_tol, previous)

    previous = (-np.inf, np.inf, 1, laws.indices[0])
    # at finite n the tail spread of D around λ can exceed ε_{z₀}; start at the first level that covers it
    z = schedule.z0
    level = search(z, previous)
    while level is None and z > 1:
        z -= 1
        level = search(z, previous)
    if level is None:
        message = f"atom {lam:.4f}: no feasible level at any z ≤ {schedule.z0}; left unmarked"
        warnings.append(message)
        logger.warning(f"⚠️ {message}")
        return schedule
    schedule.shift = schedule.z0 - z
    if schedule.shift:
        message = f"atom {lam:.4f}: tail spread needs ε = 2^-{z}; levels start {schedule.shift} below z₀={schedule.z0}"
        warnings.append(message)
        logger.warning(f"⚠️ {message}")

    while level is not None:
        logger.info(f"📊 λ={lam:.4f} z={level.z}: α={level.alpha:.6f} β={level.beta:.6f} "
                    f"δ={level.delta} η={level.eta}")
        schedule.levels.append(level)
        if schedule.depth >= depth:
            break
        level = search(level.z + 1, (level.alpha, level.beta, level.delta, level.eta))
        if level is None:
            message = f"atom {lam:.4f}: no feasible level z={schedule.levels[-1].z + 1}; schedule depth {schedule.depth}"
            warnings.append(message)
            logger.warning(f"⚠️ {message}")
    return schedule


def build_schedule(report: SpectrumReport, S: StructureSequence, depth: Optional[int] = None,
                   radius_cap: Optional[int] = None, window_fraction: Optional[float] = None,
                   atom_tol: Optional[float] = None, workers: Optional[int] = None) -> Schedule:
    depth = Config.SCHEDULE_DEPTH if depth is None else depth
    radius_cap = Config.RADIUS_CAP if radius_cap is None else radius_cap
    atom_tol = Config.ATOM_TOL if atom_tol is None else atom_tol
    workers = Config.PARALLELISM if workers is None else workers
    reference = max(report.d_schedule)
    dmax = min(radius_cap, 8 * reference)
    if dmax < 8:
        raise InputError(f"radius cap {radius_cap} is below 8, the smallest radius a level needs")
    reference = min(reference, dmax)

    window = tail_window(S.indices, window_fraction)
    schedule = Schedule([], window, reference, dmax)
    if not report.atoms:
        logger.info("📊 no atoms: every vertex stays residual")
        return schedule
    laws = _Laws(S, dmax, workers)
    observed = laws.observed(window)
    for atom in report.atoms:
        others = [a.value for a in report.atoms if a is not atom]
        schedule.atoms.append(_schedule_atom(atom, others, laws, window, observed, depth,
                                             reference, dmax, atom_tol, schedule.warnings))
    feasible = sum(1 for a in schedule.atoms if a.depth)
    logger.info(f"✅ schedule built for {feasible}/{len(schedule.atoms)} atoms")
    return schedule
