"""Estimate the limit spectrum of the ball-measure law from the tail window.

Candidate atoms are the complete-linkage groups of the empirical law at the
last index and the largest radius. A candidate survives when, at every
window index and every large radius of the schedule, the law puts the same
mass (within tol) near the same value (within atom_tol).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from src.sequences.sequence import StructureSequence, tail_window
from src.spectrum.distribution import EmpiricalCDF, moment_table
from src.spectrum.inversion import (
    atom_mass, characteristic_function, direct_characteristic_function, inversion_grid,
)
from src.structures.structure import ball_measure_table
from src.utils.errors import InputError
from src.utils.logger import get_logger
from src.utils.parallel import ordered_map

logger = get_logger(__name__)

GRID_RESOLUTION = 2.0 ** -24


@dataclass
class SpectrumAtom:
    value: float
    mass: float
    count: int
    residue: float
    support_low: float
    support_high: float
    unstable: bool = False
    mass_bound_ok: bool = True
    inversion_mass: Optional[float] = None

    @property
    def integrality(self) -> float:
        return self.mass / self.value

    def to_dict(self) -> Dict:
        return {
            'lambda': self.value, 'mass': self.mass, 'count': self.count, 'residue': self.residue,
            'support': [self.support_low, self.support_high], 'unstable': self.unstable,
            'mass_bound_ok': self.mass_bound_ok, 'inversion_mass': self.inversion_mass,
        }


@dataclass
class SpectrumReport:
    atoms: List[SpectrumAtom]
    residual_mass: float
    d_schedule: Tuple[int, ...]
    window: List[int]
    parameters: Dict
    cdfs: Dict[Tuple[int, int], EmpiricalCDF] = field(default_factory=dict, repr=False)
    characteristic: Dict = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def values(self) -> List[float]:
        return [a.value for a in self.atoms]

    @property
    def unstable(self) -> bool:
        return any(a.unstable for a in self.atoms)

    def observed_values(self) -> np.ndarray:
        if not self.cdfs:
            return np.zeros(0)
        return np.unique(np.concatenate([cdf.support for cdf in self.cdfs.values()]))

    def continuity_point(self, x: float, direction: int) -> float:
        return continuity_point(x, direction, self.observed_values())

    def to_dict(self) -> Dict:
        return {
            'atoms': [a.to_dict() for a in self.atoms],
            'residual_mass': self.residual_mass,
            'unstable_spectrum': self.unstable,
            'd_schedule': list(self.d_schedule),
            'window': list(self.window),
            'parameters': self.parameters,
            'characteristic': self.characteristic,
            'warnings': list(self.warnings),
        }


def continuity_point(x: float, direction: int, observed: np.ndarray) -> float:
    """Nearest dyadic grid point strictly beyond x (direction ±1) that is not an observed value"""
    step = GRID_RESOLUTION if direction > 0 else -GRID_RESOLUTION
    point = np.floor(x / GRID_RESOLUTION) * GRID_RESOLUTION
    if direction > 0 or point >= x:
        point += step
    while np.any(np.abs(observed - point) < 1e-12):
        point += step
    return float(point)


def group_support(cdf: EmpiricalCDF, radius: float) -> List[Tuple[float, float, float, float]]:
    """Complete-linkage groups of the support: (mean, mass, low, high)"""
    groups = []
    start = 0
    support, masses = cdf.support, cdf.masses
    for i in range(1, support.size + 1):
        if i == support.size or support[i] - support[start] > radius:
            values, weights = support[start:i], masses[start:i]
            mass = float(weights.sum())
            mean = float(values @ weights / mass) if mass > 0 else float(values.mean())
            groups.append((mean, mass, float(values[0]), float(values[-1])))
            start = i
    return groups


def _near(cdf: EmpiricalCDF, centre: float, radius: float) -> Tuple[float, float, float, float]:
    """Mass, mean, lowest and highest support value within radius of centre"""
    near = np.abs(cdf.support - centre) <= radius
    mass = float(cdf.masses[near].sum())
    if not near.any() or mass <= 0:
        return 0.0, centre, centre, centre
    values = cdf.support[near]
    return mass, float(values @ cdf.masses[near] / mass), float(values.min()), float(values.max())


def stable_radii(d_schedule: Sequence[int]) -> List[int]:
    """Upper half of the d-schedule, where D_d is taken as settled"""
    d_schedule = list(d_schedule)
    return d_schedule[len(d_schedule) // 2:]


def collect_cdfs(S: StructureSequence, indices: Sequence[int], radii: Sequence[int],
                 workers: Optional[int] = None) -> Dict[Tuple[int, int], EmpiricalCDF]:
    dmax = max(radii)

    def laws(n):
        A = S[n]
        table = ball_measure_table(A, dmax)
        return {(n, d): EmpiricalCDF(table[:, d], A.weights) for d in radii}
    out: Dict[Tuple[int, int], EmpiricalCDF] = {}
    for part in ordered_map(laws, list(indices), Config.PARALLELISM if workers is None else workers):
        out.update(part)
    return out


def detect_spectrum(S: StructureSequence, d_schedule: Optional[Sequence[int]] = None,
                    window_fraction: Optional[float] = None, tol: Optional[float] = None,
                    atom_tol: Optional[float] = None, lambda_min: Optional[float] = None,
                    unstable_residue: Optional[float] = None,
                    inversion_T: Optional[float] = None, inversion_points: Optional[int] = None,
                    moment_W: Optional[int] = None, moment_T: Optional[float] = None,
                    workers: Optional[int] = None) -> SpectrumReport:
    d_schedule = tuple(Config.D_SCHEDULE if d_schedule is None else d_schedule)
    tol = Config.TOL if tol is None else tol
    atom_tol = Config.ATOM_TOL if atom_tol is None else atom_tol
    lambda_min = Config.LAMBDA_MIN if lambda_min is None else lambda_min
    unstable_residue = Config.UNSTABLE_RESIDUE if unstable_residue is None else unstable_residue
    inversion_T = Config.INVERSION_T if inversion_T is None else inversion_T
    moment_W = Config.MOMENT_W if moment_W is None else moment_W
    moment_T = Config.MOMENT_T if moment_T is None else moment_T
    if not d_schedule or any(d < 0 for d in d_schedule):
        raise InputError(f"bad d-schedule {d_schedule}")

    window = tail_window(S.indices, window_fraction)
    if len(window) < 2:
        logger.warning("⚠️ spectrum window holds a single index; stability in n is not tested")
    parameters = {'tol': tol, 'atom_tol': atom_tol, 'lambda_min': lambda_min,
                  'unstable_residue': unstable_residue, 'inversion_t': inversion_T,
                  'moment_w': moment_W, 'moment_t': moment_T, 'window': list(window)}
    report = SpectrumReport([], 1.0, d_schedule, window, parameters)
    report.cdfs = collect_cdfs(S, window, d_schedule, workers)

    last, dmax = window[-1], max(d_schedule)
    radii = stable_radii(d_schedule)
    base = report.cdfs[(last, dmax)]
    logger.info(f"📊 {base.support.size} distinct ball measures at n={last}, d={dmax}")

    atoms: List[SpectrumAtom] = []
    for mean, mass, _, _ in group_support(base, atom_tol):
        if mean < lambda_min:
            continue
        masses, means, lows, highs = [], [], [], []
        for n in window:
            for d in radii:
                m, v, lo, hi = _near(report.cdfs[(n, d)], mean, atom_tol)
                masses.append(m)
                means.append(v)
                lows.append(lo)
                highs.append(hi)
        masses = np.array(masses)
        if np.any(masses <= 0) or np.any(np.abs(masses - mass) > tol):
            logger.info(f"🔄 candidate {mean:.4f} moves with n or d; left to the residual mass")
            continue
        value = float(np.mean(means))
        p = float(masses.mean())
        count = int(round(p / value))
        residue = abs(p / value - count)
        atom = SpectrumAtom(value, p, count, residue, float(min(lows)), float(max(highs)))
        atom.unstable = residue > unstable_residue or count == 0
        atom.mass_bound_ok = p >= value - tol
        if atom.unstable:
            report.warnings.append(f"unstable spectrum: p/λ = {p / value:.4f} at λ = {value:.4f}")
        if not atom.mass_bound_ok:
            report.warnings.append(f"atom {value:.4f} carries mass {p:.4f} below its value")
        atoms.append(atom)

    atoms = _merge_close(atoms, atom_tol)
    atoms.sort(key=lambda a: -a.value)

    # inversion cross-check on the last law at the largest radius
    gamma = direct_characteristic_function(base, inversion_grid(inversion_T, inversion_points))
    support_max = float(base.support.max())
    for atom in atoms:
        inside = base.support[(base.support >= atom.support_low - 1e-12) & (base.support <= atom.support_high + 1e-12)]
        atom.inversion_mass = float(sum(atom_mass(gamma, float(x), inversion_T, support_max).mass for x in inside))

    moments = moment_table(S[last], dmax, moment_W)
    t = np.linspace(-moment_T, moment_T, 401)
    series = characteristic_function(moments, t)
    direct = direct_characteristic_function(base, t)
    report.characteristic = {
        'index': last, 'd': dmax, 'moment_w': moment_W, 'moment_t': moment_T,
        'truncation_bound': series.truncation_bound, 'warning': series.warning,
        'max_deviation': float(np.abs(series.values - direct.values).max()),
    }

    report.atoms = atoms
    report.residual_mass = float(1.0 - sum(a.count * a.value for a in atoms))
    for atom in atoms:
        logger.info(f"✅ atom λ={atom.value:.4f} p={atom.mass:.4f} N={atom.count} residue={atom.residue:.3f}")
    logger.info(f"📊 residual mass λ₀ = {report.residual_mass:.4f}")
    return report


def _merge_close(atoms: List[SpectrumAtom], radius: float) -> List[SpectrumAtom]:
    atoms = sorted(atoms, key=lambda a: a.value)
    merged: List[SpectrumAtom] = []
    for atom in atoms:
        if merged and atom.value - merged[-1].value <= radius:
            prev = merged[-1]
            mass = prev.mass + atom.mass
            value = (prev.value * prev.mass + atom.value * atom.mass) / mass
            count = int(round(mass / value))
            merged[-1] = SpectrumAtom(value, mass, count, abs(mass / value - count),
                                      min(prev.support_low, atom.support_low),
                                      max(prev.support_high, atom.support_high),
                                      prev.unstable or atom.unstable, mass >= value - radius)
            logger.warning(f"⚠️ atoms {prev.value:.4f} and {atom.value:.4f} merged")
        else:
            merged.append(atom)
    return merged
