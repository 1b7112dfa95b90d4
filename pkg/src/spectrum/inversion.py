"""Characteristic functions of the ball-measure law and Lévy inversion of atoms.

The moment path sums Σ_{w≤W} m_w (it)^w / w!; the direct path sums
Σ_v ν(v) e^{itD(v)}. Atom masses come from the inversion integral
(1/2T) ∫_{−T}^{T} e^{−ita} γ(t) dt on a uniform grid, trapezoid rule.
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from config import Config
from src.spectrum.distribution import EmpiricalCDF, MomentTable
from src.utils.errors import InputError
from src.utils.logger import get_logger

logger = get_logger(__name__)

GRID_SLACK = 1e-9


def inversion_grid(T: Optional[float] = None, points: Optional[int] = None) -> np.ndarray:
    T = Config.INVERSION_T if T is None else T
    points = Config.INVERSION_GRID if points is None else points
    if T <= 0 or points < 2:
        raise InputError(f"inversion grid needs T > 0 and at least 2 points, got T={T}, points={points}")
    return np.linspace(-T, T, points)


@dataclass
class CharacteristicValues:
    t: np.ndarray
    values: np.ndarray
    truncation_bound: float = 0.0
    warning: bool = False

    def to_dict(self) -> Dict:
        return {'truncation_bound': self.truncation_bound, 'warning': self.warning, 'points': int(self.t.size)}


def truncation_bound(T: float, W: int, support_max: float = 1.0) -> float:
    """Remainder bound (T·s)^{W+1}/(W+1)! of the moment series for |t| ≤ T"""
    x = abs(T) * abs(support_max)
    if x == 0:
        return 0.0
    return math.exp((W + 1) * math.log(x) - math.lgamma(W + 2))


def characteristic_function(m: MomentTable, t, tolerance: Optional[float] = None) -> CharacteristicValues:
    """γ̂(t) = Σ_{w ≤ W} m_w (it)^w / w!, with its truncation bound and warning flag"""
    tolerance = Config.TOL if tolerance is None else tolerance
    t = np.atleast_1d(np.asarray(t, dtype=float))
    term = np.ones(t.shape, dtype=complex)
    total = m.moments[0] * term
    for w in range(1, m.W + 1):
        term = term * (1j * t) / w
        total = total + m.moments[w] * term
    bound = truncation_bound(float(np.abs(t).max()) if t.size else 0.0, m.W, m.support_max)
    warning = bound > tolerance
    if warning:
        logger.warning(f"⚠️ moment series truncation bound {bound:.3g} exceeds {tolerance} "
                       f"(|t| ≤ {np.abs(t).max():.4g}, W = {m.W})")
    return CharacteristicValues(t, total, bound, warning)


def direct_characteristic_function(cdf: EmpiricalCDF, t) -> CharacteristicValues:
    """γ(t) = Σ_x p(x) e^{itx} over the support of the law"""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    values = np.exp(1j * np.outer(t, cdf.support)) @ cdf.masses
    return CharacteristicValues(t, values)


def mixture_characteristic_function(support: Sequence[float], masses: Sequence[float], t) -> CharacteristicValues:
    return direct_characteristic_function(_mixture(support, masses), t)


def _mixture(support: Sequence[float], masses: Sequence[float]) -> EmpiricalCDF:
    return EmpiricalCDF(np.asarray(support, dtype=float), np.asarray(masses, dtype=float))


@dataclass
class AtomMass:
    a: float
    T: float
    mass: float
    imaginary: float

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def atom_mass(gamma: CharacteristicValues, a: float, T: Optional[float] = None,
              support_max: float = 1.0) -> AtomMass:
    """p̂(a) = Re (1/2T) ∫_{−T}^{T} e^{−ita} γ(t) dt by the trapezoid rule"""
    t = gamma.t
    T = float(t.max()) if T is None else float(T)
    if t.size < 2:
        raise InputError("inversion needs at least two grid points")
    steps = np.diff(t)
    step = float(steps.mean())
    if np.any(np.abs(steps - step) > GRID_SLACK * max(1.0, abs(step))):
        raise InputError("inversion grid is not uniform")
    if t[0] > -T + GRID_SLACK * T or t[-1] < T - GRID_SLACK * T:
        raise InputError(f"inversion grid does not cover [−{T}, {T}]")
    limit = math.pi / (4 * max(abs(support_max), abs(a), 1e-12))
    if step > limit:
        raise InputError(f"inversion grid step {step:.4g} is coarser than π/(4·max|support|) = {limit:.4g}")
    inside = (t >= -T - GRID_SLACK * T) & (t <= T + GRID_SLACK * T)
    value = trapezoid(np.exp(-1j * t[inside] * a) * gamma.values[inside], t[inside]) / (2 * T)
    return AtomMass(float(a), T, float(value.real), float(value.imag))


def inversion_constant(support: Sequence[float], masses: Sequence[float],
                       T_values: Sequence[float] = (50, 100, 200, 400, 800, 1600),
                       points: Optional[int] = None) -> Dict:
    """Measured C in |atom_mass − mass| ≤ C/T for a pure-atom law"""
    cdf = _mixture(support, masses)
    support_max = float(np.abs(cdf.support).max())
    rows: List[Dict] = []
    worst = 0.0
    for T in T_values:
        gamma = direct_characteristic_function(cdf, inversion_grid(T, points))
        for x, p in zip(cdf.support, cdf.masses):
            estimate = atom_mass(gamma, float(x), T, support_max)
            error = abs(estimate.mass - p)
            worst = max(worst, error * T)
            rows.append({'T': float(T), 'atom': float(x), 'mass': float(p),
                         'estimate': estimate.mass, 'error': error})
    return {'C': worst, 'rows': rows}
