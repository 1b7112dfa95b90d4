"""Ball-measure distributions D_d(v) = ν(ball^d(v)) and their moments."""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from src.logic.formula import TRUE, DistLe, Formula, conj, var
from src.structures.structure import Structure, ball_measure_table
from src.utils.errors import InputError

# ball measures equal up to this many decimals are the same value
VALUE_DECIMALS = 12
MAX_MOMENT = 64


class EmpiricalCDF:
    """Right-continuous step function of a finite weighted sample"""

    def __init__(self, values, weights):
        values = np.round(np.asarray(values, dtype=float), VALUE_DECIMALS)
        weights = np.asarray(weights, dtype=float)
        if values.shape != weights.shape:
            raise InputError("values and weights must have the same length")
        support, inverse = np.unique(values, return_inverse=True)
        self.support = support
        self.masses = np.bincount(inverse, weights=weights, minlength=support.size)
        self.cumulative = np.cumsum(self.masses)

    def __call__(self, t):
        """F̂(t): total weight of values ≤ t"""
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.support, t, side='right')
        out = np.where(pos > 0, self.cumulative[np.maximum(pos - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def mass_at(self, x: float, radius: float = 0.0) -> float:
        """Weight of values within radius of x"""
        near = np.abs(self.support - x) <= radius + 10 ** -VALUE_DECIMALS
        return float(self.masses[near].sum())

    def atoms(self) -> List[Tuple[float, float]]:
        return [(float(v), float(m)) for v, m in zip(self.support, self.masses)]

    def mean(self) -> float:
        return float(self.support @ self.masses)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': self.support, 'F': self.cumulative})

    def __eq__(self, other) -> bool:
        return (isinstance(other, EmpiricalCDF) and np.array_equal(self.support, other.support)
                and np.allclose(self.masses, other.masses, rtol=0, atol=1e-12))


def ball_measures(A: Structure, d: int) -> np.ndarray:
    """D_d(v) for every vertex v"""
    if d < 0:
        raise InputError(f"radius must be non-negative, got {d}")
    return ball_measure_table(A, d)[:, d]


def ball_measure_distribution(A: Structure, d: int) -> EmpiricalCDF:
    """Law of D_d(v) for v drawn with weight ν"""
    return EmpiricalCDF(ball_measures(A, d), A.weights)


def psi_formula(d: int, w: int) -> Formula:
    """ψ_{d,w}(x1..x_{w+1}) = ⋀ dist(x1, x_i) ≤ d"""
    if w == 0:
        return TRUE
    return conj(*[DistLe(var(1), var(i), d) for i in range(2, w + 2)])


@dataclass
class MomentTable:
    d: int
    moments: np.ndarray
    support_max: float = 1.0

    @property
    def W(self) -> int:
        return self.moments.size - 1

    def to_dict(self) -> Dict:
        return {'d': self.d, 'moments': [float(m) for m in self.moments], 'support_max': self.support_max}


def moment_table(A: Structure, d: int, W: int) -> MomentTable:
    """m_w = Σ_v ν(v) D_d(v)^w for w = 0..W"""
    if not 0 <= W <= MAX_MOMENT:
        raise InputError(f"moment order must lie in 0..{MAX_MOMENT}, got {W}")
    values = ball_measures(A, d)
    powers = values[None, :] ** np.arange(W + 1)[:, None]
    moments = powers @ A.weights
    moments[0] = 1.0
    return MomentTable(d, np.clip(moments, 0.0, 1.0), float(values.max()))


def moment_table_from_cdf(cdf: EmpiricalCDF, d: int, W: int) -> MomentTable:
    if not 0 <= W <= MAX_MOMENT:
        raise InputError(f"moment order must lie in 0..{MAX_MOMENT}, got {W}")
    moments = (cdf.support[None, :] ** np.arange(W + 1)[:, None]) @ cdf.masses
    moments[0] = 1.0
    return MomentTable(d, np.clip(moments, 0.0, 1.0), float(np.abs(cdf.support).max()))


def interval_sandwich(A: Structure, d1: int, d2: int, t1: float, t2: float) -> Dict:
    """F_{d2}(t2) − F_{d1}(t1) ≤ Pr(t1 < D_{d1} ≤ D_{d2} ≤ t2) ≤ F_{d1}(t2) − F_{d1}(t1)"""
    if not d1 < d2:
        raise InputError(f"need d1 < d2, got {d1}, {d2}")
    if not t1 < t2:
        raise InputError(f"need t1 < t2, got {t1}, {t2}")
    table = ball_measure_table(A, d2)
    D1 = np.round(table[:, d1], VALUE_DECIMALS)
    D2 = np.round(table[:, d2], VALUE_DECIMALS)
    F1 = EmpiricalCDF(D1, A.weights)
    F2 = EmpiricalCDF(D2, A.weights)
    middle = float(A.weights[(D1 > t1) & (D1 <= D2) & (D2 <= t2)].sum())
    lower = F2(t2) - F1(t1)
    upper = F1(t2) - F1(t1)
    slack = 1e-12
    return {'lower': lower, 'middle': middle, 'upper': upper,
            'holds': bool(lower <= middle + slack and middle <= upper + slack)}
