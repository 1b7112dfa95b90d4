from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import Config
from src.sequences.expansion import expansion_check
from src.sequences.sequence import StructureSequence, SubsetSequence, tail_window
from src.structures.structure import ball_measure_table, induce, measure
from src.utils.logger import get_logger
from src.utils.parallel import ordered_map

logger = get_logger(__name__)

LABELS = ('globular', 'open', 'residual', 'inconclusive')


def dispersion_row(A, X, dmax: int) -> np.ndarray:
    """max over v ∈ X of ν_{A[X]}(ball^d(v)) for d = 0..dmax"""
    if measure(A, X) <= 0:
        return np.full(dmax + 1, np.nan)
    B = induce(A, X)
    return ball_measure_table(B, dmax).max(axis=0)


def dispersion_profile(S: StructureSequence, X: SubsetSequence, dmax: Optional[int] = None,
                       workers: Optional[int] = None) -> pd.DataFrame:
    dmax = Config.RADIUS_CAP if dmax is None else dmax
    X.check_aligned(S)
    rows = S.map(lambda n, A: dispersion_row(A, X[n], dmax), workers)
    return pd.DataFrame(np.vstack(rows), index=pd.Index(S.indices, name='n'),
                        columns=pd.Index(range(dmax + 1), name='d'))


def saturating_radius(profile: pd.DataFrame, epsilon: float) -> pd.Series:
    """Smallest d with max ball measure ≥ 1−ε, per index (NaN when none)"""
    hits = profile.to_numpy() >= 1 - epsilon
    first = np.where(hits.any(axis=1), hits.argmax(axis=1), -1)
    return pd.Series([int(d) if d >= 0 else np.nan for d in first], index=profile.index, dtype=float)


@dataclass
class Classification:
    label: str
    reason: str
    profile: pd.DataFrame
    saturating: pd.Series
    h_out: Dict[int, float] = field(default_factory=dict)
    epsilon: float = 0.0

    def to_dict(self) -> Dict:
        return {
            'label': self.label,
            'reason': self.reason,
            'epsilon': self.epsilon,
            'saturating_radius': {str(n): (None if np.isnan(d) else int(d)) for n, d in self.saturating.items()},
            'h_out': {str(n): (None if np.isinf(v) else v) for n, v in self.h_out.items()},
        }


def _globular(saturating: pd.Series, indices: List[int]):
    settled = indices[len(indices) // 4:]
    values = saturating.loc[settled]
    if values.isna().any():
        return False, "some index has no radius covering 1−ε of the cluster"
    if values.nunique() != 1:
        return False, f"saturating radius varies: {sorted(set(int(v) for v in values))}"
    return True, f"radius {int(values.iloc[0])} covers 1−ε of the cluster from index {settled[0]} on"


def column_limit(indices: Sequence[int], values: np.ndarray, epsilon: float) -> float:
    """Limit of one ball column, fitted as a + b/n over its unsaturated window rows"""
    x = 1.0 / np.asarray(indices, dtype=float)
    keep = values < 1 - epsilon
    if keep.sum() < 2:
        return float(values[-1])
    slope, intercept = np.polyfit(x[keep], values[keep], 1)
    return float(intercept)


def _residual(profile: pd.DataFrame, window: List[int], epsilon: float):
    """Every column d ≤ dmax is at most ε at the end of the window, or extrapolates there"""
    tail = profile.loc[window]
    if tail.isna().any().any():
        return False, "cluster is empty at some window index"
    values = tail.to_numpy()
    for d in range(values.shape[1]):
        column = values[:, d]
        if column[-1] <= epsilon:
            continue
        if len(window) == 1:
            return False, f"ball column d={d} ends at {column[-1]:.4g} > ε"
        limit = column_limit(window, column, epsilon)
        if limit > epsilon:
            return False, f"ball column d={d} tends to {limit:.4g} > ε over the window"
    return True, "every ball column vanishes over the window"


def classify(S: StructureSequence, X: SubsetSequence, dmax: Optional[int] = None,
             epsilon: Optional[float] = None, window_fraction: Optional[float] = None,
             expansion_threshold: Optional[float] = None,
             workers: Optional[int] = None) -> Classification:
    """Label a cluster globular, open, residual or inconclusive (checked in that order)"""
    epsilon = Config.TOL if epsilon is None else epsilon
    threshold = Config.EXPANSION_THRESHOLD if expansion_threshold is None else expansion_threshold
    profile = dispersion_profile(S, X, dmax, workers)
    saturating = saturating_radius(profile, epsilon)
    window = tail_window(S.indices, window_fraction)
    result = Classification('inconclusive', '', profile, saturating, epsilon=epsilon)

    ok, reason = _globular(saturating, S.indices)
    if ok:
        result.label, result.reason = 'globular', reason
        return result

    def h_out(n, A):
        if measure(A, X[n]) <= 0:
            return 0.0
        return float(expansion_check(induce(A, X[n]), 1, epsilon).h_out)
    values = ordered_map(lambda n: h_out(n, S[n]), window, Config.PARALLELISM if workers is None else workers)
    result.h_out = {n: v for n, v in zip(window, values)}
    if min(values) >= threshold:
        result.label = 'open'
        result.reason = f"h_out stays ≥ {threshold} over the window while the saturating radius moves ({reason})"
        return result

    ok, residual_reason = _residual(profile, window, epsilon)
    if ok:
        result.label, result.reason = 'residual', residual_reason
        return result
    result.reason = f"{reason}; {residual_reason}; window h_out min {min(values):.4g}"
    logger.info(f"⚠️ cluster '{X.name}' is inconclusive: {result.reason}")
    return result
