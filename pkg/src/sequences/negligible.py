"""Negligible sets and sequences.

A set X is (d,ε)-negligible in A when ν(ball^d(X)) < ε. A subset sequence is
negligible at scale when, for every radius up to dmax, the supremum of
ν(ball^d(X_n)) over the tail window stays below the tolerance.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import Config
from src.logic.evaluator import stone_pairing
from src.logic.formula import Formula, arity, radius, strong_radius
from src.sequences.sequence import StructureSequence, SubsetSequence
from src.structures.structure import (
    Structure, VertexLike, as_mask, induce, measure, remove,
)
from src.utils.errors import InputError
from src.utils.logger import get_logger

logger = get_logger(__name__)


def ball_profile(A: Structure, X: VertexLike, dmax: int) -> np.ndarray:
    """ν(ball^d(X)) for d = 0..dmax in one breadth-first pass"""
    if dmax < 0:
        raise InputError(f"dmax must be non-negative, got {dmax}")
    mask = as_mask(A, X).copy()
    out = np.empty(dmax + 1)
    total = float(A.weights[mask].sum())
    out[0] = total
    frontier = mask.copy()
    for d in range(1, dmax + 1):
        if frontier.any():
            reached = (A.adjacency @ frontier.astype(np.int32)) > 0
            frontier = reached & ~mask
            mask |= frontier
            total += float(A.weights[frontier].sum())
        out[d] = total
    return np.minimum(out, 1.0)


@dataclass
class NegligibleProfile:
    table: pd.DataFrame
    window: List[int]
    tol: float
    tail_sup: pd.Series = field(init=False)
    negligible: bool = field(init=False)

    def __post_init__(self):
        self.tail_sup = self.table.loc[self.window].max()
        self.negligible = bool((self.tail_sup < self.tol).all())

    @property
    def verdict(self) -> str:
        return 'negligible-at-scale' if self.negligible else 'not-negligible'

    def to_dict(self) -> Dict:
        return {
            'verdict': self.verdict,
            'tol': self.tol,
            'window': list(self.window),
            'tail_sup': {str(d): float(v) for d, v in self.tail_sup.items()},
            'table': {str(n): [float(v) for v in row] for n, row in self.table.iterrows()},
        }


def negligible_profile(S: StructureSequence, X: SubsetSequence, dmax: Optional[int] = None,
                       tol: Optional[float] = None, window_fraction: Optional[float] = None,
                       workers: Optional[int] = None) -> NegligibleProfile:
    """Table of ν(ball^d(X_n)) over (n, d) with its tail verdict"""
    dmax = Config.PROFILE_DMAX if dmax is None else dmax
    tol = Config.TOL if tol is None else tol
    X.check_aligned(S)
    rows = S.map(lambda n, A: ball_profile(A, X[n], dmax), workers)
    table = pd.DataFrame(np.vstack(rows), index=pd.Index(S.indices, name='n'),
                         columns=pd.Index(range(dmax + 1), name='d'))
    profile = NegligibleProfile(table, S.window(window_fraction), tol)
    logger.debug(f"📊 profile of '{X.name}': {profile.verdict}")
    return profile


def equivalent(S: StructureSequence, X: SubsetSequence, Y: SubsetSequence,
               dmax: Optional[int] = None, tol: Optional[float] = None,
               window_fraction: Optional[float] = None) -> NegligibleProfile:
    """𝗫 ≈ 𝗬: the symmetric difference is negligible at scale"""
    return negligible_profile(S, X ^ Y, dmax, tol, window_fraction)


def is_included(S: StructureSequence, X: SubsetSequence, Y: SubsetSequence,
                dmax: Optional[int] = None, tol: Optional[float] = None,
                window_fraction: Optional[float] = None) -> NegligibleProfile:
    """𝗫 ≼ 𝗬: X_n ∖ Y_n is negligible at scale"""
    return negligible_profile(S, X - Y, dmax, tol, window_fraction)


@dataclass
class NegligibleBoundReport:
    precondition: bool
    reason: str
    d: int
    epsilon: float
    radius: int
    p: int
    ball_measure: float
    difference: Optional[float] = None
    bound: Optional[float] = None
    holds: Optional[bool] = None
    fragmentation: Optional[Dict] = None

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def check_negligible_bound(A: Structure, X: VertexLike, phi: Formula, d: int, epsilon: float,
                           fragmentation: Optional[Sequence[VertexLike]] = None) -> NegligibleBoundReport:
    """Compare ⟨φ,A⟩ with ⟨φ,A−X⟩ against the 2pε bound for a (d,ε)-negligible X"""
    if not 0 < epsilon < 1:
        raise InputError(f"epsilon must lie in (0, 1), got {epsilon}")
    mask = as_mask(A, X)
    p = arity(phi)
    r = radius(phi)
    ball_mass = float(ball_profile(A, mask, d)[-1])
    report = NegligibleBoundReport(True, '', d, epsilon, r, p, ball_mass)

    if ball_mass >= epsilon:
        report.precondition = False
        report.reason = f"X is not ({d},{epsilon})-negligible: ν(ball^{d}(X)) = {ball_mass:.6g}"
    elif r >= d:
        report.precondition = False
        report.reason = f"formula radius {r} is not below d = {d}"
    if not report.precondition:
        logger.info(f"⚠️ bound not asserted: {report.reason}")
    else:
        rest = A if not mask.any() else remove(A, mask)
        report.difference = abs(stone_pairing(A, phi) - stone_pairing(rest, phi))
        report.bound = 2 * p * epsilon
        report.holds = bool(report.difference < report.bound) if p > 0 else report.difference == 0

    if fragmentation is not None:
        report.fragmentation = check_fragmentation(A, fragmentation, phi, d, epsilon)
    return report


def check_fragmentation(A: Structure, parts: Sequence[VertexLike], phi: Formula,
                        d: int, epsilon: float) -> Dict:
    """Check |⟨φ,A⟩ − Σ ν(X_i)^p ⟨φ,A[X_i]⟩| < 2pε for a (d,ε)-fragmentation.

    The separator is everything outside the given parts. Parts must be
    pairwise disjoint with no Gaifman edge between two of them.
    """
    masks = [as_mask(A, part) for part in parts]
    covered = np.zeros(A.n, dtype=bool)
    for i, part in enumerate(masks):
        if (covered & part).any():
            raise InputError(f"fragmentation part {i} overlaps an earlier part")
        covered |= part
    separator = ~covered
    labels = np.full(A.n, -1)
    for i, part in enumerate(masks):
        labels[part] = i
    coo = A.adjacency.tocoo()
    a, b = labels[coo.row], labels[coo.col]
    crossing = (a >= 0) & (b >= 0) & (a != b)

    p = arity(phi)
    r = strong_radius(phi)
    separator_ball = float(ball_profile(A, separator, d)[-1])
    out = {
        'parts': len(masks),
        'separator_measure': measure(A, separator),
        'separator_ball_measure': separator_ball,
        'strong_radius': r,
    }
    problems = []
    if crossing.any():
        problems.append("two parts are adjacent")
    if separator_ball >= epsilon:
        problems.append(f"separator is not ({d},{epsilon})-negligible")
    if r is None or r > d:
        problems.append(f"formula is not strongly {d}-local")
    out['precondition'] = not problems
    out['reason'] = '; '.join(problems)
    if problems:
        return out

    total = 0.0
    for part in masks:
        weight = measure(A, part)
        if weight > 0:
            total += weight ** p * stone_pairing(induce(A, part), phi)
    out['difference'] = abs(stone_pairing(A, phi) - total)
    out['bound'] = 2 * p * epsilon
    out['holds'] = bool(out['difference'] < out['bound'])
    return out
