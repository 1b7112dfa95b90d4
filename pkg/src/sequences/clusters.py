"""Cluster, interweaving and pre-cluster diagnostics on subset sequences.

Every limit statement is read off the tail window: a statistic converges
when its oscillation over the window is below tol, a sequence is negligible
when its tail profile is.
"""
import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import Config
from src.logic.batteries import Battery, configured_battery, standard_battery
from src.logic.formula import Atom, conj, var
from src.sequences.negligible import NegligibleProfile, ball_profile, negligible_profile
from src.sequences.sequence import (
    ConvergenceDiagnostic, StructureSequence, SubsetSequence, convergence_diagnostic, tail_window,
)
from src.structures.structure import ball, mark, measure, outer_boundary
from src.utils.errors import PreconditionError
from src.utils.logger import get_logger

logger = get_logger(__name__)

MARK = 'M'


def boundary_sequence(S: StructureSequence, X: SubsetSequence) -> SubsetSequence:
    """∂𝗫: outer boundary of X_n at every index"""
    return SubsetSequence(S, lambda n, A: outer_boundary(A, X[n]), f"∂{X.name}")


def measure_series(S: StructureSequence, X: SubsetSequence) -> pd.Series:
    return pd.Series([measure(S[n], X[n]) for n in S.indices], index=pd.Index(S.indices, name='n'))


@dataclass
class ClusterVerdict:
    verdict: str
    boundary: NegligibleProfile
    lifted: ConvergenceDiagnostic
    induced: Optional[ConvergenceDiagnostic]
    measures: pd.Series
    tol: float
    failing: str = ''
    alternative: Dict = field(default_factory=dict)

    @property
    def is_cluster(self) -> bool:
        return self.verdict == 'cluster'

    def limit_measure(self) -> float:
        return float(self.measures.loc[self.lifted.window].mean())

    def to_dict(self) -> Dict:
        name, osc = self.lifted.worst()
        return {
            'verdict': self.verdict,
            'failing': self.failing,
            'tol': self.tol,
            'boundary': self.boundary.to_dict(),
            'lifted_oscillation': {k: float(v) for k, v in self.lifted.oscillation().items()},
            'lifted_limits': {k: float(v) for k, v in self.lifted.limits().items()},
            'worst_statistic': {'name': name, 'oscillation': osc},
            'alternative': self.alternative,
        }


def _induced_diagnostic(S: StructureSequence, X: SubsetSequence, battery: Battery,
                        window: List[int], workers: Optional[int]) -> Optional[ConvergenceDiagnostic]:
    """Battery on A_n[X_n] over the window indices where X_n has positive measure"""
    positive = [n for n in S.indices if measure(S[n], X[n]) > 0]
    if not positive or not set(window) <= set(positive):
        return None
    sub = S.subsequence(positive)
    X_sub = SubsetSequence(sub, lambda n, A: X[n], X.name)
    diagnostic = convergence_diagnostic(sub.induced(X_sub), battery, workers=workers)
    return ConvergenceDiagnostic(diagnostic.values, window)


def is_cluster(S: StructureSequence, X: SubsetSequence, battery: Optional[Battery] = None,
               dmax: Optional[int] = None, tol: Optional[float] = None,
               window_fraction: Optional[float] = None, mark_name: str = MARK,
               workers: Optional[int] = None) -> ClusterVerdict:
    """Cluster test: negligible outer boundary and a convergent marked lift"""
    tol = Config.TOL if tol is None else tol
    X.check_aligned(S)
    signature = S[S.indices[0]].signature
    battery = battery or configured_battery(signature, mark_name)

    boundary = negligible_profile(S, boundary_sequence(S, X), dmax, tol, window_fraction, workers)
    lifted = convergence_diagnostic(S.marked(mark_name, X), battery, window_fraction, workers)
    measures = measure_series(S, X)
    window = lifted.window

    verdict = ClusterVerdict('cluster', boundary, lifted, None, measures, tol)
    if len(window) < 2:
        verdict.verdict = 'inconclusive'
        verdict.failing = 'window holds a single index'
    elif not boundary.negligible:
        worst_d = int(boundary.tail_sup.idxmax())
        verdict.verdict = 'not-cluster'
        verdict.failing = f"boundary ball d={worst_d} keeps measure {boundary.tail_sup.max():.4g}"
    elif not lifted.passes(tol):
        name, osc = lifted.worst()
        verdict.verdict = 'not-cluster'
        verdict.failing = f"statistic '{name}' oscillates by {osc:.4g} on the marked lift"

    # alternative characterization: convergent induced sequence and a limit measure
    tail = measures.loc[window]
    alternative = {'measure_oscillation': float(tail.max() - tail.min()),
                   'limit_measure': float(tail.mean())}
    if tail.max() < tol:
        alternative['holds'] = True
        alternative['note'] = 'negligible cluster'
    else:
        base = [(name, phi) for name, phi in standard_battery(signature)]
        induced = _induced_diagnostic(S, X, base, window, workers)
        verdict.induced = induced
        alternative['induced_converges'] = bool(induced is not None and induced.passes(tol))
        alternative['holds'] = bool(alternative['induced_converges'] and alternative['measure_oscillation'] < tol
                                    and boundary.negligible)
    verdict.alternative = alternative
    logger.debug(f"📊 '{X.name}': {verdict.verdict} {verdict.failing}")
    return verdict


@dataclass
class InterweavingVerdict:
    interweaving: bool
    measure_difference: float
    statistic_differences: Dict[str, float]
    tol: float

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def interweaving(S: StructureSequence, X: SubsetSequence, Y: SubsetSequence,
                 battery: Optional[Battery] = None, tol: Optional[float] = None,
                 window_fraction: Optional[float] = None,
                 workers: Optional[int] = None) -> InterweavingVerdict:
    """𝗫 ≬ 𝗬: same induced-limit statistics and same limit measure"""
    tol = Config.TOL if tol is None else tol
    verdicts = [is_cluster(S, Z, None, None, tol, window_fraction, workers=workers) for Z in (X, Y)]
    for Z, v in zip((X, Y), verdicts):
        if not v.is_cluster:
            raise PreconditionError(f"'{Z.name}' is not a cluster: {v.failing}")

    window = tail_window(S.indices, window_fraction)
    mx, my = verdicts[0].limit_measure(), verdicts[1].limit_measure()
    battery = battery or configured_battery(S[S.indices[0]].signature)
    differences: Dict[str, float] = {}
    if min(mx, my) >= tol:
        ix = _induced_diagnostic(S, X, battery, window, workers)
        iy = _induced_diagnostic(S, Y, battery, window, workers)
        if ix is None or iy is None:
            raise PreconditionError("a cluster with positive limit measure is empty inside the window")
        gap = (ix.limits() - iy.limits()).abs()
        differences = {name: float(v) for name, v in gap.items()}
    same = abs(mx - my) < tol and all(v < tol for v in differences.values())
    return InterweavingVerdict(bool(same), abs(mx - my), differences, tol)


@dataclass
class WrapResult:
    W: SubsetSequence
    radii: Dict[int, int]
    halo: pd.Series

    def to_dict(self) -> Dict:
        return {'radii': {str(n): d for n, d in self.radii.items()},
                'halo': {str(n): float(v) for n, v in self.halo.items()}}


def pre_cluster_check(S: StructureSequence, X: SubsetSequence, dmax: Optional[int] = None,
                      tol: Optional[float] = None, window_fraction: Optional[float] = None,
                      workers: Optional[int] = None) -> List[str]:
    """Reasons X fails to be a pre-cluster (empty when it passes)"""
    tol = Config.TOL if tol is None else tol
    dmax = Config.PROFILE_DMAX if dmax is None else dmax
    window = tail_window(S.indices, window_fraction)
    problems = []
    measures = measure_series(S, X)
    tail = measures.loc[window]
    if tail.min() < tol:
        problems.append(f"limit measure is not positive (tail minimum {tail.min():.4g})")
        return problems
    if tail.max() - tail.min() >= tol:
        problems.append(f"measure oscillates by {tail.max() - tail.min():.4g}")
    induced = _induced_diagnostic(S, X, standard_battery(S[S.indices[0]].signature), window, workers)
    if induced is None or not induced.passes(tol):
        name, osc = induced.worst() if induced is not None else ('', float('nan'))
        problems.append(f"induced statistic '{name}' oscillates by {osc:.4g}")
    halo = np.array([ball_profile(S[n], X[n], dmax) - measures[n] for n in window])
    if halo.max() >= tol:
        problems.append(f"ν(ball^d(X)∖X) keeps tail measure {halo.max():.4g}")
    return problems


def wrap(S: StructureSequence, X: SubsetSequence, radius_cap: Optional[int] = None,
         dmax: Optional[int] = None, tol: Optional[float] = None,
         window_fraction: Optional[float] = None, workers: Optional[int] = None) -> WrapResult:
    """W_n = ball(X_n, D(n)), D(n) = max{d ≤ cap: ν(ball^{2d+1}(X_n')∖X_n') < 1/d for all n' ≥ n}"""
    cap = Config.RADIUS_CAP if radius_cap is None else radius_cap
    X.check_aligned(S)
    problems = pre_cluster_check(S, X, dmax, tol, window_fraction, workers)
    if problems:
        raise PreconditionError(f"'{X.name}' is not a pre-cluster: " + '; '.join(problems))

    def halos(n, A):
        profile = ball_profile(A, X[n], 2 * cap + 1)
        return profile[[2 * d + 1 for d in range(1, cap + 1)]] - profile[0]
    table = np.vstack(S.map(halos, workers))
    bounds = 1.0 / np.arange(1, cap + 1)
    # holds[i, d-1]: the condition at radius d holds for every index from position i on
    holds = np.flip(np.logical_and.accumulate(np.flip(table < bounds, axis=0), axis=0), axis=0)
    radii = {}
    for i, n in enumerate(S.indices):
        good = np.flatnonzero(holds[i]) + 1
        radii[n] = int(good.max()) if good.size else 0
    W = SubsetSequence(S, lambda n, A: ball(A, X[n], radii[n]), f"wrap({X.name})")
    halo = pd.Series([measure(S[n], W[n] & ~X[n]) for n in S.indices], index=pd.Index(S.indices, name='n'))
    logger.info(f"✅ wrapped '{X.name}' with radii {radii[S.indices[0]]}..{radii[S.indices[-1]]}")
    return WrapResult(W, radii, halo)


@dataclass
class UniversalVerdict:
    universal: bool
    verdicts: List[ClusterVerdict]

    def to_dict(self) -> Dict:
        return {'verdict': 'universal-at-scale' if self.universal else 'not-universal',
                'lifts': [v.verdict for v in self.verdicts],
                'failing': [v.failing for v in self.verdicts if not v.is_cluster]}


def random_lift(S: StructureSequence, name: str, seed: int) -> StructureSequence:
    """Conservative lift adding a seeded fair-coin unary mark at every index"""
    def provider(n):
        A = S[n]
        rng = np.random.default_rng([seed, n])
        return mark(A, name, rng.random(A.n) < 0.5)
    return StructureSequence(provider, S.indices, {'random_lift_of': S.description, 'mark': name, 'seed': seed})


def universal_at_scale(S: StructureSequence, X: SubsetSequence, lifts: int = 3,
                       seed: Optional[int] = None, tol: Optional[float] = None,
                       window_fraction: Optional[float] = None,
                       workers: Optional[int] = None) -> UniversalVerdict:
    """is_cluster on a finite family of seeded random conservative lifts"""
    seed = Config.SEED if seed is None else seed
    verdicts = []
    for j in range(lifts):
        name = f"L{j}"
        lifted = random_lift(S, name, seed + j)
        x1 = var(1)
        battery = standard_battery(lifted[lifted.indices[0]].signature, MARK)
        battery.append((name, Atom(name, (x1,))))
        battery.append((f"{name}_{MARK}", conj(Atom(name, (x1,)), Atom(MARK, (x1,)))))
        verdicts.append(is_cluster(lifted, X.on(lifted), battery, None, tol, window_fraction, workers=workers))
    return UniversalVerdict(all(v.is_cluster for v in verdicts), verdicts)


def boolean_combinations_are_clusters(S: StructureSequence, clusters: Sequence[SubsetSequence],
                                      tol: Optional[float] = None,
                                      window_fraction: Optional[float] = None,
                                      workers: Optional[int] = None) -> Dict:
    """Check that finite intersections pass, then that unions, differences and complements do"""
    def check(Z):
        return is_cluster(S, Z, None, None, tol, window_fraction, workers=workers)

    intersections = {}
    for k in range(1, len(clusters) + 1):
        for group in itertools.combinations(clusters, k):
            Z = group[0]
            for other in group[1:]:
                Z = Z & other
            intersections[Z.name] = check(Z).verdict
    combinations = {}
    for X in clusters:
        combinations[f"¬{X.name}"] = check(X.complement()).verdict
    for X, Y in itertools.combinations(clusters, 2):
        for Z in (X | Y, X - Y, Y - X, X ^ Y):
            combinations[Z.name] = check(Z).verdict
    premise = all(v == 'cluster' for v in intersections.values())
    conclusion = all(v == 'cluster' for v in combinations.values())
    return {'intersections': intersections, 'combinations': combinations,
            'premise': premise, 'conclusion': conclusion, 'holds': (not premise) or conclusion}


def intersection_dichotomy(S: StructureSequence, X: SubsetSequence, Y: SubsetSequence,
                           tol: Optional[float] = None,
                           window_fraction: Optional[float] = None) -> Dict:
    """Tail of ν(X∩Y)/ν(X): for an expanding cluster X it sits near 0 or near 1"""
    tol = Config.TOL if tol is None else tol
    window = tail_window(S.indices, window_fraction)
    ratios = {}
    for n in window:
        A = S[n]
        total = measure(A, X[n])
        ratios[n] = measure(A, X[n] & Y[n]) / total if total > 0 else 0.0
    values = np.array(list(ratios.values()))
    if np.all(values < tol):
        limit = 0
    elif np.all(values > 1 - tol):
        limit = 1
    else:
        limit = None
    return {'ratios': {str(n): float(v) for n, v in ratios.items()}, 'limit': limit, 'dichotomy': limit is not None}
