"""(d,ε,δ)-expansion, the outer magnification h_out, and expander cleaning.

Exact mode enumerates every subset with a bitmask table: the ball of the
set with bits X is the union of the per-vertex balls, so the table for all
2^n subsets is built by doubling, one vertex at a time.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from config import Config
from src.structures.structure import Structure, as_mask, remove
from src.utils.errors import InputError, PreconditionError
from src.utils.logger import get_logger

logger = get_logger(__name__)

MEASURE_SLACK = 1e-12


def _ball_bits(A: Structure, d: int) -> np.ndarray:
    powers = np.left_shift(np.int64(1), np.arange(A.n, dtype=np.int64))
    return np.isfinite(A.distances_from(np.arange(A.n), limit=d)).astype(np.int64) @ powers


def subset_tables(A: Structure, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """(ν(X), ν(ball^d(X))) for every subset X, indexed by its bitmask"""
    if A.n > 30:
        raise InputError(f"cannot enumerate the subsets of {A.n} vertices")
    bits = _ball_bits(A, d)
    size = 1 << A.n
    balls = np.zeros(size, dtype=np.int64)
    mass = np.zeros(size)
    for b in range(A.n):
        half = 1 << b
        balls[half:2 * half] = balls[:half] | bits[b]
        mass[half:2 * half] = mass[:half] + A.weights[b]
    return mass, mass[balls]


def mask_of(bits: int, n: int) -> np.ndarray:
    return ((int(bits) >> np.arange(n)) & 1).astype(bool)


def _argmin_ratio(ratios: np.ndarray, allowed: np.ndarray) -> Tuple[float, int]:
    """Smallest ratio and the smallest bitmask attaining it"""
    if not allowed.any():
        return math.inf, -1
    masked = np.where(allowed, ratios, np.inf)
    best = float(masked.min())
    witness = int(np.flatnonzero(masked <= best + MEASURE_SLACK)[0])
    return best, witness


@dataclass
class ExpansionReport:
    d: int
    epsilon: float
    mode: str
    delta: float
    witness: Optional[list]
    h_out: float
    h_out_witness: Optional[list]
    samples: int = 0

    def expanding(self, delta: float) -> bool:
        return self.delta > delta

    def to_dict(self) -> Dict:
        def finite(x):
            return None if math.isinf(x) else float(x)
        return {
            'd': self.d, 'epsilon': self.epsilon, 'mode': self.mode,
            'delta': finite(self.delta), 'witness': self.witness,
            'h_out': finite(self.h_out), 'h_out_witness': self.h_out_witness,
            'samples': self.samples,
        }


def _exact(A: Structure, d: int, epsilon: float) -> ExpansionReport:
    mass, ball_mass = subset_tables(A, d)
    growth = ball_mass - mass
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = growth / mass
    qualifying = (mass > epsilon + MEASURE_SLACK) & (mass < 1 - epsilon - MEASURE_SLACK)
    delta, witness = _argmin_ratio(ratios, qualifying)

    if d != 1:
        mass, ball_mass = subset_tables(A, 1)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratios = (ball_mass - mass) / mass
    small = (mass > 0) & (mass <= 0.5 + MEASURE_SLACK)
    h_out, h_witness = _argmin_ratio(ratios, small)

    def ids(bits):
        return None if bits < 0 else [int(v) for v in np.flatnonzero(mask_of(bits, A.n))]
    return ExpansionReport(d, epsilon, 'exact', delta, ids(witness), h_out, ids(h_witness))


def batch_ball_measures(A: Structure, masks: np.ndarray, d: int) -> np.ndarray:
    """ν(ball^d(X)) for the columns X of an (n, k) boolean matrix"""
    reached = masks.copy()
    for _ in range(d):
        grown = (A.adjacency @ reached.astype(np.int32)) > 0
        if not (grown & ~reached).any():
            break
        reached |= grown
    return A.weights @ reached


def sample_subsets(A: Structure, count: int, rng: np.random.Generator) -> np.ndarray:
    """Candidate sets: half are BFS balls around random vertices, half Bernoulli subsets"""
    masks = np.zeros((A.n, count), dtype=bool)
    for j in range(count):
        if j % 2 == 0:
            v = int(rng.integers(A.n))
            [dist] = A.distances_from([v])
            r = int(rng.integers(0, int(dist[np.isfinite(dist)].max()) + 1))
            masks[:, j] = dist <= r
        else:
            masks[:, j] = rng.random(A.n) < rng.uniform(0.05, 0.95)
    return masks


def _sampled(A: Structure, d: int, epsilon: float, count: int, seed: int) -> ExpansionReport:
    rng = np.random.default_rng([seed, A.n, d])
    masks = sample_subsets(A, count, rng)
    mass = A.weights @ masks
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = (batch_ball_measures(A, masks, d) - mass) / mass
        ratios1 = ratios if d == 1 else (batch_ball_measures(A, masks, 1) - mass) / mass
    qualifying = (mass > epsilon + MEASURE_SLACK) & (mass < 1 - epsilon - MEASURE_SLACK)
    small = (mass > 0) & (mass <= 0.5 + MEASURE_SLACK)

    def pick(values, allowed):
        if not allowed.any():
            return math.inf, None
        j = int(np.flatnonzero(allowed)[np.argmin(values[allowed])])
        return float(values[j]), [int(v) for v in np.flatnonzero(masks[:, j])]

    delta, witness = pick(ratios, qualifying)
    h_out, h_witness = pick(ratios1, small)
    return ExpansionReport(d, epsilon, 'sampled', delta, witness, h_out, h_witness, count)


def expansion_check(A: Structure, d: int, epsilon: float, mode: str = 'auto',
                    sample_count: Optional[int] = None, seed: Optional[int] = None,
                    exact_cap: Optional[int] = None) -> ExpansionReport:
    """δ̂ = inf ν(ball^d(X)∖X)/ν(X) over ε < ν(X) < 1−ε, plus h_out over 0 < ν(X) ≤ 1/2.

    Sampled values are infima over the drawn sets, so they can only
    overestimate the true infimum.
    """
    exact_cap = Config.EXACT_SUBSET_CAP if exact_cap is None else exact_cap
    if d < 0:
        raise InputError(f"radius must be non-negative, got {d}")
    if mode not in ('auto', 'exact', 'sampled'):
        raise InputError(f"unknown expansion mode '{mode}'")
    if mode == 'exact' and A.n > exact_cap:
        raise InputError(f"exact mode enumerates all subsets and is refused for n = {A.n} > {exact_cap}")
    if mode == 'exact' or (mode == 'auto' and A.n <= exact_cap):
        return _exact(A, d, epsilon)
    count = Config.SAMPLE_COUNT if sample_count is None else sample_count
    seed = Config.SEED if seed is None else seed
    return _sampled(A, d, epsilon, count, seed)


@dataclass
class CleanExpanderReport:
    Y: list
    measure: float
    mode: str
    verified: Optional[bool]
    worst_ratio: Optional[float]

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def _bad_sets(mass, ball_mass, epsilon, delta):
    return (mass > 0) & (mass <= 1 - 2 * epsilon + MEASURE_SLACK) & (ball_mass - mass < delta * mass - MEASURE_SLACK)


def verify_clean(A: Structure, Y: np.ndarray, d: int, delta: float) -> Tuple[bool, float]:
    """Check ν'(ball^d(X)∖X) ≥ δ ν'(X) for all X ⊆ A−Y with 0 < ν'(X) ≤ 1/2, by enumeration"""
    if not (~Y).any():
        return True, math.inf
    rest = remove(A, Y) if Y.any() else A
    mass, ball_mass = subset_tables(rest, d)
    small = (mass > 0) & (mass <= 0.5 + MEASURE_SLACK)
    if not small.any():
        return True, math.inf
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = (ball_mass - mass) / mass
    worst = float(ratios[small].min())
    return bool(worst >= delta - 1e-9), worst


def clean_expander(A: Structure, d: int, epsilon: float, delta: float,
                   exact_cap: Optional[int] = None, seed: Optional[int] = None) -> CleanExpanderReport:
    """Largest Y with ν(Y) ≤ 1−2ε whose d-ball grows by less than δ·ν(Y).

    On a (d,ε,δ)-expanding structure such a Y has ν(Y) ≤ ε and A−Y satisfies
    the half-measure expansion conclusion; both are checked exhaustively when
    n is small enough.
    """
    exact_cap = Config.EXACT_SUBSET_CAP if exact_cap is None else exact_cap
    if not 0 < epsilon < 1 / 6:
        raise PreconditionError(f"expander cleaning needs 0 < ε < 1/6, got {epsilon}")
    report = expansion_check(A, d, epsilon, exact_cap=exact_cap, seed=seed)
    if not report.delta > delta:
        raise PreconditionError(
            f"structure is not ({d},{epsilon},{delta})-expanding: δ̂ = {report.delta:.6g} ({report.mode})")

    if A.n <= exact_cap:
        mass, ball_mass = subset_tables(A, d)
        bad = _bad_sets(mass, ball_mass, epsilon, delta)
        Y = np.zeros(A.n, dtype=bool)
        if bad.any():
            candidates = np.flatnonzero(bad)
            sizes = np.array([bin(int(c)).count('1') for c in candidates])
            order = np.lexsort((candidates, -sizes, -mass[candidates]))
            Y = mask_of(int(candidates[order[0]]), A.n)
        verified, worst = verify_clean(A, Y, d, delta)
        Y_measure = float(A.weights[Y].sum())
        if Y_measure > epsilon + MEASURE_SLACK:
            verified = False
        if not verified:
            logger.warning(f"⚠️ cleaned expander fails the conclusion: worst ratio {worst:.6g}")
        return CleanExpanderReport([int(v) for v in np.flatnonzero(Y)], Y_measure, 'exact',
                                   verified, None if math.isinf(worst) else worst)

    # greedy growth over sampled candidate sets
    rng = np.random.default_rng([Config.SEED if seed is None else seed, A.n, d, 1])
    candidates = sample_subsets(A, Config.SAMPLE_COUNT, rng)
    Y = np.zeros(A.n, dtype=bool)
    for j in np.argsort(A.weights @ candidates, kind='stable'):
        trial = Y | candidates[:, j]
        mass = float(A.weights[trial].sum())
        if mass <= 0 or mass > 1 - 2 * epsilon:
            continue
        grown = float(batch_ball_measures(A, trial[:, None], d)[0])
        if grown - mass < delta * mass:
            Y = trial
    return CleanExpanderReport([int(v) for v in np.flatnonzero(Y)], float(A.weights[Y].sum()),
                               'sampled', None, None)


def degree_bound_h_out(delta: float, max_degree: int, d: int) -> float:
    """Guaranteed h_out of the cleaned graph for degree ≤ Δ: δ/(Δ−1)^d"""
    if max_degree <= 1:
        return delta
    return delta / (max_degree - 1) ** d
