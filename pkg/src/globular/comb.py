"""Clip-based combing of countably many disjoint clusters into a stable partition.

Clusters are ordered by their limit measure λ_i (tail-window mean). The clip
F(n) is the largest t ≤ n whose prefix error Σ_{i≤t} |ν(C^i_n') − λ_i| stays
within Σ_{i>t} λ_i + tol at every later index n'. G refines F so that the
boundaries of the first G(n) clusters are thin at every radius up to G(n).
Cluster i is marked from the indices where i ≤ G(n) on.
"""
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from src.globular.assembly import (
    RESIDUAL, SEPARATOR, UNMARKED, ClusteringResult, check, measure_table,
)
from src.sequences.negligible import ball_profile
from src.sequences.sequence import StructureSequence, SubsetSequence, tail_window
from src.structures.structure import ball, outer_boundary
from src.utils.errors import InputError
from src.utils.logger import get_logger

logger = get_logger(__name__)


def _masks(S: StructureSequence, clusters: Sequence[SubsetSequence]) -> Dict[int, List[np.ndarray]]:
    for C in clusters:
        C.check_aligned(S)
    return {n: [C[n] for C in clusters] for n in S.indices}


def _strongly_disjoint(S: StructureSequence, n: int, masks: List[np.ndarray]) -> Tuple[bool, float]:
    """No shared vertex and no edge between two clusters; second value is the shared measure"""
    A = S[n]
    counts = np.sum(masks, axis=0) if masks else np.zeros(A.n)
    shared = float(A.weights[counts > 1].sum())
    if shared > 0 or (counts > 1).any():
        return False, shared
    owner = np.full(A.n, -1)
    for i, mask in enumerate(masks):
        owner[mask] = i
    coo = A.adjacency.tocoo()
    a, b = owner[coo.row], owner[coo.col]
    return not bool(np.any((a >= 0) & (b >= 0) & (a != b))), 0.0


def _separate(S: StructureSequence, masks: Dict[int, List[np.ndarray]]) -> Dict[int, List[np.ndarray]]:
    """Z^i = C^i ∖ ⋃_{j<i} ball(C^j)"""
    out = {}
    for n, sets in masks.items():
        A = S[n]
        taken = np.zeros(A.n, dtype=bool)
        reduced = []
        for C in sets:
            reduced.append(C & ~taken)
            taken |= ball(A, C, 1)
        out[n] = reduced
    return out


def limit_measures(S: StructureSequence, masks: Dict[int, List[np.ndarray]],
                   window: List[int]) -> Tuple[np.ndarray, np.ndarray]:
    """ν(C^i_n) as an (indices × clusters) array and its tail-window means"""
    table = np.array([[float(S[n].weights[C].sum()) for C in masks[n]] for n in S.indices])
    rows = [S.indices.index(n) for n in window]
    return table, table[rows].mean(axis=0)


def canonical_clip(indices: Sequence[int], table: np.ndarray, limits: np.ndarray, tol: float) -> np.ndarray:
    """F(n) = min(n, max{t : Σ_{i≤t} |ν(C^i_n') − λ_i| ≤ Σ_{i>t} λ_i + tol for all n' ≥ n})"""
    errors = np.concatenate([np.zeros((table.shape[0], 1)), np.cumsum(np.abs(table - limits), axis=1)], axis=1)
    tails = np.concatenate([np.cumsum(limits[::-1])[::-1], [0.0]])
    ok = errors <= tails[None, :] + tol
    later = np.flip(np.logical_and.accumulate(np.flip(ok, axis=0), axis=0), axis=0)
    clip = np.zeros(len(indices), dtype=np.int64)
    for p, n in enumerate(indices):
        allowed = np.flatnonzero(later[p])
        clip[p] = min(max(int(n), 0), int(allowed.max()))
    return np.maximum.accumulate(clip)


def boundary_thresholds(S: StructureSequence, masks: Dict[int, List[np.ndarray]], count: int,
                        radius: int) -> np.ndarray:
    """T[i, d]: first index from which ν(ball^d(∂C^i)) ≤ 2^-i / d at every later index (inf if never)"""
    indices = S.indices
    T = np.full((count + 1, radius + 1), np.inf)
    if count == 0 or radius == 0:
        return T
    ok = np.zeros((len(indices), count, radius), dtype=bool)
    for p, n in enumerate(indices):
        A = S[n]
        for i in range(count):
            profile = ball_profile(A, outer_boundary(A, masks[n][i]), radius)
            d = np.arange(1, radius + 1)
            ok[p, i] = profile[1:] <= 2.0 ** -(i + 1) / d
    later = np.flip(np.logical_and.accumulate(np.flip(ok, axis=0), axis=0), axis=0)
    for i in range(count):
        for d in range(radius):
            hits = np.flatnonzero(later[:, i, d])
            if hits.size:
                T[i + 1, d + 1] = indices[int(hits[0])]
    return T


def refined_clip(indices: Sequence[int], F: np.ndarray, T: np.ndarray) -> np.ndarray:
    """G(n) = min(F(n), max{a : M(a) ≤ n}) with M(a) = max_{i≤a, d≤a} T(i, d)"""
    limit = T.shape[0] - 1
    M = np.full(limit + 1, -np.inf)
    for a in range(1, limit + 1):
        M[a] = T[1:a + 1, 1:a + 1].max() if a < T.shape[1] else np.inf
    G = np.zeros(len(indices), dtype=np.int64)
    for p, n in enumerate(indices):
        reachable = np.flatnonzero(M <= n)
        G[p] = min(int(F[p]), int(reachable.max()))
    return G


def _ordered(S: StructureSequence, clusters: Sequence[SubsetSequence], window: List[int]):
    masks = _masks(S, clusters)
    _, limits = limit_measures(S, masks, window)
    order = sorted(range(len(clusters)), key=lambda i: (-limits[i], i))
    return [clusters[i] for i in order], {n: [sets[i] for i in order] for n, sets in masks.items()}


def clip_comb(S: StructureSequence, clusters: Sequence[SubsetSequence], tol: Optional[float] = None,
              window_fraction: Optional[float] = None, radius_cap: Optional[int] = None) -> ClusteringResult:
    if not clusters:
        raise InputError("clip comb needs at least one cluster")
    tol = Config.TOL if tol is None else tol
    radius_cap = Config.RADIUS_CAP if radius_cap is None else radius_cap
    window = tail_window(S.indices, window_fraction)
    clusters, masks = _ordered(S, clusters, window)
    notes = []

    shared = {}
    for n in S.indices:
        disjoint, overlap = _strongly_disjoint(S, n, masks[n])
        if not disjoint:
            shared[n] = overlap
    if shared:
        worst = max(shared[n] for n in window if n in shared) if any(n in shared for n in window) else 0.0
        if worst >= tol:
            raise InputError(f"clusters overlap on measure {worst:.4g} in the tail window; "
                             "they are not almost disjoint")
        masks = _separate(S, masks)
        notes.append(f"clusters touch at {len(shared)} indices; Z^i = C^i minus the balls of earlier clusters")
        logger.warning(f"⚠️ {notes[-1]}")

    table, limits = limit_measures(S, masks, window)
    F = canonical_clip(S.indices, table, limits, tol)
    radius = min(len(clusters), radius_cap)
    T = boundary_thresholds(S, masks, radius, radius)
    G = refined_clip(S.indices, F, T)
    lambda0 = float(1.0 - limits.sum())

    result = ClusteringResult('comb', list(S.indices), list(window), {})
    result.atoms = [{'cluster': C.name, 'lambda': float(lam)} for C, lam in zip(clusters, limits)]
    for p, n in enumerate(S.indices):
        A = S[n]
        labels = np.full(A.n, RESIDUAL, dtype=object)
        marked = np.zeros(A.n, dtype=bool)
        rims = np.zeros(A.n, dtype=bool)
        for i in range(int(G[p])):
            D = masks[n][i]
            labels[D] = f"M_{i + 1}"
            marked |= D
            rims |= outer_boundary(A, D)
        labels[rims & ~marked] = SEPARATOR
        result.labels[n] = labels.astype(str)
        result.clip[n] = {'F': int(F[p]), 'G': int(G[p])}

        covered = float(table[p, :int(F[p])].sum())
        slack = 2 * float(limits[int(F[p]):].sum()) + tol
        check(result.checks, n, 'clip-coverage', abs(covered - (1.0 - lambda0)) <= slack,
              abs(covered - (1.0 - lambda0)), slack, window)

    result.measures = measure_table(S, result.labels)
    result.notes = notes + [f"lambda0 = {lambda0:.4f}"]
    logger.info(f"✅ combed {len(clusters)} clusters; G at the last index = {int(G[-1])}")
    return result


def naive_top_k(S: StructureSequence, clusters: Sequence[SubsetSequence], k: int = 8,
                window_fraction: Optional[float] = None) -> ClusteringResult:
    """Baseline: mark the k clusters of largest limit measure at every index, nothing else"""
    window = tail_window(S.indices, window_fraction)
    clusters, masks = _ordered(S, clusters, window)
    result = ClusteringResult('naive', list(S.indices), list(window), {})
    for n in S.indices:
        labels = np.full(S[n].n, UNMARKED, dtype=object)
        for i, C in enumerate(masks[n][:k]):
            labels[C] = f"M_{i + 1}"
        result.labels[n] = labels.astype(str)
        result.clip[n] = {'F': min(k, len(clusters)), 'G': min(k, len(clusters))}
    result.measures = measure_table(S, result.labels)
    return result
