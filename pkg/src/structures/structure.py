import threading
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra, shortest_path

from src.utils.errors import DomainError, InputError

WEIGHT_TOL = 1e-12
DISTANCE_BATCH = 256

VertexSet = np.ndarray
VertexLike = Union[np.ndarray, Iterable[int], None]


class Signature:
    """Relation names with arities; unary marks form a distinguished subset"""

    def __init__(self, arities: Dict[str, int], marks: Iterable[str] = ()):
        for name, arity in arities.items():
            if not isinstance(arity, (int, np.integer)) or arity < 1:
                raise InputError(f"relation '{name}' must have a positive arity, got {arity}")
        self.arities = dict(sorted(arities.items()))
        self.marks = frozenset(marks)
        for name in self.marks:
            if self.arities.get(name) != 1:
                raise InputError(f"mark '{name}' must be a unary relation")

    def arity(self, name: str) -> int:
        if name not in self.arities:
            raise InputError(f"unknown relation '{name}'")
        return self.arities[name]

    def with_mark(self, name: str) -> 'Signature':
        if name in self.arities and self.arities[name] != 1:
            raise InputError(f"cannot mark with '{name}': it is a relation of arity {self.arities[name]}")
        arities = dict(self.arities)
        arities[name] = 1
        return Signature(arities, self.marks | {name})

    def without(self, names: Iterable[str]) -> 'Signature':
        names = set(names)
        return Signature({k: v for k, v in self.arities.items() if k not in names}, self.marks - names)

    def __contains__(self, name: str) -> bool:
        return name in self.arities

    def __eq__(self, other) -> bool:
        return isinstance(other, Signature) and self.arities == other.arities and self.marks == other.marks

    def __repr__(self) -> str:
        return f"Signature({self.arities}, marks={sorted(self.marks)})"


class Structure:
    """Finite relational structure with a vertex probability measure.

    Vertices are 0..n-1. Relations map a name to a frozenset of id tuples.
    The Gaifman adjacency is built once, as a symmetric CSR matrix.
    """

    def __init__(self, n: int, relations: Optional[Dict[str, Iterable[Sequence[int]]]] = None,
                 weights: Union[str, Sequence[float], np.ndarray, None] = 'uniform',
                 signature: Optional[Signature] = None):
        if n < 1:
            raise InputError("a structure needs at least one vertex")
        self.n = int(n)
        relations = relations or {}

        arities = {}
        self.relations: Dict[str, frozenset] = {}
        for name in sorted(relations):
            tuples = frozenset(tuple(int(v) for v in t) for t in relations[name])
            lengths = {len(t) for t in tuples}
            if signature is not None and name in signature:
                expected = signature.arity(name)
            elif len(lengths) == 1:
                expected = lengths.pop()
            elif not tuples:
                raise InputError(f"relation '{name}' is empty and has no declared arity")
            else:
                raise InputError(f"relation '{name}' mixes tuple lengths {sorted(lengths)}")
            for t in tuples:
                if len(t) != expected:
                    raise InputError(f"relation '{name}': tuple {t} has arity {len(t)}, expected {expected}")
                for v in t:
                    if not 0 <= v < self.n:
                        raise InputError(f"relation '{name}': vertex id {v} out of range 0..{self.n - 1}")
            arities[name] = expected
            self.relations[name] = tuples

        if signature is None:
            signature = Signature(arities)
        else:
            for name in signature.arities:
                self.relations.setdefault(name, frozenset())
            unknown = set(self.relations) - set(signature.arities)
            if unknown:
                raise InputError(f"relations {sorted(unknown)} are not in the signature")
        self.signature = signature

        self.weights = _normalise_weights(weights, self.n)
        self.adjacency = _gaifman(self.n, self.relations)
        self._lock = threading.Lock()
        self._distances = None
        self._tables: Dict[int, np.ndarray] = {}
        self._keys: Dict[str, np.ndarray] = {}

    # -- metric -------------------------------------------------------------

    def distances(self) -> np.ndarray:
        """All-pairs Gaifman distances (np.inf between components); n² memory, for small structures"""
        if self._distances is None:
            dist = shortest_path(self.adjacency, method='D', directed=False, unweighted=True)
            dist.setflags(write=False)
            with self._lock:
                self._distances = dist
        return self._distances

    def distances_from(self, sources: Sequence[int], limit: float = np.inf) -> np.ndarray:
        """Gaifman distances from each source, np.inf beyond limit"""
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        if not sources.size:
            return np.zeros((0, self.n))
        return np.atleast_2d(dijkstra(self.adjacency, directed=False, indices=sources,
                                      unweighted=True, limit=limit))

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.n else 0

    def components(self) -> np.ndarray:
        """Connected-component label per vertex"""
        _, labels = connected_components(self.adjacency, directed=False)
        return labels

    def relation_keys(self, name: str) -> np.ndarray:
        """Sorted integer encoding of a relation's tuples (base-n digits)"""
        keys = self._keys.get(name)
        if keys is None:
            arity = self.signature.arity(name)
            if arity * np.log2(max(self.n, 2)) > 62:
                raise InputError(f"relation '{name}' is too wide to encode on {self.n} vertices")
            tuples = self.relations.get(name, frozenset())
            if tuples:
                arr = np.array(sorted(tuples), dtype=np.int64)
                powers = self.n ** np.arange(arity, dtype=np.int64)
                keys = np.sort(arr @ powers)
            else:
                keys = np.zeros(0, dtype=np.int64)
            with self._lock:
                self._keys[name] = keys
        return keys

    def relation_mask(self, name: str) -> np.ndarray:
        """Boolean vertex mask of a unary relation"""
        if self.signature.arity(name) != 1:
            raise InputError(f"relation '{name}' is not unary")
        mask = np.zeros(self.n, dtype=bool)
        ids = [t[0] for t in self.relations.get(name, ())]
        mask[ids] = True
        return mask

    # -- comparison and export ----------------------------------------------

    def __eq__(self, other) -> bool:
        return (isinstance(other, Structure) and self.n == other.n
                and self.signature == other.signature
                and self.relations == other.relations
                and np.array_equal(self.weights, other.weights))

    def __repr__(self) -> str:
        sizes = {name: len(t) for name, t in self.relations.items()}
        return f"Structure(n={self.n}, relations={sizes})"

    def to_dict(self) -> Dict:
        uniform = np.allclose(self.weights, 1.0 / self.n, rtol=0, atol=1e-15)
        return {
            'n': self.n,
            'weights': 'uniform' if uniform else [float(w) for w in self.weights],
            'relations': {
                name: {
                    'arity': self.signature.arity(name),
                    'tuples': [list(t) for t in sorted(self.relations[name])],
                }
                for name in self.signature.arities
            },
            'marks': sorted(self.signature.marks),
        }


def _normalise_weights(weights, n: int) -> np.ndarray:
    if weights is None or (isinstance(weights, str) and weights == 'uniform'):
        out = np.full(n, 1.0 / n)
    elif isinstance(weights, str):
        raise InputError(f"weights must be 'uniform' or a list, got '{weights}'")
    else:
        out = np.asarray(weights, dtype=float).copy()
        if out.shape != (n,):
            raise InputError(f"expected {n} weights, got {out.size}")
        if not np.all(np.isfinite(out)) or np.any(out < 0):
            bad = int(np.flatnonzero(~np.isfinite(out) | (out < 0))[0])
            raise InputError(f"weight of vertex {bad} is negative or not finite")
        total = out.sum()
        if abs(total - 1.0) > WEIGHT_TOL:
            raise InputError(f"weights sum to {total!r}, expected 1")
    out.setflags(write=False)
    return out


def _gaifman(n: int, relations: Dict[str, frozenset]) -> sparse.csr_matrix:
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    for tuples in relations.values():
        if not tuples:
            continue
        arr = np.array(list(tuples), dtype=np.int64)
        k = arr.shape[1]
        for a in range(k):
            for b in range(k):
                if a != b:
                    keep = arr[:, a] != arr[:, b]
                    rows.append(arr[keep, a])
                    cols.append(arr[keep, b])
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=np.int64)
    adj = sparse.coo_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(n, n)).tocsr()
    adj.data[:] = 1
    adj.sum_duplicates()
    adj.data[:] = 1
    return adj


# -- vertex sets --------------------------------------------------------------

def as_mask(A: Structure, X: VertexLike) -> VertexSet:
    """Validate X as a subset of A's domain and return a boolean mask"""
    if X is None:
        return np.zeros(A.n, dtype=bool)
    if isinstance(X, np.ndarray) and X.dtype == bool:
        if X.shape != (A.n,):
            raise InputError(f"vertex mask has shape {X.shape}, expected ({A.n},)")
        return X
    ids = np.asarray(list(X) if not isinstance(X, np.ndarray) else X, dtype=np.int64).ravel()
    if ids.size and (ids.min() < 0 or ids.max() >= A.n):
        bad = int(ids[(ids < 0) | (ids >= A.n)][0])
        raise InputError(f"vertex id {bad} out of range 0..{A.n - 1}")
    mask = np.zeros(A.n, dtype=bool)
    mask[ids] = True
    return mask


def ball(A: Structure, X: VertexLike, d: int) -> VertexSet:
    """Closed d-neighbourhood of X in the Gaifman graph"""
    if d < 0:
        raise InputError(f"radius must be non-negative, got {d}")
    mask = as_mask(A, X).copy()
    frontier = mask
    for _ in range(int(d)):
        reached = (A.adjacency @ frontier.astype(np.int32)) > 0
        frontier = reached & ~mask
        if not frontier.any():
            break
        mask |= frontier
    return mask


def outer_boundary(A: Structure, X: VertexLike) -> VertexSet:
    mask = as_mask(A, X)
    return ball(A, mask, 1) & ~mask


def measure(A: Structure, X: VertexLike) -> float:
    return float(A.weights[as_mask(A, X)].sum())


def induce(A: Structure, X: VertexLike) -> Structure:
    """Substructure on X, reindexed in ascending id order, weights renormalised"""
    mask = as_mask(A, X)
    total = measure(A, mask)
    if total <= 0:
        raise DomainError("cannot induce on a set of measure zero")
    ids = np.flatnonzero(mask)
    new_id = -np.ones(A.n, dtype=np.int64)
    new_id[ids] = np.arange(ids.size)
    relations = {}
    for name, tuples in A.relations.items():
        relations[name] = [tuple(int(new_id[v]) for v in t) for t in tuples if all(mask[v] for v in t)]
    weights = A.weights[ids] / total
    weights = weights / weights.sum()
    return Structure(int(ids.size), relations, weights, signature=A.signature)


def remove(A: Structure, X: VertexLike) -> Structure:
    """A − X, defined when ν(X) < 1"""
    return induce(A, ~as_mask(A, X))


def weighted_sum(parts: Sequence[Tuple[float, Structure]]) -> Structure:
    """Disjoint union with ν = Σ λ_i ν_i"""
    if not parts:
        raise InputError("weighted sum of no structures")
    lambdas = np.array([float(lam) for lam, _ in parts])
    if np.any(lambdas < 0) or abs(lambdas.sum() - 1.0) > WEIGHT_TOL:
        raise InputError(f"weighted-sum coefficients must be non-negative and sum to 1, got {lambdas.sum()!r}")

    arities: Dict[str, int] = {}
    marks = set()
    for _, part in parts:
        for name, arity in part.signature.arities.items():
            if arities.setdefault(name, arity) != arity:
                raise InputError(f"relation '{name}' has conflicting arities across parts")
        marks |= part.signature.marks
    signature = Signature(arities, marks)

    relations: Dict[str, List[Tuple[int, ...]]] = {name: [] for name in arities}
    weights = []
    offset = 0
    for lam, part in parts:
        for name, tuples in part.relations.items():
            relations[name].extend(tuple(v + offset for v in t) for t in tuples)
        weights.append(lam * part.weights)
        offset += part.n
    weights = np.concatenate(weights)
    weights = weights / weights.sum()
    return Structure(offset, relations, weights, signature=signature)


def mark(A: Structure, name: str, X: VertexLike) -> Structure:
    """Conservative lift: add (or overwrite) the unary mark `name` = X"""
    mask = as_mask(A, X)
    signature = A.signature.with_mark(name)
    relations = dict(A.relations)
    relations[name] = [(int(v),) for v in np.flatnonzero(mask)]
    return Structure(A.n, relations, A.weights, signature=signature)


def shadow(A: Structure, names: Optional[Iterable[str]] = None) -> Structure:
    """Forget the given marks (all marks by default)"""
    names = set(A.signature.marks if names is None else names)
    relations = {k: v for k, v in A.relations.items() if k not in names}
    return Structure(A.n, relations, A.weights, signature=A.signature.without(names))


def ball_measure_table(A: Structure, dmax: int) -> np.ndarray:
    """D[v, d] = ν(ball^d(v)) for d = 0..dmax, from radius-limited searches in batches"""
    cached = A._tables.get(dmax)
    if cached is not None:
        return cached
    width = dmax + 1
    counts = np.zeros(A.n * width)
    for start in range(0, A.n, DISTANCE_BATCH):
        rows = A.distances_from(np.arange(start, min(start + DISTANCE_BATCH, A.n)), limit=dmax)
        r, c = np.nonzero(np.isfinite(rows))
        index = (start + r) * width + rows[r, c].astype(np.int64)
        counts += np.bincount(index, weights=A.weights[c], minlength=A.n * width)
    table = np.minimum(np.cumsum(counts.reshape(A.n, width), axis=1), 1.0)
    table.setflags(write=False)
    with A._lock:
        A._tables[dmax] = table
    return table
