"""Seeded synthetic sequence families with known spectra and cluster labels.

Every family builds graphs over a single symmetric relation `adj`. The
annotation of each index carries the true atoms (λ, N), the residual mass
and one label per vertex: `C<i>` for the i-th component cluster, `E<i>`
for expander components, `R` for residual vertices and `S` for separator
vertices.
"""
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from src.structures.structure import Signature, Structure
from src.utils.errors import InputError
from src.utils.logger import get_logger

logger = get_logger(__name__)

RELATION = 'adj'
SIGNATURE = Signature({RELATION: 2})
MAX_ATTEMPTS = 1000
STAR_CAP = 64


@dataclass
class GeneratedStructure:
    structure: Structure
    annotation: Dict


@dataclass
class Family:
    name: str
    builder: Callable[[int, Dict, int], GeneratedStructure]
    defaults: Dict
    description: str
    ground_truth: str
    min_index: int = 1


@dataclass
class GeneratorSpec:
    family: str
    params: Dict = field(default_factory=dict)
    index_range: Tuple[int, int] = (1, 10)
    seed: int = 0

    def validate(self) -> 'GeneratorSpec':
        """Check the family and range, fill in default parameters"""
        info = _REGISTRY.get(self.family)
        if info is None:
            raise InputError(f"unknown generator family '{self.family}' (known: {', '.join(sorted(_REGISTRY))})")
        unknown = set(self.params) - set(info.defaults)
        if unknown:
            raise InputError(f"family '{self.family}' has no parameters {sorted(unknown)}")
        n0, n1 = (int(v) for v in self.index_range)
        if n0 > n1:
            raise InputError(f"empty index range {n0}..{n1}")
        if n0 < info.min_index:
            raise InputError(f"family '{self.family}' starts at index {info.min_index}, got {n0}")
        if self.seed < 0:
            raise InputError("seed must be non-negative")
        self.index_range = (n0, n1)
        self.params = {**info.defaults, **self.params}
        return self

    def key(self) -> str:
        return json.dumps({'family': self.family, 'params': self.params, 'seed': self.seed},
                          sort_keys=True, default=list)


def generate(spec: GeneratorSpec, n: int) -> GeneratedStructure:
    """Structure at index n with its ground-truth annotation"""
    spec.validate()
    n0, n1 = spec.index_range
    if not n0 <= n <= n1:
        raise InputError(f"index {n} outside the generator range {n0}..{n1}")
    return _generate(spec.key(), int(n))


@lru_cache(maxsize=256)
def _generate(key: str, n: int) -> GeneratedStructure:
    data = json.loads(key)
    info = _REGISTRY[data['family']]
    return info.builder(n, data['params'], data['seed'])


def families() -> List[Dict]:
    return [{'name': f.name, 'params': dict(f.defaults), 'description': f.description,
             'ground_truth': f.ground_truth, 'min_index': f.min_index}
            for f in sorted(_REGISTRY.values(), key=lambda f: f.name)]


# -- building blocks --

class _Builder:
    """Accumulates vertices, weights, edges and labels"""

    def __init__(self):
        self.n = 0
        self.weights: List[float] = []
        self.labels: List[str] = []
        self.edges: List[Tuple[int, int]] = []

    def add(self, count: int, mass: float, label: str) -> List[int]:
        ids = list(range(self.n, self.n + count))
        self.n += count
        self.weights.extend([mass / count] * count)
        self.labels.extend([label] * count)
        return ids

    def connect(self, a: int, b: int):
        self.edges.append((a, b))
        self.edges.append((b, a))

    def clique(self, ids: Sequence[int]):
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                self.connect(a, b)

    def path(self, ids: Sequence[int]):
        for a, b in zip(ids, ids[1:]):
            self.connect(a, b)

    def build(self, atoms: List[Tuple[float, int]], residual: float) -> GeneratedStructure:
        weights = np.array(self.weights)
        A = Structure(self.n, {RELATION: self.edges}, weights / weights.sum(), signature=SIGNATURE)
        annotation = {
            'atoms': [{'lambda': float(lam), 'count': int(k)} for lam, k in atoms],
            'residual_mass': float(residual),
            'labels': list(self.labels),
        }
        return GeneratedStructure(A, annotation)


def _measures(params: Dict) -> List[float]:
    measures = [float(m) for m in params['measures']]
    if not measures or any(m <= 0 for m in measures):
        raise InputError(f"component measures must be positive, got {measures}")
    return measures


def _atoms(measures: Sequence[float]) -> List[Tuple[float, int]]:
    counts: Dict[float, int] = {}
    for m in measures:
        key = round(m, 12)
        counts[key] = counts.get(key, 0) + 1
    return sorted(counts.items(), key=lambda item: -item[0])


def random_regular(count: int, degree: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Simple connected degree-regular graph by the configuration model with rejection"""
    if count * degree % 2 or degree >= count:
        raise InputError(f"no simple {degree}-regular graph on {count} vertices")
    stubs = np.repeat(np.arange(count), degree)
    for attempt in range(1, MAX_ATTEMPTS + 1):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        ordered = np.sort(pairs, axis=1)
        if np.unique(ordered, axis=0).shape[0] != ordered.shape[0]:
            continue
        if not _connected(count, ordered):
            continue
        logger.debug(f"🔄 {degree}-regular graph on {count} vertices after {attempt} attempts")
        return [tuple(int(v) for v in edge) for edge in ordered]
    raise InputError(f"configuration model found no simple connected graph in {MAX_ATTEMPTS} attempts")


def _connected(count: int, edges: np.ndarray) -> bool:
    parent = list(range(count))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v
    for a, b in edges:
        parent[find(int(a))] = find(int(b))
    return len({find(v) for v in range(count)}) == 1


def _expander_size(n: int, params: Dict) -> int:
    size = int(params['c']) * n
    if size * int(params['degree']) % 2:
        size += 1
    return max(size, int(params['degree']) + 1)


def _expander_edges(n: int, params: Dict, seed: int) -> Tuple[int, List[Tuple[int, int]]]:
    size = _expander_size(n, params)
    rng = np.random.default_rng([seed, n])
    return size, random_regular(size, int(params['degree']), rng)


# -- families --

def _clique_pair(n: int, params: Dict, seed: int) -> GeneratedStructure:
    measures = _measures(params)
    if abs(sum(measures) - 1.0) > 1e-9:
        raise InputError(f"clique measures must sum to 1, got {sum(measures)}")
    b = _Builder()
    for i, m in enumerate(measures):
        b.clique(b.add(n + i, m, f"C{i + 1}"))
    return b.build(_atoms(measures), 0.0)


def _clique_pair_residual(n: int, params: Dict, seed: int) -> GeneratedStructure:
    measures = _measures(params)
    residual = float(params['residual'])
    if residual <= 0 or abs(sum(measures) + residual - 1.0) > 1e-9:
        raise InputError(f"clique measures plus residual must sum to 1, got {sum(measures) + residual}")
    length = n * n if params['path'] == 'square' else int(params['path'])
    if length < 2:
        raise InputError("residual paths need at least two vertices")
    b = _Builder()
    cliques = [b.add(n + i, m, f"C{i + 1}") for i, m in enumerate(measures)]
    for ids in cliques:
        b.clique(ids)
    links = max(1, len(cliques) - 1)
    for j in range(links):
        ids = b.add(length, residual / links, 'R')
        b.path(ids)
        b.labels[ids[0]] = 'S'
        b.connect(cliques[j][0], ids[0])
        if j + 1 < len(cliques):
            b.labels[ids[-1]] = 'S'
            b.connect(ids[-1], cliques[j + 1][0])
    return b.build(_atoms(measures), residual)


def _cycle(n: int, params: Dict, seed: int) -> GeneratedStructure:
    b = _Builder()
    ids = b.add(2 * n, 1.0, 'R')
    b.path(ids)
    b.connect(ids[-1], ids[0])
    return b.build([], 1.0)


def _star_forest(n: int, params: Dict, seed: int) -> GeneratedStructure:
    count = 2 ** n
    raw = [(2.0 ** -i + 2.0 ** -n) / 2 for i in range(1, count + 1)]
    total = sum(raw)
    b = _Builder()
    for i, w in enumerate(raw, start=1):
        size = min(max(math.ceil(STAR_CAP * w / raw[0]), 2), STAR_CAP)
        ids = b.add(size, w / total, f"C{i}")
        for leaf in ids[1:]:
            b.connect(ids[0], leaf)
    atoms = [(2.0 ** -(i + 1), 1) for i in range(1, n + 1)]
    return b.build(atoms, 1.0 - sum(lam for lam, _ in atoms))


def _expander(n: int, params: Dict, seed: int) -> GeneratedStructure:
    size, edges = _expander_edges(n, params, seed)
    b = _Builder()
    ids = b.add(size, 1.0, 'E1')
    for u, v in edges:
        b.connect(ids[u], ids[v])
    return b.build([], 1.0)


def _expander_union(n: int, params: Dict, seed: int) -> GeneratedStructure:
    """Three copies of E_n for odd n, E_n and E_2n for even n, uniform measure"""
    parts = [n, n, n] if n % 2 else [n, 2 * n]
    graphs = {m: _expander_edges(m, params, seed) for m in set(parts)}
    total = sum(graphs[m][0] for m in parts)
    b = _Builder()
    for j, m in enumerate(parts, start=1):
        size, edges = graphs[m]
        ids = b.add(size, size / total, f"E{j}")
        for u, v in edges:
            b.connect(ids[u], ids[v])
    return b.build([], 1.0)


def _linked_components(n: int, params: Dict, seed: int) -> GeneratedStructure:
    """k cycles C_2n chained by paths of ⌈√n⌉ vertices, uniform measure"""
    k = int(params['components'])
    if k < 1:
        raise InputError("linked-components needs at least one component")
    link = math.ceil(math.sqrt(n))
    b = _Builder()
    cycles = []
    for i in range(k):
        ids = b.add(2 * n, 2.0 * n, f"C{i + 1}")
        b.path(ids)
        b.connect(ids[-1], ids[0])
        cycles.append(ids)
    for i in range(k - 1):
        ids = b.add(link, float(link), 'R')
        b.path(ids)
        b.connect(cycles[i][0], ids[0])
        b.connect(ids[-1], cycles[i + 1][0])
    return b.build([], 1.0)


_REGISTRY: Dict[str, Family] = {f.name: f for f in [
    Family('clique-pair', _clique_pair, {'measures': [0.5, 0.5]},
           "cliques of sizes n, n+1, ... with the given total measures, uniform inside each",
           "one atom per distinct measure, count = multiplicity; no residual", min_index=1),
    Family('clique-pair-residual', _clique_pair_residual,
           {'measures': [0.5, 0.3], 'residual': 0.2, 'path': 'square'},
           "cliques as in clique-pair chained by paths of n^2 vertices carrying the residual measure",
           "atoms = clique measures; residual = path measure; path ends adjacent to cliques are separators",
           min_index=2),
    Family('cycle', _cycle, {}, "cycle C_2n, uniform", "no atoms; pure residual", min_index=2),
    Family('star-forest', _star_forest, {},
           "2^n stars, star i of total weight (2^-i + 2^-n)/2 (normalised) on at most 64 vertices",
           "atoms 2^-(i+1), one star each; residual 1/2 plus the unlisted atoms", min_index=1),
    Family('expander', _expander, {'c': 8, 'degree': 3},
           "seeded connected random degree-regular graph on c*n vertices",
           "no atoms; one open (expanding) cluster", min_index=1),
    Family('expander-union', _expander_union, {'c': 8, 'degree': 3},
           "three copies of E_n for odd n, E_n and E_2n for even n, uniform",
           "no atoms; components are open clusters whose measures do not converge", min_index=1),
    Family('linked-components', _linked_components, {'components': 2},
           "cycles C_2n chained by paths of ceil(sqrt(n)) vertices, uniform",
           "no atoms; each cycle is a residual cluster, links are negligible", min_index=1),
]}
