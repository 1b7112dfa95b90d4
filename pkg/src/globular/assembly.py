"""Assembly of the marked clustering from a spectrum and its schedule.

Per index and per scheduled atom: Z keeps the vertices whose ball measures
sit inside the active brackets, S picks centers of Z greedily by ascending
id, and C is the 2δ-ball of the centers. Outer boundaries of the C sets and
the leftover high-measure vertices form the separator; everything else is
residual. Each C is split into connected parts, and parts with the same
battery statistics share a subgroup.
"""
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.sparse.csgraph import connected_components

from config import Config
from src.logic.batteries import Battery, standard_battery
from src.logic.evaluator import stone_pairing
from src.sequences.sequence import StructureSequence, SubsetSequence, tail_window
from src.spectrum.detection import SpectrumReport
from src.globular.schedule import AtomSchedule, Schedule
from src.structures.structure import (
    Structure, ball, ball_measure_table, induce, mark, measure, outer_boundary,
)
from src.utils.errors import DomainError, InputError
from src.utils.logger import get_logger
from src.utils.parallel import ordered_map

logger = get_logger(__name__)

RESIDUAL = 'M_R'
SEPARATOR = 'M_S'
UNMARKED = '-'
_GLOBULAR = re.compile(r'^M_(\d+)_(\d+)_(\d+)$')
_COMBED = re.compile(r'^M_(\d+)$')


def globular_mark(i: int, j: int, k: int) -> str:
    return f"M_{i}_{j}_{k}"


def parse_globular(name: str) -> Optional[Tuple[int, int, int]]:
    found = _GLOBULAR.match(name)
    return tuple(int(g) for g in found.groups()) if found else None


def _mark_order(name: str):
    if name == UNMARKED:
        return (0,)
    if name == RESIDUAL:
        return (1,)
    if name == SEPARATOR:
        return (2,)
    found = _GLOBULAR.match(name) or _COMBED.match(name)
    if found:
        return (3,) + tuple(int(g) for g in found.groups())
    return (4, name)


@dataclass
class ClusteringResult:
    """Per-index vertex labels with the evidence gathered while building them"""
    kind: str
    indices: List[int]
    window: List[int]
    labels: Dict[int, np.ndarray]
    atoms: List[Dict] = field(default_factory=list)
    centers: Dict[int, Dict[int, List[int]]] = field(default_factory=dict)
    clip: Dict[int, Dict[str, int]] = field(default_factory=dict)
    checks: List[Dict] = field(default_factory=list)
    measures: Optional[pd.DataFrame] = None
    notes: List[str] = field(default_factory=list)

    @property
    def status(self) -> str:
        failed = [c for c in self.checks if not c['passed'] and c['in_window']]
        return 'diagnostic' if failed else 'verified'

    def violations(self, window_only: bool = False) -> List[Dict]:
        return [c for c in self.checks if not c['passed'] and (c['in_window'] or not window_only)]

    def marks(self) -> List[str]:
        names = set()
        for labels in self.labels.values():
            names.update(str(v) for v in np.unique(labels))
        return sorted(names, key=_mark_order)

    def codes(self, n: int) -> np.ndarray:
        """One byte per vertex: position of its label in marks()"""
        table = self.marks()
        if len(table) > 255:
            raise InputError(f"{len(table)} marks do not fit the one-byte label encoding")
        lookup = {name: code for code, name in enumerate(table)}
        return np.array([lookup[str(v)] for v in self.labels[n]], dtype=np.uint8)

    def mask(self, n: int, name: str) -> np.ndarray:
        return self.labels[n] == name

    def subset(self, S: StructureSequence, name: str) -> SubsetSequence:
        return SubsetSequence(S, lambda n, A: self.mask(n, name), name)

    def marked_structure(self, S: StructureSequence, n: int) -> Structure:
        """A_n lifted by one unary mark per label of the mark table"""
        A = S[n]
        for name in self.marks():
            if name != UNMARKED:
                A = mark(A, name, self.mask(n, name))
        return A

    def unmarked_mass(self, n: int) -> float:
        if self.measures is None or UNMARKED not in self.measures.columns:
            return 0.0
        return float(self.measures.loc[n, UNMARKED])

    def to_dict(self) -> Dict:
        violations = self.violations()
        return {
            'kind': self.kind,
            'status': self.status,
            'marks': self.marks(),
            'window': list(self.window),
            'labels': {str(n): [int(c) for c in self.codes(n)] for n in self.indices},
            'atoms': self.atoms,
            'centers': {str(i): {str(n): ids for n, ids in per.items()} for i, per in self.centers.items()},
            'clip': {str(n): v for n, v in self.clip.items()},
            'measures': ({str(n): {k: float(v) for k, v in row.items()} for n, row in self.measures.iterrows()}
                         if self.measures is not None else {}),
            'checks': {'total': len(self.checks), 'failed': len(violations)},
            'violations': violations,
            'notes': list(self.notes),
        }


def measure_table(S: StructureSequence, labels: Dict[int, np.ndarray]) -> pd.DataFrame:
    """ν of every label at every index (zero where a label is absent)"""
    rows = {}
    for n, names in labels.items():
        weights = S[n].weights
        rows[n] = {str(name): float(weights[names == name].sum()) for name in np.unique(names)}
    table = pd.DataFrame.from_dict(rows, orient='index').fillna(0.0)
    table.index.name = 'n'
    return table[sorted(table.columns, key=_mark_order)].sort_index()


def check(checks: List[Dict], n: Optional[int], name: str, passed: bool, value: float,
          bound: float, window: List[int], atom: Optional[int] = None):
    checks.append({'index': n, 'check': name, 'atom': atom, 'value': float(value),
                   'bound': float(bound), 'passed': bool(passed),
                   'in_window': n is None or n in window})


def build_Z(A: Structure, n: int, atom: AtomSchedule, z: int, table: Optional[np.ndarray] = None) -> np.ndarray:
    """Vertices with D_{8δ_z}(v) ≤ β_z and D_{δ_z'}(v) > α_z' for every level z' ≤ z"""
    level = atom.level(z)
    if n < level.eta:
        return np.zeros(A.n, dtype=bool)
    reach = 8 * level.delta
    if table is None or table.shape[1] <= reach:
        table = ball_measure_table(A, reach)
    Z = table[:, reach] <= level.beta
    for lower in atom.levels:
        if lower.z <= z:
            Z &= table[:, lower.delta] > lower.alpha
    return Z


def build_centers(A: Structure, Z: np.ndarray, separation: int) -> np.ndarray:
    """Maximal subset of Z at pairwise distance ≥ separation, greedy by ascending id"""
    blocked = np.zeros(A.n, dtype=bool)
    centers = []
    for v in np.flatnonzero(Z):
        if blocked[v]:
            continue
        centers.append(int(v))
        blocked |= ball(A, [v], max(separation - 1, 0))
    return np.array(centers, dtype=np.int64)


def part_statistics(A: Structure, part: np.ndarray, battery: Battery) -> np.ndarray:
    try:
        B = induce(A, part)
    except DomainError:
        return np.full(len(battery), np.nan)
    return np.array([stone_pairing(B, phi) for _, phi in battery])


def split_parts(A: Structure, C: np.ndarray, battery: Battery, tol: float) -> List[List[np.ndarray]]:
    """Connected parts of A[C] grouped by battery statistics within tol"""
    ids = np.flatnonzero(C)
    if ids.size == 0:
        return []
    count, labels = connected_components(A.adjacency[ids][:, ids], directed=False)
    parts = []
    for c in range(count):
        part = np.zeros(A.n, dtype=bool)
        part[ids[labels == c]] = True
        parts.append(part)
    parts.sort(key=lambda p: int(np.flatnonzero(p)[0]))

    groups: List[Tuple[np.ndarray, List[np.ndarray]]] = []
    for part in parts:
        stats = part_statistics(A, part, battery)
        for representative, members in groups:
            if np.all(np.abs(representative - stats) < tol):
                members.append(part)
                break
        else:
            groups.append((stats, [part]))
    groups.sort(key=lambda g: tuple(np.round(np.nan_to_num(-g[0], nan=1.0), 6)))
    return [members for _, members in groups]


def _assemble_index(n: int, A: Structure, schedule: Schedule, battery: Battery, tol: float):
    window = schedule.window
    checks: List[Dict] = []
    labels = np.full(A.n, RESIDUAL, dtype=object)
    table = ball_measure_table(A, schedule.table_radius)
    clusters: Dict[int, np.ndarray] = {}
    centers: Dict[int, List[int]] = {}
    high = np.zeros(A.n, dtype=bool)
    active = []

    for i, atom in enumerate(schedule.atoms, start=1):
        level = atom.active(n)
        if level is None:
            continue
        active.append((i, atom, level))
        Z = build_Z(A, n, atom, level.z, table)
        S_i = build_centers(A, Z, 7 * level.delta)
        C = ball(A, S_i, 2 * level.delta) if S_i.size else np.zeros(A.n, dtype=bool)
        clusters[i] = C
        centers[i] = [int(v) for v in S_i]
        high |= table[:, level.delta] > level.alpha

        scale = atom.mass / atom.value
        check(checks, n, 'core-inside', not (Z & ~C).any(), measure(A, Z & ~C), 0.0, window, i)
        check(checks, n, 'centers', S_i.size == atom.count, S_i.size, atom.count, window, i)
        gap = abs(measure(A, C) - atom.mass)
        check(checks, n, 'measure', gap < 2.0 ** -level.z * scale, gap, 2.0 ** -level.z * scale, window, i)
        rim = measure(A, ball(A, outer_boundary(A, C), level.delta))
        check(checks, n, 'boundary', rim < 2.0 ** (1 - level.z) * scale, rim, 2.0 ** (1 - level.z) * scale, window, i)

    for a, (i, atom, level) in enumerate(active):
        for i2, atom2, level2 in active[a + 1:]:
            gap = abs(atom.value - atom2.value)
            needed = math.ceil(1 - math.log2(gap))
            if min(level.z, level2.z) >= needed:
                overlap = clusters[i] & clusters[i2]
                check(checks, n, 'disjoint', not overlap.any(), measure(A, overlap), 0.0, window, i)

    covered = np.zeros(A.n, dtype=bool)
    boundary = np.zeros(A.n, dtype=bool)
    for C in clusters.values():
        covered |= C
    for C in clusters.values():
        boundary |= outer_boundary(A, C)
    labels[(boundary | high) & ~covered] = SEPARATOR

    for i, C in clusters.items():
        for j, members in enumerate(split_parts(A, C, battery, tol), start=1):
            for k, part in enumerate(members, start=1):
                labels[part] = globular_mark(i, j, k)
    return labels.astype(str), centers, checks, len(active)


def assemble_clustering(S: StructureSequence, report: SpectrumReport, schedule: Schedule,
                        battery: Optional[Battery] = None, tol: Optional[float] = None,
                        workers: Optional[int] = None) -> ClusteringResult:
    tol = Config.TOL if tol is None else tol
    workers = Config.PARALLELISM if workers is None else workers
    if battery is None:
        battery = standard_battery(S[S.indices[0]].signature)
    window = schedule.window or tail_window(S.indices)

    parts = ordered_map(lambda n: _assemble_index(n, S[n], schedule, battery, tol), S.indices, workers)
    result = ClusteringResult('assembly', list(S.indices), list(window), {})
    for n, (labels, centers, checks, active) in zip(S.indices, parts):
        result.labels[n] = labels
        result.checks.extend(checks)
        result.clip[n] = {'F': active, 'G': active}
        for i, ids in centers.items():
            result.centers.setdefault(i, {})[n] = ids
    result.atoms = [a.to_dict() for a in schedule.atoms]
    result.measures = measure_table(S, result.labels)

    # the globular marks and the residual mass should account for the whole measure
    globular = [c for c in result.measures.columns if parse_globular(c)]
    marked = float(result.measures.loc[window, globular].sum(axis=1).mean()) if globular else 0.0
    total = marked + report.residual_mass
    check(result.checks, None, 'partition', abs(total - 1.0) <= tol, total, 1.0, window)

    result.notes.extend(schedule.warnings)
    for violation in result.violations(window_only=True):
        logger.warning(f"⚠️ {violation['check']} fails at n={violation['index']} "
                       f"(value {violation['value']:.4g}, bound {violation['bound']:.4g})")
    icon = '✅' if result.status == 'verified' else '⚠️'
    logger.info(f"{icon} clustering {result.status}: {len(result.marks())} marks over {len(S)} indices")
    return result
