import json
import math
import os
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import Config
from src.generators.families import GeneratorSpec, generate
from src.logic.evaluator import satisfaction_set, stone_pairing
from src.logic.formula import Formula, arity
from src.structures.io import load_structure
from src.structures.structure import Structure, as_mask, induce, mark
from src.utils.errors import InputError
from src.utils.logger import get_logger
from src.utils.parallel import ordered_map

logger = get_logger(__name__)


def tail_window(indices: Sequence[int], fraction: Optional[float] = None) -> List[int]:
    """Last ⌈fraction · count⌉ indices"""
    fraction = Config.WINDOW_FRACTION if fraction is None else fraction
    indices = list(indices)
    if not indices:
        return []
    size = max(1, math.ceil(fraction * len(indices)))
    return indices[-size:]


def _natural_key(label: str):
    stem = label.rstrip('0123456789')
    return stem, int(label[len(stem):] or 0)


class StructureSequence:
    """Lazily indexed family of structures, cached per index"""

    def __init__(self, provider: Callable[[int], Structure], indices: Iterable[int],
                 description: Optional[Dict] = None,
                 annotator: Optional[Callable[[int], Dict]] = None):
        self.provider = provider
        self.indices = sorted(int(n) for n in indices)
        if not self.indices:
            raise InputError("a structure sequence needs at least one index")
        if len(set(self.indices)) != len(self.indices):
            raise InputError("sequence indices must be distinct")
        self.description = description or {'provider': 'callable'}
        self.annotator = annotator
        self._cache: Dict[int, Structure] = {}
        self._lock = threading.Lock()
        self._signature = None

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, n: int) -> bool:
        return n in self._cache or n in set(self.indices)

    def __getitem__(self, n: int) -> Structure:
        if n not in self.indices:
            raise InputError(f"index {n} outside the sequence range {self.indices[0]}..{self.indices[-1]}")
        with self._lock:
            cached = self._cache.get(n)
        if cached is not None:
            return cached
        A = self.provider(n)
        with self._lock:
            A = self._cache.setdefault(n, A)
            if self._signature is None:
                self._signature = A.signature
            elif A.signature.without(A.signature.marks) != self._signature.without(self._signature.marks):
                raise InputError(f"structure at index {n} does not share the sequence signature")
        return A

    def items(self) -> Iterable[Tuple[int, Structure]]:
        for n in self.indices:
            yield n, self[n]

    def window(self, fraction: Optional[float] = None) -> List[int]:
        return tail_window(self.indices, fraction)

    def annotation(self, n: int) -> Optional[Dict]:
        return self.annotator(n) if self.annotator else None

    def annotation_labels(self) -> List[str]:
        """Ground-truth labels used anywhere in the sequence, in natural order"""
        names = set()
        for n in self.indices:
            annotation = self.annotation(n) or {}
            names.update(annotation.get('labels', ()))
        return sorted(names, key=_natural_key)

    def map(self, fn: Callable[[int, Structure], object], workers: Optional[int] = None) -> List:
        """Apply fn(n, A_n) over all indices, in index order"""
        workers = Config.PARALLELISM if workers is None else workers
        return ordered_map(lambda n: fn(n, self[n]), self.indices, workers)

    def subsequence(self, indices: Sequence[int]) -> 'StructureSequence':
        """𝗔_f for an increasing index map f"""
        indices = list(indices)
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise InputError("subsequence indices must be strictly increasing")
        missing = [n for n in indices if n not in self.indices]
        if missing:
            raise InputError(f"indices {missing} are not in the sequence")
        description = dict(self.description)
        description['subsequence'] = indices
        return StructureSequence(self.__getitem__, indices, description, self.annotator)

    def marked(self, name: str, X: 'SubsetSequence') -> 'StructureSequence':
        """Lifted sequence mark(A_n, name, X_n)"""
        X.check_aligned(self)
        return StructureSequence(lambda n: mark(self[n], name, X[n]), self.indices,
                                 {'lift_of': self.description, 'mark': name})

    def induced(self, X: 'SubsetSequence') -> 'StructureSequence':
        X.check_aligned(self)
        return StructureSequence(lambda n: induce(self[n], X[n]), self.indices,
                                 {'induced_from': self.description})

    # -- constructors --

    @classmethod
    def from_files(cls, paths: Sequence[str], indices: Optional[Sequence[int]] = None) -> 'StructureSequence':
        paths = list(paths)
        indices = list(indices) if indices is not None else list(range(len(paths)))
        if len(indices) != len(paths):
            raise InputError(f"{len(paths)} structure files but {len(indices)} indices")
        by_index = dict(zip(indices, paths))
        return cls(lambda n: load_structure(by_index[n]), indices, {'files': paths, 'indices': indices})

    @classmethod
    def from_generator(cls, family: str, params: Optional[Dict] = None,
                       index_range: Tuple[int, int] = (1, 10), seed: int = 0) -> 'StructureSequence':
        spec = GeneratorSpec(family, dict(params or {}), tuple(index_range), seed)
        spec.validate()
        n0, n1 = spec.index_range
        description = {'generator': family, 'params': spec.params, 'range': [n0, n1], 'seed': seed}
        return cls(lambda n: generate(spec, n).structure, range(n0, n1 + 1), description,
                   annotator=lambda n: generate(spec, n).annotation)

    @classmethod
    def from_manifest(cls, manifest, base_dir: str = '.') -> 'StructureSequence':
        """Manifest: a list of file paths, or {"generator", "params", "range", "seed"}"""
        if isinstance(manifest, str):
            base_dir = os.path.dirname(os.path.abspath(manifest))
            try:
                with open(manifest, 'r', encoding='utf-8') as handle:
                    manifest = json.load(handle)
            except OSError as e:
                raise InputError(f"cannot read manifest: {e}")
            except json.JSONDecodeError as e:
                raise InputError(f"manifest is not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}")

        if isinstance(manifest, list):
            manifest = {'files': manifest}
        if not isinstance(manifest, dict):
            raise InputError("manifest must be a list of files or an object")
        if 'generator' in manifest:
            index_range = manifest.get('range', [1, 10])
            if not isinstance(index_range, list) or len(index_range) != 2:
                raise InputError("manifest 'range' must be [n0, n1]")
            return cls.from_generator(manifest['generator'], manifest.get('params') or {},
                                      (int(index_range[0]), int(index_range[1])),
                                      int(manifest.get('seed', 0)))
        if 'files' in manifest:
            paths = [p if os.path.isabs(p) else os.path.join(base_dir, p) for p in manifest['files']]
            return cls.from_files(paths, manifest.get('indices'))
        raise InputError("manifest needs either 'generator' or 'files'")


class SubsetSequence:
    """Per-index vertex sets X_n ⊆ A_n"""

    def __init__(self, sequence: StructureSequence, selector: Callable[[int, Structure], object],
                 name: str = 'X'):
        self.sequence = sequence
        self.selector = selector
        self.name = name
        self._cache: Dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def indices(self) -> List[int]:
        return self.sequence.indices

    def __getitem__(self, n: int) -> np.ndarray:
        with self._lock:
            cached = self._cache.get(n)
        if cached is not None:
            return cached
        A = self.sequence[n]
        mask = as_mask(A, self.selector(n, A)).copy()
        mask.setflags(write=False)
        with self._lock:
            self._cache[n] = mask
        return mask

    def check_aligned(self, sequence: StructureSequence):
        if list(sequence.indices) != list(self.indices):
            raise InputError(f"subset sequence '{self.name}' is not aligned with the structure sequence")

    def _combine(self, other: 'SubsetSequence', op, symbol: str) -> 'SubsetSequence':
        if list(other.indices) != list(self.indices):
            raise InputError(f"cannot combine misaligned subset sequences '{self.name}' and '{other.name}'")
        return SubsetSequence(self.sequence, lambda n, A: op(self[n], other[n]),
                              f"({self.name} {symbol} {other.name})")

    def __or__(self, other):
        return self._combine(other, np.logical_or, '∪')

    def __and__(self, other):
        return self._combine(other, np.logical_and, '∩')

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a & ~b, '∖')

    def __xor__(self, other):
        return self._combine(other, np.logical_xor, 'Δ')

    def complement(self) -> 'SubsetSequence':
        return SubsetSequence(self.sequence, lambda n, A: ~self[n], f"¬{self.name}")

    def on(self, sequence: StructureSequence) -> 'SubsetSequence':
        """The same sets viewed over another sequence with the same domains (e.g. a lift)"""
        return SubsetSequence(sequence, lambda n, A: self[n], self.name)

    # -- constructors --

    @classmethod
    def empty(cls, sequence: StructureSequence) -> 'SubsetSequence':
        return cls(sequence, lambda n, A: np.zeros(A.n, dtype=bool), '𝟬')

    @classmethod
    def full(cls, sequence: StructureSequence) -> 'SubsetSequence':
        return cls(sequence, lambda n, A: np.ones(A.n, dtype=bool), '𝗔')

    @classmethod
    def from_sets(cls, sequence: StructureSequence, sets: Dict[int, object], name: str = 'X') -> 'SubsetSequence':
        missing = [n for n in sequence.indices if n not in sets]
        if missing:
            raise InputError(f"subset sequence '{name}' has no set for indices {missing}")
        return cls(sequence, lambda n, A: sets[n], name)

    @classmethod
    def definable(cls, sequence: StructureSequence, phi: Formula, name: Optional[str] = None) -> 'SubsetSequence':
        """X_n = φ(A_n) for a formula with one free variable"""
        if arity(phi) != 1:
            raise InputError("a definable subset sequence needs a formula with one free variable")

        def select(n, A):
            return satisfaction_set(A, phi)[:, 0]
        return cls(sequence, select, name or str(phi))

    @classmethod
    def from_annotation(cls, sequence: StructureSequence, label: str) -> 'SubsetSequence':
        """Vertices carrying a ground-truth label of a generated sequence"""
        def select(n, A):
            annotation = sequence.annotation(n)
            if not annotation:
                raise InputError(f"index {n} has no ground-truth annotation")
            return np.asarray(annotation['labels']) == label
        return cls(sequence, select, label)

    @classmethod
    def from_file(cls, sequence: StructureSequence, path: str) -> 'SubsetSequence':
        """JSON object {"<index>": [vertex ids]} or a list aligned with the indices"""
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                data = json.load(handle)
        except OSError as e:
            raise InputError(f"cannot read subset file {path}: {e}")
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}")
        if isinstance(data, list):
            if len(data) != len(sequence.indices):
                raise InputError(f"{path}: {len(data)} sets for {len(sequence.indices)} indices")
            sets = dict(zip(sequence.indices, data))
        elif isinstance(data, dict):
            sets = {int(k): v for k, v in data.items()}
        else:
            raise InputError(f"{path}: expected a list or an object of vertex-id lists")
        return cls.from_sets(sequence, sets, os.path.basename(path))


@dataclass
class ConvergenceDiagnostic:
    """Battery pairings per index and their oscillation over the tail window"""
    values: pd.DataFrame
    window: List[int]

    def oscillation(self) -> pd.Series:
        tail = self.values.loc[self.window]
        return tail.max() - tail.min()

    def limits(self) -> pd.Series:
        return self.values.loc[self.window].mean()

    def passes(self, tol: Optional[float] = None) -> bool:
        tol = Config.TOL if tol is None else tol
        return bool((self.oscillation() < tol).all())

    def worst(self) -> Tuple[str, float]:
        osc = self.oscillation()
        if osc.empty:
            return '', 0.0
        name = str(osc.idxmax())
        return name, float(osc[name])


def convergence_diagnostic(sequence: StructureSequence, battery: Sequence[Tuple[str, Formula]],
                           window_fraction: Optional[float] = None,
                           workers: Optional[int] = None) -> ConvergenceDiagnostic:
    names = [name for name, _ in battery]

    def row(n, A):
        return [stone_pairing(A, phi) for _, phi in battery]

    rows = sequence.map(row, workers)
    values = pd.DataFrame(rows, index=pd.Index(sequence.indices, name='n'), columns=names)
    return ConvergenceDiagnostic(values, sequence.window(window_fraction))
