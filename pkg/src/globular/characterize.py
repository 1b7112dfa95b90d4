from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import Config
from src.globular.assembly import ClusteringResult, parse_globular
from src.sequences.negligible import negligible_profile
from src.sequences.sequence import StructureSequence, SubsetSequence
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class GlobularMatch:
    matched: bool
    group: Optional[Tuple[int, int]]
    members: Dict[int, Optional[int]] = field(default_factory=dict)
    tail_sup: Optional[float] = None
    candidates: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'matched': self.matched,
            'group': list(self.group) if self.group else None,
            'members': {str(n): k for n, k in self.members.items()},
            'tail_sup': self.tail_sup,
            'candidates': self.candidates,
        }


def _groups(result: ClusteringResult) -> Dict[Tuple[int, int], Dict[int, Dict[int, str]]]:
    """(i, j) → n → k → mark name"""
    out: Dict[Tuple[int, int], Dict[int, Dict[int, str]]] = {}
    for name in result.marks():
        parsed = parse_globular(name)
        if parsed is None:
            continue
        i, j, k = parsed
        for n in result.indices:
            if result.mask(n, name).any():
                out.setdefault((i, j), {}).setdefault(n, {})[k] = name
    return out


def characterize_globular(S: StructureSequence, X: SubsetSequence, result: ClusteringResult,
                          dmax: Optional[int] = None, tol: Optional[float] = None,
                          window_fraction: Optional[float] = None) -> GlobularMatch:
    """Find a mark group (i, j) and one member per index whose symmetric difference with X is negligible"""
    tol = Config.TOL if tol is None else tol
    X.check_aligned(S)
    best: Optional[GlobularMatch] = None
    candidates = []
    for group, per_index in sorted(_groups(result).items()):
        members: Dict[int, Optional[int]] = {}
        chosen: Dict[int, np.ndarray] = {}
        for n in S.indices:
            A, Xn = S[n], X[n]
            options = per_index.get(n, {})
            members[n] = None
            chosen[n] = np.zeros(A.n, dtype=bool)
            gap = float(A.weights[Xn].sum())
            for k, name in sorted(options.items()):
                mask = result.mask(n, name)
                diff = float(A.weights[Xn ^ mask].sum())
                if diff < gap:
                    gap, members[n], chosen[n] = diff, k, mask
        N = SubsetSequence.from_sets(S, chosen, f"G{group}")
        profile = negligible_profile(S, X ^ N, dmax, tol, window_fraction)
        sup = float(profile.tail_sup.max())
        candidates.append({'group': list(group), 'tail_sup': sup, 'negligible': profile.negligible})
        if profile.negligible and (best is None or sup < best.tail_sup):
            best = GlobularMatch(True, group, members, sup)
    if best is None:
        logger.info(f"📊 '{X.name}' matches no globular mark group")
        return GlobularMatch(False, None, candidates=candidates)
    best.candidates = candidates
    logger.info(f"✅ '{X.name}' matches group {best.group} (tail sup {best.tail_sup:.4g})")
    return best
