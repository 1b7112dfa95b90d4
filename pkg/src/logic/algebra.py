"""Weak algebra on formulas: ⊕, ⊖, ⊗ and variable renaming.

⊕ and ⊖ carry preconditions that are only semidecidable. They are checked
on a deterministic test family of small structures over the active
signature, after a cheap syntactic check.
"""
import itertools
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import Config
from src.logic.evaluator import satisfaction_set
from src.logic.formula import (
    And, Formula, Not, arity, conj, disj, free_index, free_variables, is_free_name, neg,
    relations_used, rename_free, var,
)
from src.structures.structure import Signature, Structure
from src.utils.errors import AlgebraError, InputError
from src.utils.logger import get_logger

logger = get_logger(__name__)

# exhaustive n=2 enumeration only while the tuple space stays this small
_EXHAUSTIVE_BITS = 10


def _possible_tuples(n: int, k: int):
    return list(itertools.product(range(n), repeat=k))


def witness_family(arities: Dict[str, int], cap: Optional[int] = None, seed: int = 0) -> List[Structure]:
    """Small structures over the given relations: exhaustive for n ≤ 2, then random n = 3, 4"""
    cap = cap or Config.TEST_FAMILY_CAP
    arities = dict(sorted(arities.items()))
    if not any(k >= 2 for k in arities.values()):
        # distance guards need some edges to matter
        arities['_edge'] = 2
    names = list(arities)

    family: List[Structure] = []
    for n in (1, 2):
        slots = [(name, t) for name in names for t in _possible_tuples(n, arities[name])]
        if len(slots) > _EXHAUSTIVE_BITS:
            continue
        for bits in itertools.product((False, True), repeat=len(slots)):
            relations = {name: [] for name in names}
            for (name, t), on in zip(slots, bits):
                if on:
                    relations[name].append(t)
            family.append(Structure(n, relations, 'uniform', signature=Signature(arities)))
            if len(family) >= cap // 2:
                break
        if len(family) >= cap // 2:
            break

    rng = np.random.default_rng(seed)
    while len(family) < cap:
        n = int(rng.integers(3, 5))
        relations = {}
        for name in names:
            slots = _possible_tuples(n, arities[name])
            keep = rng.random(len(slots)) < 0.35
            relations[name] = [t for t, on in zip(slots, keep) if on]
        if len(family) % 2:
            weights = rng.dirichlet(np.ones(n))
            weights = weights / weights.sum()
        else:
            weights = 'uniform'
        family.append(Structure(n, relations, weights, signature=Signature(arities)))
    return family


def _conjuncts(phi: Formula):
    return list(phi.parts) if isinstance(phi, And) else [phi]


def syntactically_disjoint(phi: Formula, psi: Formula) -> bool:
    """True when some conjunct of one is the negation of a conjunct of the other"""
    left, right = _conjuncts(phi), _conjuncts(psi)
    for a in left:
        for b in right:
            if (isinstance(a, Not) and a.body == b) or (isinstance(b, Not) and b.body == a):
                return True
    return False


def _active_family(formulas: Sequence[Formula], family: Optional[List[Structure]]) -> List[Structure]:
    if family is not None:
        return family
    arities: Dict[str, int] = {}
    for phi in formulas:
        for name, k in relations_used(phi).items():
            if arities.setdefault(name, k) != k:
                raise InputError(f"relation '{name}' used with different arities")
    return witness_family(arities)


def find_witness(phi: Formula, family: List[Structure]) -> Optional[Structure]:
    """First structure of the family on which phi is satisfiable"""
    for A in family:
        if satisfaction_set(A, phi).shape[0] > 0:
            return A
    return None


def weak_add(phi: Formula, psi: Formula, family: Optional[List[Structure]] = None) -> Formula:
    """φ ⊕ ψ = φ ∨ ψ, defined when φ ∧ ψ is unsatisfiable"""
    if not syntactically_disjoint(phi, psi):
        witness = find_witness(conj(phi, psi), _active_family([phi, psi], family))
        if witness is not None:
            raise AlgebraError(f"'{phi}' and '{psi}' are not disjoint", witness.to_dict())
        logger.debug(f"🔄 disjointness of '{phi}' and '{psi}' checked on the witness family")
    return disj(phi, psi)


def weak_sub(phi: Formula, psi: Formula, family: Optional[List[Structure]] = None) -> Formula:
    """φ ⊖ ψ = φ ∧ ¬ψ, defined when ψ implies φ"""
    if psi != phi and phi not in _conjuncts(psi):
        witness = find_witness(conj(psi, neg(phi)), _active_family([phi, psi], family))
        if witness is not None:
            raise AlgebraError(f"'{psi}' does not imply '{phi}'", witness.to_dict())
    return conj(phi, neg(psi))


def free_product(phi: Formula, psi: Formula) -> Formula:
    """φ ⊗ ψ: ψ's free variables are shifted past φ's"""
    p = arity(phi)
    names = sorted((v for v in _free_names(psi)), key=free_index)
    shifted = rename_free(psi, {name: var(free_index(name) + p) for name in names})
    return conj(phi, shifted)


def rename(phi: Formula, mapping: Dict[int, int]) -> Formula:
    """Rename free variable x_i to x_mapping[i]; the map must be injective"""
    targets = list(mapping.values())
    if len(set(targets)) != len(targets):
        raise AlgebraError(f"variable renaming {mapping} is not injective")
    if any(i < 1 for i in list(mapping) + targets):
        raise AlgebraError(f"variable indices start at 1, got {mapping}")
    full = {i: mapping.get(i, i) for i in (free_index(v) for v in _free_names(phi))}
    if len(set(full.values())) != len(full):
        raise AlgebraError(f"renaming {mapping} merges free variables of '{phi}'")
    return rename_free(phi, {var(i): var(j) for i, j in full.items()})


def _free_names(phi: Formula):
    return [v for v in free_variables(phi) if is_free_name(v)]
