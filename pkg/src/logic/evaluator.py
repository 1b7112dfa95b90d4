"""Vectorised model checking of guarded formulas.

A formula is evaluated to a boolean array with one axis per variable in
scope; axes of variables a subformula does not mention stay of length 1 so
numpy broadcasting keeps intermediate arrays small. Quantifiers add an axis
for the bound variable and reduce it under the distance guard.
"""
from typing import Dict, List, Optional

import numpy as np

from src.logic.formula import (
    And, Atom, DistGt, DistLe, Eq, Exists, FalseF, Forall, Formula, Not, Or, TrueF,
    arity, relations_used, var,
)
from src.structures.structure import Structure
from src.utils.errors import InputError

# elements per block when the first free variable is chunked
BLOCK_ELEMENTS = 1 << 22


def check_relations(A: Structure, phi: Formula):
    for name, k in relations_used(phi).items():
        if name not in A.signature:
            raise InputError(f"formula uses relation '{name}' which the structure does not have")
        if A.signature.arity(name) != k:
            raise InputError(f"relation '{name}' has arity {A.signature.arity(name)}, formula uses {k}")


class _Evaluator:
    def __init__(self, A: Structure, domains: Dict[str, np.ndarray]):
        self.A = A
        self.dist = A.distances()
        self.all = np.arange(A.n)
        self.domains = dict(domains)

    def index(self, name: str, scope: List[str]) -> np.ndarray:
        axis = len(scope) - 1 - scope[::-1].index(name)
        domain = self.domains[(name, axis)]
        shape = [1] * len(scope)
        shape[axis] = domain.size
        return domain.reshape(shape)

    def ones(self, scope: List[str], value: bool) -> np.ndarray:
        return np.full((1,) * len(scope), value, dtype=bool)

    def eval(self, node: Formula, scope: List[str]) -> np.ndarray:
        if isinstance(node, TrueF):
            return self.ones(scope, True)
        if isinstance(node, FalseF):
            return self.ones(scope, False)
        if isinstance(node, Atom):
            return self.atom(node, scope)
        if isinstance(node, Eq):
            return self.index(node.left, scope) == self.index(node.right, scope)
        if isinstance(node, DistLe):
            return self.dist[self.index(node.left, scope), self.index(node.right, scope)] <= node.bound
        if isinstance(node, DistGt):
            return self.dist[self.index(node.left, scope), self.index(node.right, scope)] > node.bound
        if isinstance(node, Not):
            return ~self.eval(node.body, scope)
        if isinstance(node, And):
            out = self.eval(node.parts[0], scope)
            for part in node.parts[1:]:
                if not out.any():
                    break
                out = out & self.eval(part, scope)
            return out
        if isinstance(node, Or):
            out = self.eval(node.parts[0], scope)
            for part in node.parts[1:]:
                if out.all():
                    break
                out = out | self.eval(part, scope)
            return out
        if isinstance(node, (Exists, Forall)):
            inner = scope + [node.var]
            self.domains[(node.var, len(scope))] = self.all
            body = self.eval(node.body, inner)
            guard = self.dist[self.index(node.anchor, inner), self.index(node.var, inner)] <= node.radius
            if isinstance(node, Exists):
                return np.any(body & guard, axis=-1)
            return np.all(body | ~guard, axis=-1)
        raise InputError(f"cannot evaluate {node!r}")

    def atom(self, node: Atom, scope: List[str]) -> np.ndarray:
        if len(node.args) == 1:
            return self.A.relation_mask(node.rel)[self.index(node.args[0], scope)]
        keys = self.A.relation_keys(node.rel)
        if keys.size == 0:
            return self.ones(scope, False)
        code = None
        for j, name in enumerate(node.args):
            term = self.index(name, scope).astype(np.int64) * (self.A.n ** j)
            code = term if code is None else code + term
        pos = np.searchsorted(keys, code)
        pos = np.minimum(pos, keys.size - 1)
        return keys[pos] == code


def _free_scope(p: int) -> List[str]:
    return [var(i) for i in range(1, p + 1)]


def _blocks(A: Structure, p: int, first: Optional[np.ndarray] = None):
    """Chunks of candidate values for x1"""
    first = np.arange(A.n) if first is None else np.asarray(first, dtype=np.int64)
    per_row = max(1, A.n ** max(p - 1, 0))
    size = max(1, BLOCK_ELEMENTS // per_row)
    for start in range(0, first.size, size):
        yield first[start:start + size]


def _evaluate_block(A: Structure, phi: Formula, p: int, block: np.ndarray) -> np.ndarray:
    scope = _free_scope(p)
    domains = {(var(1), 0): block}
    for i in range(2, p + 1):
        domains[(var(i), i - 1)] = np.arange(A.n)
    result = _Evaluator(A, domains).eval(phi, scope)
    shape = (block.size,) + (A.n,) * (p - 1)
    return np.broadcast_to(result, shape)


def satisfaction_set(A: Structure, phi: Formula) -> np.ndarray:
    """Satisfying p-tuples as a (k, p) array in lexicographic order"""
    check_relations(A, phi)
    p = arity(phi)
    if p == 0:
        value = bool(_Evaluator(A, {}).eval(phi, []))
        return np.zeros((1 if value else 0, 0), dtype=np.int64)
    rows = []
    for block in _blocks(A, p):
        hits = np.argwhere(_evaluate_block(A, phi, p, block))
        hits[:, 0] = block[hits[:, 0]]
        rows.append(hits)
    return np.concatenate(rows).astype(np.int64) if rows else np.zeros((0, p), dtype=np.int64)


def _contract(values: np.ndarray, weights: np.ndarray, keep_first: bool) -> np.ndarray:
    out = values.astype(float)
    stop = 1 if keep_first else 0
    while out.ndim > stop:
        out = out @ weights
    return out


def local_pairings(A: Structure, phi: Formula, vertices: Optional[np.ndarray] = None) -> np.ndarray:
    """⟨φ, A⟩_v for each v (x1 pinned to v, the others ν-random)"""
    check_relations(A, phi)
    p = arity(phi)
    if p < 1:
        raise InputError("local Stone pairings need at least one free variable")
    vertices = np.arange(A.n) if vertices is None else np.asarray(vertices, dtype=np.int64)
    if vertices.size and (vertices.min() < 0 or vertices.max() >= A.n):
        raise InputError(f"vertex out of range 0..{A.n - 1}")
    parts = [_contract(_evaluate_block(A, phi, p, block), A.weights, keep_first=True)
             for block in _blocks(A, p, vertices)]
    return np.concatenate(parts) if parts else np.zeros(0)


def local_stone_pairing(A: Structure, phi: Formula, v: int) -> float:
    if not 0 <= int(v) < A.n:
        raise InputError(f"vertex {v} out of range 0..{A.n - 1}")
    return float(local_pairings(A, phi, np.array([int(v)]))[0])


def stone_pairing(A: Structure, phi: Formula) -> float:
    """⟨φ, A⟩: probability that φ holds for ν-random free variables"""
    check_relations(A, phi)
    p = arity(phi)
    if p == 0:
        return 1.0 if bool(_Evaluator(A, {}).eval(phi, [])) else 0.0
    total = 0.0
    for block in _blocks(A, p):
        rows = _contract(_evaluate_block(A, phi, p, block), A.weights, keep_first=True)
        total += float(rows @ A.weights[block])
    return min(max(total, 0.0), 1.0)


def holds(A: Structure, phi: Formula, assignment: Dict[str, int]) -> bool:
    """Truth of φ under an explicit assignment of its free variables"""
    check_relations(A, phi)
    names = sorted(assignment)
    domains = {(name, i): np.array([int(assignment[name])]) for i, name in enumerate(names)}
    return bool(_Evaluator(A, domains).eval(phi, names).reshape(-1)[0])
