"""Rewrite a local formula's pairing as a polynomial in pairings of
strongly local formulas.

For p free variables and radius r, every tuple has a distance type: the
graph F on 1..p joining i and j when dist(x_i, x_j) <= 2r. Connected types
give strongly local formulas directly. For a disconnected type the formula
splits into parts living on the components of F, and the product of the
parts' pairings counts every coarser type too; those are removed by
inclusion-exclusion over the added cross-component edges.
"""
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from config import Config
from src.logic.evaluator import stone_pairing
from src.logic.formula import (
    FALSE, TRUE, And, Atom, DistGt, DistLe, Eq, Exists, FalseF, Forall, Formula, Not, Or,
    TrueF, arity, conj, disj, free_variables, is_strongly_local, neg, radius, rename_free,
    to_text, var, variables_of,
)
from src.structures.structure import Structure
from src.utils.errors import InputError

MAX_LETTERS = 14

Edge = Tuple[int, int]
Graph = FrozenSet[Edge]


@dataclass
class PairingPolynomial:
    """Σ c · Π ⟨leaf_i, A⟩ with integer coefficients"""
    leaves: List[Formula] = field(default_factory=list)
    terms: Dict[Tuple[int, ...], int] = field(default_factory=dict)

    def degree(self) -> int:
        return max((len(m) for m, c in self.terms.items() if c), default=0)

    def evaluate(self, values: Sequence[float]) -> float:
        total = 0.0
        for monomial, coefficient in sorted(self.terms.items()):
            if not coefficient:
                continue
            product = float(coefficient)
            for i in monomial:
                product *= values[i]
            total += product
        return total

    def evaluate_on(self, A: Structure) -> float:
        return self.evaluate([stone_pairing(A, leaf) for leaf in self.leaves])

    def to_dict(self) -> Dict:
        return {
            'leaves': [to_text(leaf) for leaf in self.leaves],
            'terms': [{'coefficient': c, 'monomial': list(m)}
                      for m, c in sorted(self.terms.items()) if c],
        }

    def __str__(self) -> str:
        parts = []
        for monomial, coefficient in sorted(self.terms.items()):
            if not coefficient:
                continue
            factors = '·'.join(f"X{i + 1}" for i in monomial) or '1'
            parts.append(f"{coefficient:+d}·{factors}")
        return ' '.join(parts) or '0'


class _Builder:
    def __init__(self):
        self.poly = PairingPolynomial()
        self.index: Dict[str, int] = {}

    def leaf(self, formula: Formula) -> int:
        key = to_text(formula)
        if key not in self.index:
            self.index[key] = len(self.poly.leaves)
            self.poly.leaves.append(formula)
        return self.index[key]

    def monomial(self, factors: Sequence[Formula]) -> Optional[Tuple[int, ...]]:
        """Leaf ids of a product, or None when a factor is false"""
        ids = []
        for factor in factors:
            if isinstance(factor, FalseF):
                return None
            if isinstance(factor, TrueF):
                continue
            ids.append(self.leaf(factor))
        return tuple(sorted(ids))

    def add(self, terms: Dict[Tuple[int, ...], int], coefficient: int = 1):
        for monomial, c in terms.items():
            self.poly.terms[monomial] = self.poly.terms.get(monomial, 0) + coefficient * c


# -- distance types -------------------------------------------------------------

def _components(p: int, edges: Graph) -> List[Tuple[int, ...]]:
    parent = list(range(p + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in edges:
        parent[find(i)] = find(j)
    groups: Dict[int, List[int]] = defaultdict(list)
    for i in range(1, p + 1):
        groups[find(i)].append(i)
    return sorted(tuple(g) for g in groups.values())


def type_formula(vertices: Sequence[int], edges: Graph, threshold: int) -> Formula:
    parts = []
    for a, i in enumerate(vertices):
        for j in vertices[a + 1:]:
            if (i, j) in edges:
                parts.append(DistLe(var(i), var(j), threshold))
            else:
                parts.append(DistGt(var(i), var(j), threshold))
    return conj(*parts)


def pack(formula: Formula, block: Sequence[int]) -> Formula:
    """Rename the block's variables to x1..xk in increasing order"""
    return rename_free(formula, {var(i): var(k + 1) for k, i in enumerate(block)})


# -- separation -----------------------------------------------------------------

def separate(node: Formula, comp: Dict[str, int]) -> Formula:
    """Fold literals joining different components (their distance exceeds the budget)"""
    if isinstance(node, (Atom, Eq, DistLe, DistGt)):
        names = variables_of(node)
        if len({comp[v] for v in names}) <= 1:
            return node
        return TRUE if isinstance(node, DistGt) else FALSE
    if isinstance(node, Not):
        return neg(separate(node.body, comp))
    if isinstance(node, And):
        return conj(*(separate(p, comp) for p in node.parts))
    if isinstance(node, Or):
        return disj(*(separate(p, comp) for p in node.parts))
    if isinstance(node, (Exists, Forall)):
        inner = dict(comp)
        inner[node.var] = comp[node.anchor]
        return _quantify(node, separate(node.body, inner))
    return node


def _quantify(node: Formula, body: Formula) -> Formula:
    # the guard ball always contains its anchor, so constant bodies fold
    if isinstance(body, (TrueF, FalseF)):
        return body
    return type(node)(node.var, node.radius, node.anchor, body)


def _leaves(node: Formula) -> List[Formula]:
    if isinstance(node, (TrueF, FalseF)):
        return []
    if isinstance(node, Not):
        return _leaves(node.body)
    if isinstance(node, (And, Or)):
        out = []
        for part in node.parts:
            for leaf in _leaves(part):
                if leaf not in out:
                    out.append(leaf)
        return out
    return [node]


def _substitute(node: Formula, values: Dict[Formula, bool]) -> Formula:
    if node in values:
        return TRUE if values[node] else FALSE
    if isinstance(node, Not):
        return neg(_substitute(node.body, values))
    if isinstance(node, And):
        return conj(*(_substitute(p, values) for p in node.parts))
    if isinstance(node, Or):
        return disj(*(_substitute(p, values) for p in node.parts))
    return node


def _letter_component(leaf: Formula, comp: Dict[str, int]) -> int:
    comps = {comp[v] for v in free_variables(leaf)}
    if len(comps) > 1:
        raise InputError(f"subformula '{to_text(leaf)}' still spans several components")
    return comps.pop() if comps else 0


def _assignments(letters: Sequence[Formula]):
    if len(letters) > MAX_LETTERS:
        raise InputError(f"decomposition needs {len(letters)} case letters, more than {MAX_LETTERS}")
    for bits in itertools.product((True, False), repeat=len(letters)):
        yield dict(zip(letters, bits))


def purify(node: Formula, comp: Dict[str, int]) -> Formula:
    """Boolean combination of formulas that each live on one component.

    A quantifier body mixing components is split by cases on the
    subformulas that do not depend on the bound variable.
    """
    if isinstance(node, Not):
        return neg(purify(node.body, comp))
    if isinstance(node, And):
        return conj(*(purify(p, comp) for p in node.parts))
    if isinstance(node, Or):
        return disj(*(purify(p, comp) for p in node.parts))
    if not isinstance(node, (Exists, Forall)):
        return node

    home = comp[node.anchor]
    inner = dict(comp)
    inner[node.var] = home
    body = purify(node.body, inner)
    external = [leaf for leaf in _leaves(body) if _letter_component(leaf, inner) != home]
    if not external:
        return _quantify(node, body)

    cases = []
    for values in _assignments(external):
        quantified = _quantify(node, _substitute(body, values))
        if isinstance(quantified, FalseF):
            continue
        literals = [leaf if values[leaf] else neg(leaf) for leaf in external]
        cases.append(conj(*literals, quantified))
    return disj(*cases)


def _truth(node: Formula, values: Dict[Formula, bool]) -> bool:
    if isinstance(node, TrueF):
        return True
    if isinstance(node, FalseF):
        return False
    if isinstance(node, Not):
        return not _truth(node.body, values)
    if isinstance(node, And):
        return all(_truth(p, values) for p in node.parts)
    if isinstance(node, Or):
        return any(_truth(p, values) for p in node.parts)
    return values[node]


def split_cases(phi: Formula, blocks: List[Tuple[int, ...]]) -> List[Dict[int, Formula]]:
    """Disjoint cases ρ, each a conjunction of per-block formulas, with φ ≡ ∨ ρ under the type"""
    comp = {var(i): b for b, block in enumerate(blocks) for i in block}
    skeleton = purify(separate(phi, comp), comp)
    letters = _leaves(skeleton)
    cases = []
    for values in _assignments(letters):
        if not _truth(skeleton, values):
            continue
        per_block: Dict[int, List[Formula]] = defaultdict(list)
        for letter in letters:
            literal = letter if values[letter] else neg(letter)
            per_block[_letter_component(letter, comp)].append(literal)
        cases.append({b: conj(*per_block.get(b, [])) for b in range(len(blocks))})
    return cases


# -- inclusion-exclusion --------------------------------------------------------

class _TypedPairing:
    """⟨type(H) ∧ ρ⟩ for graphs H refining a fixed disconnected type"""

    def __init__(self, builder: _Builder, p: int, threshold: int,
                 blocks: List[Tuple[int, ...]], case: Dict[int, Formula]):
        self.builder = builder
        self.p = p
        self.threshold = threshold
        self.rho = {}
        for b, block in enumerate(blocks):
            for i in block:
                self.rho[i] = b
        self.case = case
        self.memo: Dict[Graph, Dict[Tuple[int, ...], int]] = {}

    def part(self, vertices: Sequence[int], edges: Graph) -> Formula:
        used = sorted({self.rho[i] for i in vertices})
        local = frozenset(e for e in edges if e[0] in vertices and e[1] in vertices)
        return conj(type_formula(vertices, local, self.threshold), *(self.case[b] for b in used))

    def __call__(self, edges: Graph) -> Dict[Tuple[int, ...], int]:
        if edges in self.memo:
            return self.memo[edges]
        comps = _components(self.p, edges)
        terms: Dict[Tuple[int, ...], int] = defaultdict(int)
        if len(comps) == 1:
            key = self.builder.monomial([self.part(comps[0], edges)])
            if key is not None:
                terms[key] += 1
        else:
            key = self.builder.monomial([pack(self.part(c, edges), c) for c in comps])
            if key is not None:
                terms[key] += 1
            cross = [(i, j) for a, ca in enumerate(comps) for cb in comps[a + 1:]
                     for i in ca for j in cb]
            cross = [tuple(sorted(e)) for e in cross]
            for size in range(1, len(cross) + 1):
                for added in itertools.combinations(cross, size):
                    for key, c in self(edges | frozenset(added)).items():
                        terms[key] -= c
        result = {k: c for k, c in terms.items() if c}
        self.memo[edges] = result
        return result


def strongly_local_decomposition(phi: Formula, max_vars: Optional[int] = None,
                                 max_radius: Optional[int] = None) -> PairingPolynomial:
    """Polynomial P with ⟨φ, A⟩ = P(⟨φ_1, A⟩, ..., ⟨φ_N, A⟩) for every A"""
    max_vars = max_vars or Config.MAX_DECOMPOSITION_VARS
    max_radius = max_radius or Config.MAX_DECOMPOSITION_RADIUS
    p = arity(phi)
    r = radius(phi)
    if p > max_vars:
        raise InputError(f"decomposition supports at most {max_vars} free variables, got {p}")
    if r > max_radius:
        raise InputError(f"decomposition supports radius at most {max_radius}, got {r}")

    builder = _Builder()
    if p <= 1 or is_strongly_local(phi):
        key = builder.monomial([phi])
        if key is not None:
            builder.add({key: 1})
        return builder.poly

    threshold = 2 * r
    pairs = [(i, j) for i in range(1, p + 1) for j in range(i + 1, p + 1)]
    for bits in itertools.product((False, True), repeat=len(pairs)):
        edges = frozenset(e for e, on in zip(pairs, bits) if on)
        blocks = _components(p, edges)
        if len(blocks) == 1:
            key = builder.monomial([conj(type_formula(range(1, p + 1), edges, threshold), phi)])
            if key is not None:
                builder.add({key: 1})
            continue
        for case in split_cases(phi, blocks):
            builder.add(_TypedPairing(builder, p, threshold, blocks, case)(edges))

    builder.poly.terms = {m: c for m, c in builder.poly.terms.items() if c}
    return builder.poly
