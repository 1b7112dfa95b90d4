"""Formula AST of the distance-guarded local fragment.

Free variables are named x1, x2, ...; bound variables use any other
identifier and are introduced only by ball-guarded quantifiers.
"""
import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Set, Tuple

from src.utils.errors import InputError

FREE_VAR = re.compile(r'^x([1-9][0-9]*)$')


class Formula:
    """Base class of all AST nodes"""

    def __and__(self, other: 'Formula') -> 'Formula':
        return conj(self, other)

    def __or__(self, other: 'Formula') -> 'Formula':
        return disj(self, other)

    def __invert__(self) -> 'Formula':
        return neg(self)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    rel: str
    args: Tuple[str, ...]


@dataclass(frozen=True)
class Eq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class DistLe(Formula):
    left: str
    right: str
    bound: int


@dataclass(frozen=True)
class DistGt(Formula):
    left: str
    right: str
    bound: int


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    parts: Tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    parts: Tuple[Formula, ...]


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    radius: int
    anchor: str
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    radius: int
    anchor: str
    body: Formula


TRUE = TrueF()
FALSE = FalseF()
Quantifier = (Exists, Forall)
Literal = (Atom, Eq, DistLe, DistGt)


def is_free_name(name: str) -> bool:
    return FREE_VAR.match(name) is not None


def free_index(name: str) -> int:
    match = FREE_VAR.match(name)
    if not match:
        raise InputError(f"'{name}' is not a free variable name")
    return int(match.group(1))


def var(i: int) -> str:
    return f"x{i}"


# -- smart constructors -------------------------------------------------------

def conj(*parts: Formula) -> Formula:
    flat = []
    for part in parts:
        if isinstance(part, FalseF):
            return FALSE
        if isinstance(part, TrueF):
            continue
        if isinstance(part, And):
            flat.extend(part.parts)
        else:
            flat.append(part)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*parts: Formula) -> Formula:
    flat = []
    for part in parts:
        if isinstance(part, TrueF):
            return TRUE
        if isinstance(part, FalseF):
            continue
        if isinstance(part, Or):
            flat.extend(part.parts)
        else:
            flat.append(part)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(body: Formula) -> Formula:
    if isinstance(body, TrueF):
        return FALSE
    if isinstance(body, FalseF):
        return TRUE
    if isinstance(body, Not):
        return body.body
    return Not(body)


# -- variables ----------------------------------------------------------------

def variables_of(node: Formula) -> Tuple[str, ...]:
    """Variables a literal mentions"""
    if isinstance(node, Atom):
        return node.args
    if isinstance(node, (Eq, DistLe, DistGt)):
        return (node.left, node.right)
    return ()


def free_variables(node: Formula) -> FrozenSet[str]:
    if isinstance(node, Literal):
        return frozenset(variables_of(node))
    if isinstance(node, Not):
        return free_variables(node.body)
    if isinstance(node, (And, Or)):
        out: Set[str] = set()
        for part in node.parts:
            out |= free_variables(part)
        return frozenset(out)
    if isinstance(node, Quantifier):
        return frozenset((free_variables(node.body) - {node.var}) | {node.anchor})
    return frozenset()


def arity(node: Formula) -> int:
    """Number p of packed free variables (largest free index)"""
    indices = [free_index(v) for v in free_variables(node) if is_free_name(v)]
    return max(indices) if indices else 0


def relations_used(node: Formula) -> Dict[str, int]:
    out: Dict[str, int] = {}

    def walk(n: Formula):
        if isinstance(n, Atom):
            if out.setdefault(n.rel, len(n.args)) != len(n.args):
                raise InputError(f"relation '{n.rel}' used with different arities")
        elif isinstance(n, Not):
            walk(n.body)
        elif isinstance(n, (And, Or)):
            for part in n.parts:
                walk(part)
        elif isinstance(n, Quantifier):
            walk(n.body)

    walk(node)
    return out


def rename_free(node: Formula, mapping: Dict[str, str]) -> Formula:
    """Rename free variables; bound names never collide with x<i> names"""
    def r(name: str) -> str:
        return mapping.get(name, name)

    if isinstance(node, Atom):
        return Atom(node.rel, tuple(r(a) for a in node.args))
    if isinstance(node, Eq):
        return Eq(r(node.left), r(node.right))
    if isinstance(node, DistLe):
        return DistLe(r(node.left), r(node.right), node.bound)
    if isinstance(node, DistGt):
        return DistGt(r(node.left), r(node.right), node.bound)
    if isinstance(node, Not):
        return Not(rename_free(node.body, mapping))
    if isinstance(node, And):
        return And(tuple(rename_free(p, mapping) for p in node.parts))
    if isinstance(node, Or):
        return Or(tuple(rename_free(p, mapping) for p in node.parts))
    if isinstance(node, Quantifier):
        inner = {k: v for k, v in mapping.items() if k != node.var}
        return type(node)(node.var, node.radius, r(node.anchor), rename_free(node.body, inner))
    return node


# -- locality -----------------------------------------------------------------

def radius(node: Formula, offsets: Optional[Dict[str, int]] = None) -> int:
    """Syntactic locality radius.

    Each variable carries an offset: 0 for free variables, offset(anchor)+s
    for a variable bound by a guard of radius s.
    """
    offsets = offsets or {}

    def off(name: str) -> int:
        return offsets.get(name, 0)

    if isinstance(node, Atom):
        names = list(dict.fromkeys(node.args))
        if len(names) == 1:
            return off(names[0])
        best = 0
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                oa, ob = off(a), off(b)
                best = max(best, oa, ob, min(oa, ob) + 1)
        return best
    if isinstance(node, Eq):
        return max(off(node.left), off(node.right))
    if isinstance(node, (DistLe, DistGt)):
        oa, ob = off(node.left), off(node.right)
        if node.left == node.right:
            return oa
        return max(oa, ob, min(oa, ob) + node.bound)
    if isinstance(node, Not):
        return radius(node.body, offsets)
    if isinstance(node, (And, Or)):
        return max((radius(p, offsets) for p in node.parts), default=0)
    if isinstance(node, Quantifier):
        oy = off(node.anchor) + node.radius
        inner = dict(offsets)
        inner[node.var] = oy
        return max(oy, radius(node.body, inner))
    return 0


Bounds = Optional[Dict[Tuple[str, str], int]]


def _key(a: str, b: str) -> Tuple[str, str]:
    return (a, b) if a < b else (b, a)


def _close(bounds: Dict[Tuple[str, str], int]) -> Dict[Tuple[str, str], int]:
    names = sorted({v for pair in bounds for v in pair})
    dist = dict(bounds)
    for k in names:
        for i in names:
            dik = dist.get(_key(i, k)) if i != k else 0
            if dik is None:
                continue
            for j in names:
                if j <= i:
                    continue
                dkj = dist.get(_key(k, j)) if k != j else 0
                if dkj is None:
                    continue
                current = dist.get((i, j))
                if current is None or dik + dkj < current:
                    dist[(i, j)] = dik + dkj
    return dist


def _meet(items) -> Bounds:
    out: Dict[Tuple[str, str], int] = {}
    for b in items:
        if b is None:
            return None
        for key, value in b.items():
            if key not in out or value < out[key]:
                out[key] = value
    return _close(out)


def _join(items) -> Bounds:
    live = [b for b in items if b is not None]
    if not live:
        return None
    out = dict(live[0])
    for b in live[1:]:
        out = {k: max(v, b[k]) for k, v in out.items() if k in b}
    return out


def _drop(bounds: Bounds, name: str) -> Bounds:
    if bounds is None:
        return None
    return {k: v for k, v in bounds.items() if name not in k}


def distance_bounds(node: Formula, positive: bool = True) -> Bounds:
    """Pairwise distance bounds entailed by node (None means unsatisfiable)"""
    if isinstance(node, TrueF):
        return {} if positive else None
    if isinstance(node, FalseF):
        return None if positive else {}
    if isinstance(node, Atom):
        if not positive:
            return {}
        names = sorted(set(node.args))
        return _close({_key(a, b): 1 for i, a in enumerate(names) for b in names[i + 1:]})
    if isinstance(node, Eq):
        if not positive or node.left == node.right:
            return {}
        return {_key(node.left, node.right): 0}
    if isinstance(node, DistLe) or isinstance(node, DistGt):
        holds_le = isinstance(node, DistLe) == positive
        if not holds_le or node.left == node.right:
            return {}
        return {_key(node.left, node.right): node.bound}
    if isinstance(node, Not):
        return distance_bounds(node.body, not positive)
    if isinstance(node, (And, Or)):
        parts = [distance_bounds(p, positive) for p in node.parts]
        if isinstance(node, And) == positive:
            return _meet(parts)
        return _join(parts)
    if isinstance(node, Quantifier):
        body = distance_bounds(node.body, positive)
        if body is None:
            return None
        existential = isinstance(node, Exists) == positive
        if existential:
            merged = _meet([body, {_key(node.var, node.anchor): node.radius}])
            return _drop(merged, node.var)
        # the anchor itself lies in the guard ball
        substituted: Dict[Tuple[str, str], int] = {}
        for (a, b), value in body.items():
            a = node.anchor if a == node.var else a
            b = node.anchor if b == node.var else b
            if a == b:
                continue
            key = _key(a, b)
            substituted[key] = min(value, substituted.get(key, value))
        return _close(substituted)
    return {}


def strong_radius(node: Formula) -> Optional[int]:
    """Radius r such that node is strongly r-local, or None"""
    p = arity(node)
    r = radius(node)
    if p <= 1:
        return r
    bounds = distance_bounds(node)
    if bounds is None:
        return r
    best = r
    for i in range(1, p + 1):
        for j in range(i + 1, p + 1):
            value = bounds.get(_key(var(i), var(j)))
            if value is None:
                return None
            best = max(best, value)
    return best


def is_strongly_local(node: Formula) -> bool:
    return strong_radius(node) is not None


# -- printing -----------------------------------------------------------------

def _wrap(node: Formula) -> str:
    text = to_text(node)
    if isinstance(node, (And, Or, Exists, Forall)):
        return f"({text})"
    return text


def to_text(node: Formula) -> str:
    if isinstance(node, TrueF):
        return 'true'
    if isinstance(node, FalseF):
        return 'false'
    if isinstance(node, Atom):
        return f"{node.rel}({', '.join(node.args)})"
    if isinstance(node, Eq):
        return f"{node.left} = {node.right}"
    if isinstance(node, DistLe):
        return f"dist({node.left}, {node.right}) <= {node.bound}"
    if isinstance(node, DistGt):
        return f"dist({node.left}, {node.right}) > {node.bound}"
    if isinstance(node, Not):
        inner = to_text(node.body)
        if isinstance(node.body, (Atom, TrueF, FalseF, Not)):
            return f"~{inner}"
        return f"~({inner})"
    if isinstance(node, And):
        return ' & '.join(_wrap(p) for p in node.parts)
    if isinstance(node, Or):
        return ' | '.join(_wrap(p) for p in node.parts)
    if isinstance(node, Quantifier):
        word = 'exists' if isinstance(node, Exists) else 'forall'
        return f"{word} {node.var} in B[{node.radius}]({node.anchor}): {to_text(node.body)}"
    raise InputError(f"not a formula node: {node!r}")


def walk(node: Formula) -> Iterable[Formula]:
    yield node
    if isinstance(node, Not):
        yield from walk(node.body)
    elif isinstance(node, (And, Or)):
        for part in node.parts:
            yield from walk(part)
    elif isinstance(node, Quantifier):
        yield from walk(node.body)
