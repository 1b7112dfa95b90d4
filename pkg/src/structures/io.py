import json
from fractions import Fraction
from typing import Dict

from src.structures.structure import Signature, Structure
from src.utils.errors import InputError


def _weight(value, where: str) -> float:
    try:
        if isinstance(value, str):
            return float(Fraction(value.strip()))
        return float(value)
    except (ValueError, ZeroDivisionError, TypeError):
        raise InputError(f"{where}: cannot read weight {value!r}")


def structure_from_dict(data: Dict, source: str = '<structure>') -> Structure:
    """Build a Structure from the JSON schema, naming the first violation"""
    if not isinstance(data, dict):
        raise InputError(f"{source}: expected a JSON object")
    if 'n' not in data:
        raise InputError(f"{source}: missing field 'n'")
    try:
        n = int(data['n'])
    except (TypeError, ValueError):
        raise InputError(f"{source}: field 'n' must be an integer")

    weights = data.get('weights', 'uniform')
    if not isinstance(weights, str):
        if not isinstance(weights, list):
            raise InputError(f"{source}: 'weights' must be \"uniform\" or a list")
        weights = [_weight(w, f"{source}: weights[{i}]") for i, w in enumerate(weights)]
        total = sum(weights)
        # rationals that sum to one exactly may drift in floating point
        if weights and abs(total - 1.0) < 1e-9:
            weights = [w / total for w in weights]

    arities = {}
    relations = {}
    for name, spec in (data.get('relations') or {}).items():
        where = f"{source}: relations.{name}"
        if not isinstance(spec, dict) or 'tuples' not in spec:
            raise InputError(f"{where}: expected {{\"arity\": k, \"tuples\": [...]}}")
        tuples = spec['tuples']
        arity = spec.get('arity')
        if arity is None:
            if not tuples:
                raise InputError(f"{where}: empty relation needs an explicit arity")
            arity = len(tuples[0])
        for i, t in enumerate(tuples):
            if not isinstance(t, list) or len(t) != arity:
                raise InputError(f"{where}.tuples[{i}]: expected a list of {arity} vertex ids")
            for v in t:
                if not isinstance(v, int) or not 0 <= v < n:
                    raise InputError(f"{where}.tuples[{i}]: vertex id {v!r} out of range 0..{n - 1}")
        arities[name] = int(arity)
        relations[name] = [tuple(t) for t in tuples]

    marks = [m for m in data.get('marks', []) if m in arities]
    try:
        signature = Signature(arities, marks)
        return Structure(n, relations, weights, signature=signature)
    except InputError as e:
        raise InputError(f"{source}: {e.message}")


def load_structure(path: str) -> Structure:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
    except OSError as e:
        raise InputError(f"cannot read structure file {path}: {e}")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    return structure_from_dict(data, source=path)


def dump_structure(A: Structure) -> str:
    return json.dumps(A.to_dict(), sort_keys=True, indent=2) + '\n'


def save_structure(A: Structure, path: str):
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(dump_structure(A))
