#!/usr/bin/env python3
"""
Acceptance sweep: brute-force oracles and generator ground truth, with timings
"""

import filecmp
import itertools
import math
import os
import sys
import tempfile
import time

import numpy as np

# Add the parent directory to Python path
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
sys.path.insert(0, parent_dir)

from src.cli.runner import run
from src.generators.families import SIGNATURE, random_regular
from src.globular.assembly import RESIDUAL, SEPARATOR, assemble_clustering, parse_globular
from src.globular.comb import clip_comb, naive_top_k
from src.globular.schedule import build_schedule
from src.logic.decomposition import strongly_local_decomposition
from src.logic.evaluator import stone_pairing
from src.logic.parser import parse
from src.sequences.expansion import clean_expander, expansion_check
from src.sequences.negligible import check_negligible_bound
from src.sequences.sequence import StructureSequence, SubsetSequence
from src.spectrum.detection import detect_spectrum
from src.spectrum.distribution import moment_table, psi_formula
from src.spectrum.inversion import atom_mass, inversion_grid, mixture_characteristic_function
from src.structures.structure import Structure, ball, measure
from src.utils.errors import PreconditionError
from src.utils.logger import configure

LOCAL_BATTERY = [
    "adj(x1,x2)",
    "adj(x1,x2) & adj(x2,x3)",
    "dist(x1,x2) <= 1 & ~adj(x1,x3)",
    "adj(x1,x2) | adj(x3,x4)",
    "exists y in B[1](x1): adj(y,x2)",
    "dist(x1,x2) > 1",
    "adj(x1,x2) & dist(x2,x3) > 2",
    "~adj(x1,x2) & ~adj(x2,x3) & x1 != x3",
    "forall y in B[1](x1): dist(y,x2) <= 2",
    "adj(x1,x2) & adj(x3,x4) & dist(x1,x3) > 2",
]


def random_graph(rng: np.random.Generator, n: int) -> Structure:
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.4]
    edges += [(v, u) for u, v in edges]
    weights = rng.random(n) + 0.05
    return Structure(n, {'adj': edges}, weights / weights.sum(), signature=SIGNATURE)


def random_structures(count: int = 200, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [random_graph(rng, int(rng.integers(1, 9))) for _ in range(count)]


def criterion_decomposition(structures):
    worst = 0.0
    for text in LOCAL_BATTERY:
        phi = parse(text)
        poly = strongly_local_decomposition(phi)
        for A in structures:
            worst = max(worst, abs(poly.evaluate_on(A) - stone_pairing(A, phi)))
    return worst <= 1e-10, f"max |Δ| = {worst:.3g}"


def criterion_moments(structures):
    worst = 0.0
    for A in structures:
        for d in range(1, 4):
            table = moment_table(A, d, 3)
            for w in range(1, 4):
                worst = max(worst, abs(stone_pairing(A, psi_formula(d, w)) - table.moments[w]))
    return worst <= 1e-12, f"max |Δ| = {worst:.3g}"


def criterion_negligible(structures):
    rng = np.random.default_rng(1)
    formulas = [parse(text) for text in LOCAL_BATTERY]
    trials = violations = 0
    for A in structures:
        if trials == 100:
            break
        if A.n < 2:
            continue
        X = np.zeros(A.n, dtype=bool)
        X[int(np.argmin(A.weights))] = True
        d = 2
        epsilon = measure(A, ball(A, X, d)) + 1e-3
        if epsilon >= 1:
            continue
        phi = formulas[int(rng.integers(len(formulas)))]
        report = check_negligible_bound(A, X, phi, d, epsilon)
        if not report.precondition:
            continue
        trials += 1
        violations += 0 if report.holds else 1
    return violations == 0 and trials > 0, f"{trials} triples, {violations} violations"


def criterion_spectrum():
    cases = [
        ('clique-pair', {'measures': [0.5, 0.5]}, (1, 40), [(0.5, 2)], 0.0),
        ('clique-pair-residual', {'measures': [0.5, 0.3]}, (2, 24), [(0.5, 1), (0.3, 1)], 0.2),
        ('cycle', {}, (2, 40), [], 1.0),
    ]
    problems = []
    for family, params, index_range, truth, residual in cases:
        report = detect_spectrum(StructureSequence.from_generator(family, params, index_range))
        found = sorted((a.value, a.count) for a in report.atoms)
        expected = sorted(truth)
        if len(found) != len(expected) or any(abs(f[0] - e[0]) > 0.02 or f[1] != e[1]
                                               for f, e in zip(found, expected)):
            problems.append(f"{family}: atoms {found}")
        if abs(report.residual_mass - residual) > 0.05:
            problems.append(f"{family}: λ₀ = {report.residual_mass:.4f}")
    return not problems, '; '.join(problems) or "atoms, counts and residual mass match"


def criterion_integrality():
    worst = 0.0
    for family, params in [('clique-pair', {'measures': [0.5, 0.5]}), ('clique-pair', {'measures': [0.25] * 4}),
                           ('clique-pair-residual', {'measures': [0.5, 0.3]})]:
        report = detect_spectrum(StructureSequence.from_generator(family, params, (2, 24)))
        for atom in report.atoms:
            ratio = atom.mass / atom.value
            worst = max(worst, abs(ratio - round(ratio)))
    return worst <= 0.1, f"max residue {worst:.4f}"


def criterion_inversion():
    errors = {}
    for T, bound in [(200, 0.05), (2000, 0.01)]:
        gamma = mixture_characteristic_function([0.3, 0.7], [0.5, 0.5], inversion_grid(T))
        errors[T] = (max(abs(atom_mass(gamma, a, T, 0.7).mass - 0.5) for a in (0.3, 0.7)), bound)
    ok = all(err <= bound for err, bound in errors.values())
    return ok, ', '.join(f"T={T}: {err:.2e}" for T, (err, _) in errors.items())


def criterion_assembly():
    S = StructureSequence.from_generator('clique-pair', {'measures': [0.5, 0.5]}, (1, 24))
    report = detect_spectrum(S)
    schedule = build_schedule(report, S)
    result = assemble_clustering(S, report, schedule)
    problems = []
    for n in result.window:
        labels = result.labels[n]
        truth = np.array(S.annotation(n)['labels'])
        if not all(parse_globular(str(v)) for v in labels[np.char.startswith(truth, 'C')]):
            problems.append(f"n={n}: unmarked clique vertex")
        if (labels == SEPARATOR).any() or (labels == RESIDUAL).any():
            problems.append(f"n={n}: separator or residual not empty")
        centers = sum(len(per.get(n, [])) for per in result.centers.values())
        if centers != 2:
            problems.append(f"n={n}: {centers} centers")
    if result.violations(window_only=True):
        problems.append(f"{len(result.violations(window_only=True))} assembly checks fail")
    return not problems, '; '.join(problems[:3]) or "all window checks pass"


def criterion_comb():
    S = StructureSequence.from_generator('star-forest', {}, (1, 8))
    clusters = [SubsetSequence.from_annotation(S, label) for label in S.annotation_labels()]
    naive = naive_top_k(S, clusters, 8)
    combed = clip_comb(S, clusters)
    window = combed.window
    naive_mass = min(naive.unmarked_mass(n) for n in window)
    comb_mass = max(combed.unmarked_mass(n) for n in window)
    return naive_mass >= 0.4 and comb_mass <= 0.1, f"naive {naive_mass:.3f}, comb {comb_mass:.3f}"


def _oracle(A: Structure, d: int, epsilon: float):
    """(δ̂, h_out) by plain subset enumeration and set-based BFS"""
    neighbours = [set(A.adjacency.indices[A.adjacency.indptr[v]:A.adjacency.indptr[v + 1]]) for v in range(A.n)]
    weights = A.weights
    delta = h_out = math.inf
    for size in range(1, A.n + 1):
        for X in itertools.combinations(range(A.n), size):
            mass = float(sum(weights[v] for v in X))
            grown = set(X)
            for _ in range(d):
                grown |= set().union(*(neighbours[v] for v in grown))
            one = set(X).union(*(neighbours[v] for v in X))
            if epsilon + 1e-12 < mass < 1 - epsilon - 1e-12:
                delta = min(delta, (sum(weights[v] for v in grown) - mass) / mass)
            if mass <= 0.5 + 1e-12:
                h_out = min(h_out, (sum(weights[v] for v in one) - mass) / mass)
    return delta, h_out


def criterion_expansion():
    rng = np.random.default_rng(7)
    graphs = [Structure(4, {'adj': [(u, v) for u in range(4) for v in range(4) if u != v]}, signature=SIGNATURE),
              Structure(8, {'adj': [(i, (i + s) % 8) for i in range(8) for s in (1, 7)]}, signature=SIGNATURE)]
    for count in [8, 10, 12, 14, 16] * 2:
        edges = random_regular(count, 3, rng)
        graphs.append(Structure(count, {'adj': [tuple(e) for e in edges] + [tuple(e[::-1]) for e in edges]},
                                signature=SIGNATURE))
    mismatches = cleaned = 0
    for A in graphs:
        report = expansion_check(A, 1, 0.1, mode='exact')
        delta, h_out = _oracle(A, 1, 0.1)
        if abs(report.delta - delta) > 1e-12 or abs(report.h_out - h_out) > 1e-12:
            mismatches += 1
        try:
            clean = clean_expander(A, 1, 0.1, min(delta, 1.0) / 2)
        except PreconditionError:
            continue
        cleaned += 1
        if not clean.verified:
            mismatches += 1
    return mismatches == 0, f"{len(graphs)} graphs, {cleaned} cleaned, {mismatches} mismatches"


def criterion_determinism():
    with tempfile.TemporaryDirectory() as root:
        outputs = []
        for workers in (1, 8):
            out = os.path.join(root, f"p{workers}")
            for command in ('spectrum', 'cluster'):
                code = run([command, '--family', 'clique-pair', '--range', '1', '16',
                            '--parallelism', str(workers), '--output', out])
                if code != 0:
                    return False, f"{command} exited with {code}"
            outputs.append(out)
        same = all(filecmp.cmp(os.path.join(outputs[0], name), os.path.join(outputs[1], name), shallow=False)
                   for name in ('spectrum.json', 'clustering.json'))
    return same, "outputs byte-identical" if same else "outputs differ"


def main():
    configure('WARNING')
    print("🔄 Running acceptance sweep...")
    structures = random_structures()
    criteria = [
        ("decomposition oracle", lambda: criterion_decomposition(structures)),
        ("moment identity", lambda: criterion_moments(structures)),
        ("negligible-set bound", lambda: criterion_negligible(structures)),
        ("spectrum ground truth", criterion_spectrum),
        ("integrality", criterion_integrality),
        ("inversion cross-check", criterion_inversion),
        ("clustering assembly", criterion_assembly),
        ("clip comb vs naive", criterion_comb),
        ("expansion brute force", criterion_expansion),
        ("determinism", criterion_determinism),
    ]
    failed = 0
    for step, (name, fn) in enumerate(criteria, start=1):
        start = time.perf_counter()
        ok, detail = fn()
        elapsed = time.perf_counter() - start
        failed += 0 if ok else 1
        print(f"{'✅' if ok else '❌'} Step {step}: {name} ({elapsed:.1f}s): {detail}")
    print(f"📊 {len(criteria) - failed}/{len(criteria)} criteria pass")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
