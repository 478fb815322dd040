"""Acceptance gate: nine end-to-end criteria, one PASS/FAIL line each.

Runs under pytest (the lines are printed even with output capture on) or
directly with ``python tests/test_acceptance.py``.
"""

import random
import sys
import time
from itertools import combinations
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from keylink.access import random_structure
from keylink.audit import check_collusion, check_soundness
from keylink.kdf import HMAC_SHA256, KeyMaterial, derive_chain, derive_key, random_seeds
from keylink.kps import (
    KeyingRelationshipGraph,
    build_bounded,
    build_complete_circulant,
    build_star,
    complete_graph,
    cycle_graph,
    euler_circuit,
    make_eulerian,
    pair_id,
    pairwise_key,
    provision,
    random_even_graph,
    random_regular_graph,
    validate_orientation,
)
from keylink.linker import (
    derivation_closure,
    exhaustive_link,
    greedy_link,
    lower_bound,
    storage_report,
    stored_resources,
)

from instances import complete_structure, irregular_structure
from test_kdf import RFC4231

RANDOM_STRUCTURES = 1000


def random_suite():
    for seed in range(RANDOM_STRUCTURES):
        rng = random.Random(seed)
        n = rng.randint(1, 8)
        m = rng.randint(0, min(15, 2**n - 1))
        yield random_structure(n, m, rng)


def kps_plans():
    for n in range(1, 11):
        yield build_star(n)[1]
    for n in (3, 5, 7):
        yield build_complete_circulant(n)[1]
    for g in (cycle_graph(6), complete_graph(5), random_regular_graph(8, 4, random.Random(4))):
        yield build_bounded(g)[1]


def bounds():
    checks = [
        (lower_bound(complete_structure(4)), 3),
        (lower_bound(irregular_structure()), 1),
        (lower_bound(build_star(4)[0]), 1),
    ]
    for n in (3, 5, 7, 9):
        checks.append((lower_bound(build_complete_circulant(n)[0]), -(-(n - 1) // 2)))
    for c in (2, 4, 6):
        g = random_regular_graph(10, c, random.Random(c))
        checks.append((lower_bound(build_bounded(g)[0]), c // 2))
    bad = [pair for pair in checks if pair[0] != pair[1]]
    return not bad, f"{len(checks)} values, mismatches={bad}"


def irregular():
    s = irregular_structure()
    best = storage_report(s, exhaustive_link(s)).max_storage
    return best == 3 and lower_bound(s) == 1, f"optimum={best} bound={lower_bound(s)}"


def universal_inequality():
    violations = checked = 0
    for s in random_suite():
        bound = lower_bound(s)
        for f in (greedy_link(s), exhaustive_link(s, max_resources=15)):
            report = storage_report(s, f)
            checked += 1
            if report.max_storage < bound or report.total_storage < s.m:
                violations += 1
    return violations == 0, f"{checked} forests, {violations} violations"


def soundness_audit():
    violations = audited = 0
    for s in random_suite():
        f = greedy_link(s)
        violations += len(check_soundness(s, f).violations)
        violations += len(check_collusion(s, f, max(s.n, 1)).violations)
        audited += 1
    for plan in kps_plans():
        s, f = plan.structure, plan.forest
        violations += len(check_soundness(s, f).violations)
        violations += len(check_collusion(s, f, s.n).violations)
        audited += 1
    return violations == 0, f"{audited} forests, {violations} violations"


def key_agreement():
    mismatches = edges = 0
    for plan in kps_plans():
        rings = provision(plan, random_seeds(plan.forest.roots(plan.structure)))
        for r in plan.pairs.resources:
            a, b = sorted(r.privileged)
            ka = pairwise_key(plan, a, b, rings[a])
            kb = pairwise_key(plan, b, a, rings[b])
            edges += 1
            if bytes(ka) != bytes(kb) or ka.bits != 256:
                mismatches += 1
    return mismatches == 0, f"{edges} edges, {mismatches} mismatches"


def containment():
    failures = []
    for plan in (build_complete_circulant(5)[1], build_bounded(complete_graph(5))[1]):
        s, f = plan.structure, plan.forest
        pairs = {r.id for r in plan.pairs.resources}

        def exposed(*nodes):
            held = set().union(*(stored_resources(s, f, v) for v in nodes))
            return derivation_closure(f, held) & pairs

        def incident(*nodes):
            return {pair_id(v, w) for v in nodes for w in plan.nodes if w != v}

        for v in plan.nodes:
            if exposed(v) != incident(v) or len(exposed(v)) != 4:
                failures.append((plan.scheme, v))
        for a, b in combinations(sorted(plan.nodes), 2):
            if exposed(a, b) != incident(a, b):
                failures.append((plan.scheme, a, b))
    return not failures, f"failures={failures}"


def rfc4231():
    bad = [i + 1 for i, (key, data, digest) in enumerate(RFC4231)
           if HMAC_SHA256(key, data).hex()[: len(digest)] != digest]
    return not bad, f"{len(RFC4231)} vectors, failing cases={bad}"


def chain():
    seed = KeyMaterial(bytes(range(32)))
    labels = [f"r{i}" for i in range(1001)]
    first, second = derive_chain(seed, labels), derive_chain(seed, labels)
    folded = seed
    for src, dst in zip(labels, labels[1:]):
        folded = derive_key(folded, src, dst)
        if len(folded) != 32:
            return False, "intermediate key length changed"
    ok = first == second == folded and len(first) == 32
    return ok, "1000 steps, deterministic and equal to the stepwise fold" if ok else "mismatch"


def euler():
    problems = []
    graphs = [cycle_graph(4), complete_graph(5)]
    graphs += [random_even_graph(10, random.Random(seed)) for seed in range(20)]
    for g in graphs:
        for algorithm in ("hierholzer", "fleury"):
            problems += validate_orientation(g, euler_circuit(g, algorithm))
        if make_eulerian(g) is not g:
            problems.append("even graph changed by make_eulerian")
    path = KeyingRelationshipGraph.from_pairs([(str(i), str(i + 1)) for i in range(5)])
    odd_graphs = [path] + [random_regular_graph(8, 3, random.Random(s)) for s in range(5)]
    for g in odd_graphs:
        evened = make_eulerian(g)
        if evened.odd_vertices() or not g.edges <= evened.edges:
            problems.append("make_eulerian left odd degrees")
        problems += validate_orientation(evened, euler_circuit(evened))
    return not problems, f"{len(graphs)} even and {len(odd_graphs)} odd graphs, problems={problems}"


CRITERIA = [
    (1, "lower bound reproduction", bounds, 1.0),
    (2, "irregular instance optimum exceeds bound", irregular, 10.0),
    (3, "storage inequality on random structures", universal_inequality, 120.0),
    (4, "soundness and collusion audit", soundness_audit, 120.0),
    (5, "pairwise key agreement", key_agreement, 10.0),
    (6, "compromise containment", containment, None),
    (7, "HMAC-SHA-256 RFC 4231 vectors", rfc4231, None),
    (8, "derivation chain behaviour", chain, 1.0),
    (9, "Euler circuit machinery", euler, None),
]


def run(number, title, check, budget):
    start = time.perf_counter()
    ok, detail = check()
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed >= budget:
        ok = False
        detail += f"; over time budget {budget:g}s"
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail} ({elapsed:.2f}s)"
    return ok, line


@pytest.mark.parametrize("number,title,check,budget", CRITERIA, ids=[f"c{c[0]}" for c in CRITERIA])
def test_criterion(number, title, check, budget, capsys):
    ok, line = run(number, title, check, budget)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
