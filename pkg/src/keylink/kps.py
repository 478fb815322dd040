"""Pairwise key pre-distribution for sensor networks via key linking.

Every pairwise key is a resource shared by its two endpoints. Orienting the
keying graph decides who derives which key: the tail of an edge derives the
edge key from its own seed, the head stores a copy. An Euler circuit gives an
orientation in which every node has equally many incoming and outgoing
edges, so per-node storage is about half the degree plus one seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .access import AccessStructure, ResourceEntry
from .kdf import HMAC_SHA256, KeyMaterial, derive_key, resource_keys
from .linker import LinkForest, lower_bound, stored_resources

__all__ = [
    "GraphError",
    "NoSimplePairing",
    "KeyingRelationshipGraph",
    "EulerOrientation",
    "NodePlan",
    "KpsPlan",
    "parse_edge_list",
    "pair_id",
    "seed_id",
    "make_eulerian",
    "euler_circuit",
    "validate_orientation",
    "build_star",
    "build_complete_circulant",
    "build_bounded",
    "provision",
    "pairwise_key",
    "complete_graph",
    "cycle_graph",
    "random_regular_graph",
    "random_even_graph",
]


class GraphError(ValueError):
    pass


class NoSimplePairing(GraphError):
    """Odd-degree vertices cannot be paired without creating a parallel edge."""


def _edge(a: str, b: str) -> frozenset[str]:
    return frozenset((a, b))


@dataclass(frozen=True)
class KeyingRelationshipGraph:
    nodes: frozenset[str]
    edges: frozenset[frozenset[str]]
    _adj: dict[str, tuple[str, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        nodes = set(self.nodes)
        edges = set()
        for e in self.edges:
            e = frozenset(e)
            if len(e) != 2:
                raise GraphError(f"self-loop or malformed edge {sorted(e)}")
            nodes |= e
            edges.add(e)
        for v in nodes:
            if not isinstance(v, str) or not v or any(ch.isspace() for ch in v):
                raise GraphError(f"bad node id {v!r}")
        adj: dict[str, list[str]] = {v: [] for v in nodes}
        for e in edges:
            a, b = sorted(e)
            adj[a].append(b)
            adj[b].append(a)
        object.__setattr__(self, "nodes", frozenset(nodes))
        object.__setattr__(self, "edges", frozenset(edges))
        object.__setattr__(self, "_adj", {v: tuple(sorted(ns)) for v, ns in adj.items()})

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[str, str]], nodes: Iterable[str] = ()
    ) -> "KeyingRelationshipGraph":
        edges: set[frozenset[str]] = set()
        for a, b in pairs:
            if a == b:
                raise GraphError(f"self-loop at {a!r}")
            e = _edge(a, b)
            if e in edges:
                raise GraphError(f"parallel edge {a!r}-{b!r}")
            edges.add(e)
        return cls(frozenset(nodes), frozenset(edges))

    def neighbors(self, v: str) -> tuple[str, ...]:
        return self._adj[v]

    def degree(self, v: str) -> int:
        return len(self._adj[v])

    def odd_vertices(self) -> list[str]:
        return sorted(v for v in self.nodes if self.degree(v) % 2)

    def has_edge(self, a: str, b: str) -> bool:
        return _edge(a, b) in self.edges

    def sorted_edges(self) -> list[tuple[str, str]]:
        return sorted(tuple(sorted(e)) for e in self.edges)  # type: ignore[misc]

    def is_connected(self) -> bool:
        """Connectivity ignoring isolated nodes."""
        active = [v for v in self.nodes if self._adj[v]]
        if not active:
            return True
        seen = {active[0]}
        stack = [active[0]]
        while stack:
            for w in self._adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(active)

    def to_edge_list(self) -> str:
        return "".join(f"{a} {b}\n" for a, b in self.sorted_edges())


def parse_edge_list(text: str) -> KeyingRelationshipGraph:
    """``u v`` per line; ``#`` starts a comment; a lone id declares a node."""
    pairs = []
    nodes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 1:
            nodes.append(parts[0])
        elif len(parts) == 2:
            pairs.append((parts[0], parts[1]))
        else:
            raise GraphError(f"line {lineno}: expected 'u v', got {raw!r}")
    try:
        return KeyingRelationshipGraph.from_pairs(pairs, nodes)
    except GraphError as exc:
        raise GraphError(f"edge list: {exc}") from None


def complete_graph(n: int) -> KeyingRelationshipGraph:
    ids = [str(i) for i in range(n)]
    return KeyingRelationshipGraph.from_pairs(
        [(ids[i], ids[j]) for i in range(n) for j in range(i + 1, n)], ids
    )


def cycle_graph(n: int) -> KeyingRelationshipGraph:
    ids = [str(i) for i in range(n)]
    return KeyingRelationshipGraph.from_pairs([(ids[i], ids[(i + 1) % n]) for i in range(n)], ids)


def random_regular_graph(n: int, c: int, rng: random.Random) -> KeyingRelationshipGraph:
    """Connected random c-regular graph on nodes "0".."n-1"."""
    import networkx as nx

    for _ in range(1000):
        g = nx.random_regular_graph(c, n, seed=rng.randrange(2**32))
        if nx.is_connected(g):
            return KeyingRelationshipGraph.from_pairs(
                [(str(a), str(b)) for a, b in g.edges()], [str(v) for v in g.nodes()]
            )
    raise GraphError(f"could not sample a connected {c}-regular graph on {n} nodes")


def random_even_graph(n: int, rng: random.Random, extra_cycles: int = 3) -> KeyingRelationshipGraph:
    """Connected graph with all degrees even: a Hamiltonian cycle plus
    edge-disjoint random cycles."""
    if n < 3:
        raise ValueError("need at least 3 nodes")
    ids = [str(i) for i in range(n)]
    order = ids[:]
    rng.shuffle(order)
    edges = {_edge(order[i], order[(i + 1) % n]) for i in range(n)}
    for _ in range(extra_cycles):
        for _attempt in range(50):
            length = rng.randint(3, n)
            cyc = rng.sample(ids, length)
            new = {_edge(cyc[i], cyc[(i + 1) % length]) for i in range(length)}
            if not new & edges:
                edges |= new
                break
    return KeyingRelationshipGraph(frozenset(ids), frozenset(edges))


def make_eulerian(g: KeyingRelationshipGraph) -> KeyingRelationshipGraph:
    """Add one edge per pair of odd-degree vertices.

    Vertices are paired in sorted order, each with the next available
    vertex it is not already adjacent to. Backtracks if that greedy choice
    dead-ends; raises NoSimplePairing if no pairing avoids parallel edges.
    """
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    odd = g.odd_vertices()
    if not odd:
        return g

    def pair_up(remaining: list[str]) -> list[tuple[str, str]] | None:
        if not remaining:
            return []
        a = remaining[0]
        for i in range(1, len(remaining)):
            b = remaining[i]
            if g.has_edge(a, b):
                continue
            rest = pair_up(remaining[1:i] + remaining[i + 1 :])
            if rest is not None:
                return [(a, b)] + rest
        return None

    pairs = pair_up(odd)
    if pairs is None:
        raise NoSimplePairing(
            f"odd-degree vertices {odd} cannot be paired without duplicating an existing edge"
        )
    return KeyingRelationshipGraph(g.nodes, g.edges | {_edge(a, b) for a, b in pairs})


@dataclass(frozen=True)
class EulerOrientation:
    circuit: tuple[tuple[str, str], ...]

    @property
    def directed_edges(self) -> frozenset[tuple[str, str]]:
        return frozenset(self.circuit)

    def out_edges(self, v: str) -> list[tuple[str, str]]:
        return sorted(e for e in self.circuit if e[0] == v)

    def in_edges(self, v: str) -> list[tuple[str, str]]:
        return sorted(e for e in self.circuit if e[1] == v)


def _check_eulerian(g: KeyingRelationshipGraph) -> str | None:
    odd = g.odd_vertices()
    if odd:
        raise GraphError(f"odd-degree vertices present: {odd}")
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    active = sorted(v for v in g.nodes if g.degree(v))
    return active[0] if active else None


def _hierholzer(g: KeyingRelationshipGraph, start: str) -> list[str]:
    pointer = {v: 0 for v in g.nodes}
    used: set[frozenset[str]] = set()
    stack = [start]
    walk: list[str] = []
    while stack:
        v = stack[-1]
        ns = g.neighbors(v)
        while pointer[v] < len(ns) and _edge(v, ns[pointer[v]]) in used:
            pointer[v] += 1
        if pointer[v] == len(ns):
            walk.append(stack.pop())
        else:
            w = ns[pointer[v]]
            used.add(_edge(v, w))
            stack.append(w)
    walk.reverse()
    return walk


def _reachable(adj: Mapping[str, set[str]], start: str) -> int:
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen)


def _fleury(g: KeyingRelationshipGraph, start: str) -> list[str]:
    adj = {v: set(g.neighbors(v)) for v in g.nodes}
    walk = [start]
    v = start
    while adj[v]:
        candidates = sorted(adj[v])
        chosen = candidates[0]
        if len(candidates) > 1:
            for w in candidates:
                # w is a bridge iff removing it shrinks what v can reach
                before = _reachable(adj, v)
                adj[v].discard(w)
                adj[w].discard(v)
                after = _reachable(adj, w)
                adj[v].add(w)
                adj[w].add(v)
                if after == before:
                    chosen = w
                    break
        adj[v].discard(chosen)
        adj[chosen].discard(v)
        walk.append(chosen)
        v = chosen
    return walk


def euler_circuit(g: KeyingRelationshipGraph, algorithm: str = "hierholzer") -> EulerOrientation:
    """Closed walk using every edge once; edges oriented along the walk.

    ``algorithm`` is ``"hierholzer"`` (linear time) or ``"fleury"`` (bridge
    avoidance, quadratic). Both start at the smallest non-isolated node and
    prefer smaller neighbours.
    """
    start = _check_eulerian(g)
    if start is None:
        return EulerOrientation(())
    if algorithm == "hierholzer":
        walk = _hierholzer(g, start)
    elif algorithm == "fleury":
        walk = _fleury(g, start)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return EulerOrientation(tuple(zip(walk, walk[1:])))


def validate_orientation(g: KeyingRelationshipGraph, o: EulerOrientation) -> list[str]:
    """Problems found in ``o`` as a circuit of ``g``; empty when valid."""
    problems = []
    seen: set[frozenset[str]] = set()
    for a, b in o.circuit:
        e = _edge(a, b)
        if e not in g.edges:
            problems.append(f"edge {a}-{b} is not in the graph")
        elif e in seen:
            problems.append(f"edge {a}-{b} used twice")
        seen.add(e)
    missing = g.edges - seen
    if missing:
        problems.append(f"{len(missing)} edges not traversed")
    for (_, head), (tail, _) in zip(o.circuit, o.circuit[1:]):
        if head != tail:
            problems.append(f"walk breaks between {head} and {tail}")
    if o.circuit and o.circuit[-1][1] != o.circuit[0][0]:
        problems.append("walk is not closed")
    for v in g.nodes:
        out_deg = sum(1 for a, _ in o.circuit if a == v)
        in_deg = sum(1 for _, b in o.circuit if b == v)
        if out_deg != in_deg or out_deg * 2 != g.degree(v):
            problems.append(f"node {v}: in={in_deg} out={out_deg} degree={g.degree(v)}")
    return problems


def pair_id(a: str, b: str) -> str:
    lo, hi = sorted((a, b))
    return f"pair:{lo}:{hi}"


def seed_id(v: str) -> str:
    return f"seed:{v}"


@dataclass(frozen=True)
class NodePlan:
    seed: str | None
    stored: tuple[str, ...]
    derivable: tuple[str, ...]

    @property
    def storage(self) -> int:
        return len(self.stored) + (self.seed is not None)


@dataclass(frozen=True)
class KpsPlan:
    """Who stores and who derives each pairwise key.

    ``pairs`` is the access structure of the pairwise keys alone (the one
    the storage bound is stated for). ``structure`` adds one single-member
    seed resource per node that derives anything, and ``forest`` links each
    edge key to its tail's seed.
    """

    scheme: str
    nodes: dict[str, NodePlan]
    pairs: AccessStructure
    structure: AccessStructure
    forest: LinkForest
    added_edges: tuple[str, ...] = ()
    extension: bool = False

    @property
    def max_storage(self) -> int:
        return max((p.storage for p in self.nodes.values()), default=0)

    @property
    def lower_bound(self) -> int:
        return lower_bound(self.pairs)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "extension": self.extension,
            "lower_bound": self.lower_bound,
            "max_storage": self.max_storage,
            "added_edges": list(self.added_edges),
            "nodes": {
                v: {
                    "seed": p.seed,
                    "stored": list(p.stored),
                    "derivable": list(p.derivable),
                    "storage": p.storage,
                }
                for v, p in sorted(self.nodes.items())
            },
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _check_labels(nodes: Iterable[str]) -> None:
    for v in nodes:
        if ":" in v:
            raise GraphError(f"node id {v!r} may not contain ':' (reserved for key labels)")


def _plan(
    scheme: str,
    nodes: Iterable[str],
    arcs: Iterable[tuple[str, str]],
    added: Iterable[str] = (),
    extension: bool = False,
) -> KpsPlan:
    nodes = sorted(set(nodes))
    _check_labels(nodes)
    arcs = sorted(set(arcs))
    tails = sorted({a for a, _ in arcs})
    pair_entries = [ResourceEntry(pair_id(a, b), frozenset((a, b))) for a, b in arcs]
    seed_entries = [ResourceEntry(seed_id(v), frozenset((v,))) for v in tails]
    pairs = AccessStructure(frozenset(nodes), tuple(pair_entries))
    structure = AccessStructure(frozenset(nodes), tuple(seed_entries + pair_entries))
    forest = LinkForest({pair_id(a, b): seed_id(a) for a, b in arcs})
    per_node = {}
    for v in nodes:
        per_node[v] = NodePlan(
            seed=seed_id(v) if v in tails else None,
            stored=tuple(sorted(pair_id(a, b) for a, b in arcs if b == v)),
            derivable=tuple(sorted(pair_id(a, b) for a, b in arcs if a == v)),
        )
    return KpsPlan(scheme, per_node, pairs, structure, forest, tuple(sorted(added)), extension)


def build_star(n: int, base: str = "base") -> tuple[AccessStructure, KpsPlan]:
    """One base station sharing a key with each of ``n`` sensors "1".."n".

    The base keeps a single master seed and derives every sensor key; each
    sensor stores only its own key.
    """
    if n < 1:
        raise ValueError("a star needs at least one sensor")
    sensors = [str(i) for i in range(1, n + 1)]
    if base in sensors:
        raise ValueError(f"base id {base!r} clashes with a sensor id")
    plan = _plan("star", [base, *sensors], [(base, s) for s in sensors])
    return plan.pairs, plan


def build_complete_circulant(n: int, extend: bool = False) -> tuple[AccessStructure, KpsPlan]:
    """All C(n, 2) pairwise keys on nodes "0".."n-1".

    For odd ``n`` node i derives the keys to the (n-1)/2 nodes after it
    (mod n) and stores those from the (n-1)/2 nodes before it. Even ``n``
    needs ``extend=True`` and goes through :func:`build_bounded`.
    """
    if n < 3:
        raise ValueError("complete scheme needs n >= 3")
    if n % 2 == 0:
        if not extend:
            raise ValueError("complete scheme needs odd n; pass extend=True for the even-n fallback")
        _, plan = build_bounded(complete_graph(n))
        plan = KpsPlan("complete-extended", plan.nodes, plan.pairs, plan.structure,
                       plan.forest, plan.added_edges, True)
        return plan.pairs, plan
    half = (n - 1) // 2
    arcs = [(str(i), str((i + d) % n)) for i in range(n) for d in range(1, half + 1)]
    plan = _plan("complete", [str(i) for i in range(n)], arcs)
    return plan.pairs, plan


def _virtual_orientation(g: KeyingRelationshipGraph) -> list[tuple[str, str]]:
    # pair odd vertices through fresh degree-2 relay nodes, which keeps the
    # graph simple; dropping the relays afterwards leaves |in - out| <= 1
    odd = g.odd_vertices()
    extra = set()
    relays = set()
    for k in range(0, len(odd), 2):
        relay = f"virtual:{k // 2}"
        relays.add(relay)
        extra |= {_edge(odd[k], relay), _edge(relay, odd[k + 1])}
    aug = KeyingRelationshipGraph(g.nodes | relays, g.edges | extra)
    return [(a, b) for a, b in euler_circuit(aug).circuit if a not in relays and b not in relays]


def build_bounded(g: KeyingRelationshipGraph) -> tuple[AccessStructure, KpsPlan]:
    """Orient ``g`` along an Euler circuit; tails derive, heads store.

    Odd-degree vertices are first paired up with new edges (which become
    extra pairwise keys). When no such pairing exists without parallel
    edges, the orientation is balanced through virtual relay nodes instead
    and the plan is flagged as an extension.
    """
    _check_labels(g.nodes)
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    added: list[str] = []
    extension = False
    if g.odd_vertices():
        try:
            even = make_eulerian(g)
        except NoSimplePairing:
            arcs = _virtual_orientation(g)
            extension = True
        else:
            added = [pair_id(*sorted(e)) for e in even.edges - g.edges]
            arcs = list(euler_circuit(even).circuit)
            g = even
    else:
        arcs = list(euler_circuit(g).circuit)
    plan = _plan("bounded", g.nodes, arcs, added, extension)
    return plan.pairs, plan


def provision(
    plan: KpsPlan,
    seeds: Mapping[str, KeyMaterial],
    prf: Callable[[bytes, bytes], bytes] = HMAC_SHA256,
) -> dict[str, dict[str, KeyMaterial]]:
    """Key ring loaded onto each node: its seed (if any) plus stored edge keys."""
    keys = resource_keys(plan.structure, plan.forest, seeds, prf)
    return {
        v: {rid: keys[rid] for rid in sorted(stored_resources(plan.structure, plan.forest, v))}
        for v in plan.nodes
    }


def pairwise_key(
    plan: KpsPlan,
    node: str,
    peer: str,
    ring: Mapping[str, KeyMaterial],
    prf: Callable[[bytes, bytes], bytes] = HMAC_SHA256,
) -> KeyMaterial:
    """Key ``node`` uses with ``peer``, computed only from ``node``'s ring."""
    pid = pair_id(node, peer)
    if pid in ring:
        return ring[pid]
    sid = seed_id(node)
    if plan.forest.parent(pid) == sid and sid in ring:
        return derive_key(ring[sid], sid, pid, prf)
    raise KeyError(f"node {node!r} holds no key material for {pid!r}")
