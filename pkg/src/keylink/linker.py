"""Key linking: derivation forests over an access structure and their storage cost.

A link ``child <- parent`` means the child's key is derived from the parent's
key, so every holder of the parent key also gets the child key. A link is
only safe when the parent's privileged set is a proper subset of the
child's.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from . import kernels
from .access import AccessStructure, ResourceEntry

__all__ = [
    "ForestError",
    "InstanceTooLarge",
    "LinkForest",
    "StorageReport",
    "lower_bound",
    "greedy_link",
    "stored_resources",
    "storage_report",
    "derivation_closure",
    "exhaustive_link",
    "improper_links",
    "check_forest",
    "parse_forest",
]

EXHAUSTIVE_LIMIT = 12


class ForestError(ValueError):
    """A forest that does not fit its structure (unknown ids, cycles)."""


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class LinkForest:
    """Parent map over resources. Roots are simply absent from ``links``."""

    links: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        links = dict(sorted(self.links.items()))
        for child, parent in links.items():
            if child == parent:
                raise ForestError(f"resource {child!r} linked to itself")
        object.__setattr__(self, "links", links)

    def __hash__(self) -> int:
        return hash(tuple(self.links.items()))

    def parent(self, rid: str) -> str | None:
        return self.links.get(rid)

    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for child, parent in self.links.items():
            out.setdefault(parent, []).append(child)
        return out

    def roots(self, s: AccessStructure) -> list[str]:
        return sorted(r.id for r in s.resources if r.id not in self.links)

    def path_to_root(self, rid: str) -> list[str]:
        """``[root, ..., rid]``; raises ForestError on a cycle."""
        path = [rid]
        seen = {rid}
        while path[-1] in self.links:
            nxt = self.links[path[-1]]
            if nxt in seen:
                raise ForestError(f"cycle through {nxt!r}")
            seen.add(nxt)
            path.append(nxt)
        path.reverse()
        return path

    def topological_order(self, ids: Iterable[str]) -> list[str]:
        """Ids sorted so every parent precedes its children."""
        depth: dict[str, int] = {}
        for rid in ids:
            depth[rid] = len(self.path_to_root(rid)) - 1
        return sorted(depth, key=lambda r: (depth[r], r))

    def to_dict(self) -> dict:
        return {"links": [{"child": c, "parent": p} for c, p in self.links.items()]}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def parse_forest(data: bytes | str) -> LinkForest:
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ForestError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("links"), list):
        raise ForestError("expected an object with a 'links' list")
    links: dict[str, str] = {}
    for item in obj["links"]:
        if not isinstance(item, dict):
            raise ForestError(f"bad link {item!r}")
        child, parent = item.get("child"), item.get("parent")
        if not isinstance(child, str) or not isinstance(parent, str):
            raise ForestError(f"bad link {item!r}")
        if child in links:
            raise ForestError(f"resource {child!r} has more than one parent")
        links[child] = parent
    return LinkForest(links)


def check_forest(s: AccessStructure, f: LinkForest) -> None:
    """Raise ForestError unless every id is known and the links are acyclic."""
    for child, parent in f.links.items():
        for rid in (child, parent):
            if rid not in s:
                raise ForestError(f"forest references unknown resource {rid!r}")
    for child in f.links:
        f.path_to_root(child)


def improper_links(s: AccessStructure, f: LinkForest) -> list[tuple[str, str]]:
    """Links whose parent set is not a proper subset of the child set."""
    return [
        (c, p) for c, p in f.links.items() if not s.privileged(p) < s.privileged(c)
    ]


@dataclass(frozen=True)
class StorageReport:
    per_user: dict[str, int]
    max_storage: int
    avg_storage: Fraction
    lower_bound: int
    total_resources_m: int
    total_users_n: int

    @property
    def total_storage(self) -> int:
        return sum(self.per_user.values())

    def to_dict(self) -> dict:
        return {
            "per_user": dict(self.per_user),
            "max_storage": self.max_storage,
            "avg_storage": float(self.avg_storage),
            "avg_storage_exact": str(self.avg_storage),
            "total_storage": self.total_storage,
            "lower_bound": self.lower_bound,
            "total_resources_m": self.total_resources_m,
            "total_users_n": self.total_users_n,
        }


def lower_bound(s: AccessStructure) -> int:
    """Ceiling of m / n: no linking can push the maximum below this."""
    if s.n == 0:
        return 0
    return -(-s.m // s.n)


def _require_distinct(s: AccessStructure) -> None:
    if s.has_duplicate_memberships():
        raise ValueError("linking needs pairwise-distinct privileged sets")


def greedy_link(s: AccessStructure) -> LinkForest:
    """Single-pass subset linking.

    Resources are sorted by (privileged set size, id). Walking from the
    largest down, each resource is linked to the first proper subset found
    when scanning back towards index 0.
    """
    _require_distinct(s)
    order = sorted(s.resources, key=lambda r: (len(r.privileged), r.id))
    links: dict[str, str] = {}
    for current in range(len(order) - 1, 0, -1):
        members = order[current].privileged
        for pointer in range(current - 1, -1, -1):
            if order[pointer].privileged < members:
                links[order[current].id] = order[pointer].id
                break
    return LinkForest(links)


def _stores(s: AccessStructure, f: LinkForest, entry: ResourceEntry) -> frozenset[str]:
    parent = f.parent(entry.id)
    if parent is None:
        return entry.privileged
    return entry.privileged - s.privileged(parent)


def stored_resources(s: AccessStructure, f: LinkForest, user: str) -> frozenset[str]:
    """Resource keys ``user`` must keep in storage under forest ``f``."""
    return frozenset(r.id for r in s.resources if user in _stores(s, f, r))


def storage_report(s: AccessStructure, f: LinkForest) -> StorageReport:
    check_forest(s, f)
    per_user = {u: 0 for u in s.sorted_users()}
    for r in s.resources:
        for u in _stores(s, f, r):
            per_user[u] += 1
    total = sum(per_user.values())
    return StorageReport(
        per_user=per_user,
        max_storage=max(per_user.values(), default=0),
        avg_storage=Fraction(total, s.n) if s.n else Fraction(0),
        lower_bound=lower_bound(s),
        total_resources_m=s.m,
        total_users_n=s.n,
    )


def derivation_closure(f: LinkForest, held: Iterable[str]) -> frozenset[str]:
    """Everything derivable from ``held`` by walking links parent -> child."""
    children = f.children()
    out = set(held)
    stack = list(out)
    while stack:
        for child in children.get(stack.pop(), ()):
            if child not in out:
                out.add(child)
                stack.append(child)
    return frozenset(out)


def _prune_dominated(masks: list[int]) -> list[int]:
    unique = sorted(set(masks), key=lambda x: (bin(x).count("1"), x))
    keep: list[int] = []
    for m in unique:
        if not any(k & m == k for k in keep):
            keep.append(m)
    return keep


def exhaustive_link(
    s: AccessStructure,
    auxiliary: Iterable[ResourceEntry] = (),
    max_resources: int = EXHAUSTIVE_LIMIT,
) -> LinkForest:
    """Forest with the smallest possible maximum per-user storage.

    ``auxiliary`` resources are extra keys nobody needs to access but which
    may serve as link parents. The returned forest then lives on
    ``s.with_resources(auxiliary)``, where their storage counts like any
    other. Among optimal forests the
    lexicographically smallest parent map wins (children in id order, no
    parent sorting before any id).
    """
    _require_distinct(s)
    if len(s.resources) > max_resources:
        raise InstanceTooLarge(
            f"exhaustive linking is limited to {max_resources} resources, got {len(s.resources)}"
        )
    aux = list(auxiliary)
    full = s.with_resources(aux) if aux else s
    _require_distinct(full)
    if not full.resources:
        return LinkForest()

    users = full.sorted_users()
    bit = {u: 1 << i for i, u in enumerate(users)}

    def mask(members: Iterable[str]) -> int:
        out = 0
        for u in members:
            out |= bit[u]
        return out

    ids = sorted(full.resource_ids)
    options: list[list[tuple[str | None, int]]] = []
    for rid in ids:
        members = full.privileged(rid)
        opts: list[tuple[str | None, int]] = [(None, mask(members))]
        for pid in ids:
            if full.privileged(pid) < members:
                opts.append((pid, mask(members - full.privileged(pid))))
        options.append(opts)
    reduced = [_prune_dominated([m for _, m in opts]) for opts in options]

    def can_finish(start: int, loads: list[int], limit: int) -> bool:
        rest = sorted(reduced[start:], key=len)
        return kernels.feasible(rest, loads, limit)

    n = len(users)
    forced = [0] * n
    for opts in reduced:
        common = opts[0]
        for m in opts[1:]:
            common &= m
        for i in range(n):
            forced[i] += common >> i & 1
    limit = max(lower_bound(full), max(forced))
    while not can_finish(0, [0] * n, limit):
        limit += 1

    loads = [0] * n
    links: dict[str, str] = {}
    for i, rid in enumerate(ids):
        for parent, m in options[i]:
            trial = [loads[u] + (m >> u & 1) for u in range(n)]
            if max(trial) <= limit and can_finish(i + 1, trial, limit):
                loads = trial
                if parent is not None:
                    links[rid] = parent
                break
        else:  # pragma: no cover - can_finish(0, ...) guaranteed a completion
            raise AssertionError("search lost its feasible completion")
    return LinkForest(links)
