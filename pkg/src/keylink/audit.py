"""Brute-force checks that a linked key assignment is secure and sound.

Every user, and every coalition of users up to a size cap, must be able to
compute exactly the keys its members are entitled to: nothing missing and
nothing extra. The combinatorial checks work on the forest alone; the
concrete check recomputes real key bytes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping

from . import kernels
from .access import AccessStructure, is_ideal
from .kdf import HMAC_SHA256, KeyMaterial, derive_key, resource_keys
from .linker import LinkForest, check_forest, derivation_closure, stored_resources

__all__ = [
    "EXHAUSTIVE_USER_LIMIT",
    "NonIdealStructure",
    "Violation",
    "AuditReport",
    "check_soundness",
    "check_collusion",
    "check_concrete",
    "brute_force_collusion",
]

EXHAUSTIVE_USER_LIMIT = 16

MISSING = "missing-entitlement"
EXCESS = "excess-derivation"
MISMATCH = "key-mismatch"


class NonIdealStructure(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    subject: tuple[str, ...]
    resource: str
    kind: str

    def to_dict(self) -> dict:
        return {"subject": list(self.subject), "resource": self.resource, "kind": self.kind}


@dataclass(frozen=True)
class AuditReport:
    violations: tuple[Violation, ...] = ()
    coalitions_checked: int = 0
    sampled: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        out = {
            "ok": self.ok,
            "coalitions_checked": self.coalitions_checked,
            "sampled": self.sampled,
            "violations": [v.to_dict() for v in self.violations],
        }
        if self.notes:
            out["notes"] = list(self.notes)
        return out


class _Masks:
    """Bitmask encoding of a structure + forest for the kernels."""

    def __init__(self, s: AccessStructure, f: LinkForest) -> None:
        check_forest(s, f)
        self.users = s.sorted_users()
        self.ids = sorted(s.resource_ids)
        index = {rid: i for i, rid in enumerate(self.ids)}
        self.stored = []
        self.entitled = []
        for u in self.users:
            st = 0
            for rid in stored_resources(s, f, u):
                st |= 1 << index[rid]
            en = 0
            for rid in s.entitlement(u):
                en |= 1 << index[rid]
            self.stored.append(st)
            self.entitled.append(en)
        self.children = [0] * len(self.ids)
        for child, parent in f.links.items():
            self.children[index[parent]] |= 1 << index[child]
        self.order = [index[rid] for rid in f.topological_order(self.ids)]

    def expand(self, raw: list[tuple[int, int, int]]) -> list[Violation]:
        out = []
        for coalition, excess, missing in raw:
            subject = tuple(u for i, u in enumerate(self.users) if coalition >> i & 1)
            for i, rid in enumerate(self.ids):
                if missing >> i & 1:
                    out.append(Violation(subject, rid, MISSING))
                if excess >> i & 1:
                    out.append(Violation(subject, rid, EXCESS))
        return out


def check_soundness(s: AccessStructure, f: LinkForest) -> AuditReport:
    """Each user derives exactly its own entitlement from what it stores."""
    masks = _Masks(s, f)
    singles = [1 << i for i in range(len(masks.users))]
    raw = kernels.check_coalitions(masks.stored, masks.entitled, masks.order, masks.children, singles)
    return AuditReport(tuple(masks.expand(raw)), len(singles))


def check_collusion(
    s: AccessStructure,
    f: LinkForest,
    max_coalition: int,
    rng: random.Random | None = None,
    samples: int = 20000,
) -> AuditReport:
    """Every coalition of at most ``max_coalition`` users derives exactly
    the union of its members' entitlements.

    All coalitions are enumerated up to EXHAUSTIVE_USER_LIMIT users; beyond
    that ``samples`` random coalitions are drawn from ``rng``.
    """
    if not is_ideal(s):
        raise NonIdealStructure(
            "collusion audit needs an ideal structure: every resource must forbid "
            "the full complement of its privileged set"
        )
    if max_coalition < 1:
        raise ValueError("max_coalition must be at least 1")
    masks = _Masks(s, f)
    n = len(masks.users)
    size = min(max_coalition, n)
    if n <= EXHAUSTIVE_USER_LIMIT:
        checked, raw = kernels.scan_coalitions(
            masks.stored, masks.entitled, masks.order, masks.children, size
        )
        return AuditReport(tuple(masks.expand(raw)), checked)

    rng = rng or random.Random(0)
    coalitions = {1 << i for i in range(n)}
    if size > 1:
        for _ in range(samples):
            c = 0
            for i in rng.sample(range(n), rng.randint(2, size)):
                c |= 1 << i
            coalitions.add(c)
    ordered = sorted(coalitions)
    raw = kernels.check_coalitions(masks.stored, masks.entitled, masks.order, masks.children, ordered)
    return AuditReport(
        tuple(masks.expand(raw)),
        len(ordered),
        sampled=True,
        notes=(f"{n} users exceed the exhaustive limit; coalitions were sampled",),
    )


def check_concrete(
    s: AccessStructure,
    f: LinkForest,
    seeds: Mapping[str, KeyMaterial],
    prf: Callable[[bytes, bytes], bytes] = HMAC_SHA256,
) -> AuditReport:
    """Recompute real keys from each user's stored ring using only public
    labels and compare byte-for-byte with the authority's keys."""
    check_forest(s, f)
    truth = resource_keys(s, f, seeds, prf)
    children = f.children()
    violations = []
    for u in s.sorted_users():
        ring = {rid: truth[rid] for rid in stored_resources(s, f, u)}
        derived = dict(ring)
        stack = list(ring)
        while stack:
            rid = stack.pop()
            for child in children.get(rid, ()):
                if child not in derived:
                    derived[child] = derive_key(derived[rid], rid, child, prf)
                    stack.append(child)
        entitled = s.entitlement(u)
        for rid in sorted(set(derived) | entitled):
            if rid not in derived:
                violations.append(Violation((u,), rid, MISSING))
            elif rid not in entitled:
                violations.append(Violation((u,), rid, EXCESS))
            elif derived[rid] != truth[rid]:
                violations.append(Violation((u,), rid, MISMATCH))
    return AuditReport(tuple(violations), s.n)


def brute_force_collusion(s: AccessStructure, f: LinkForest, max_coalition: int) -> list[Violation]:
    """Set-based reference used to cross-check the bitmask kernels."""
    out = []
    users = s.sorted_users()
    for size in range(1, min(max_coalition, len(users)) + 1):
        for group in combinations(users, size):
            held: set[str] = set()
            want: set[str] = set()
            for u in group:
                held |= stored_resources(s, f, u)
                want |= s.entitlement(u)
            got = derivation_closure(f, held)
            for rid in sorted(s.resource_ids):
                if rid in want and rid not in got:
                    out.append(Violation(group, rid, MISSING))
                if rid in got and rid not in want:
                    out.append(Violation(group, rid, EXCESS))
    return out
