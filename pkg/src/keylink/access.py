"""Access structures: users, resources and who may hold which resource key.

A structure is a list of resources, each with a privileged user set and a
collection of forbidden user sets. When forbidden sets are not supplied the
single complement ``users - privileged`` is used, which makes the structure
ideal by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = [
    "AccessStructureError",
    "ResourceEntry",
    "AccessStructure",
    "parse_access_structure",
    "is_ideal",
    "user_degree",
    "random_structure",
]


class AccessStructureError(ValueError):
    """Raised for malformed or inconsistent access structures."""


def _check_id(value: object, what: str) -> str:
    if not isinstance(value, str) or not value:
        raise AccessStructureError(f"{what} must be a non-empty string, got {value!r}")
    if not value.isprintable() or any(ch.isspace() for ch in value):
        raise AccessStructureError(f"{what} {value!r} contains whitespace or unprintable characters")
    return value


def _unique_ids(items: Iterable[object], what: str) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    for item in items:
        ident = _check_id(item, what)
        if ident in seen:
            raise AccessStructureError(f"duplicate {what} {ident!r}")
        seen.add(ident)
        out.append(ident)
    return out


@dataclass(frozen=True)
class ResourceEntry:
    id: str
    privileged: frozenset[str]
    forbidden: frozenset[frozenset[str]] | None = None

    def __post_init__(self) -> None:
        _check_id(self.id, "resource id")
        object.__setattr__(self, "privileged", frozenset(self.privileged))
        if self.forbidden is not None:
            object.__setattr__(
                self, "forbidden", frozenset(frozenset(s) for s in self.forbidden)
            )
        if not self.privileged:
            raise AccessStructureError(f"resource {self.id!r} has an empty privileged set")


@dataclass(frozen=True)
class AccessStructure:
    """Users plus resources, in the order given.

    ``strict`` selects distinct-membership mode: two resources with the same
    privileged set are rejected. In non-strict mode they are allowed and
    ``m`` counts distinct memberships only.
    """

    users: frozenset[str]
    resources: tuple[ResourceEntry, ...]
    strict: bool = True
    _by_id: dict[str, ResourceEntry] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        users = frozenset(self.users)
        for u in users:
            _check_id(u, "user id")
        object.__setattr__(self, "users", users)

        entries: list[ResourceEntry] = []
        by_id: dict[str, ResourceEntry] = {}
        seen_sets: dict[frozenset[str], str] = {}
        for entry in self.resources:
            if entry.id in by_id:
                raise AccessStructureError(f"duplicate resource id {entry.id!r}")
            unknown = entry.privileged - users
            if unknown:
                raise AccessStructureError(
                    f"resource {entry.id!r} references unknown users {sorted(unknown)}"
                )
            forbidden = entry.forbidden
            if forbidden is None:
                complement = users - entry.privileged
                forbidden = frozenset([complement]) if complement else frozenset()
                entry = ResourceEntry(entry.id, entry.privileged, forbidden)
            for fset in forbidden:
                if not fset <= users:
                    raise AccessStructureError(
                        f"resource {entry.id!r} forbids unknown users {sorted(fset - users)}"
                    )
            if self.strict and entry.privileged in seen_sets:
                raise AccessStructureError(
                    f"resources {seen_sets[entry.privileged]!r} and {entry.id!r} have the same "
                    "privileged set (distinct-membership mode)"
                )
            seen_sets.setdefault(entry.privileged, entry.id)
            by_id[entry.id] = entry
            entries.append(entry)
        object.__setattr__(self, "resources", tuple(entries))
        object.__setattr__(self, "_by_id", by_id)

    @classmethod
    def build(
        cls,
        users: Iterable[str],
        privileged: Mapping[str, Iterable[str]],
        strict: bool = True,
    ) -> "AccessStructure":
        """Shorthand: ``AccessStructure.build(["a", "b"], {"r1": ["a"], ...})``."""
        return cls(
            frozenset(users),
            tuple(ResourceEntry(rid, frozenset(p)) for rid, p in privileged.items()),
            strict=strict,
        )

    @property
    def n(self) -> int:
        return len(self.users)

    @property
    def m(self) -> int:
        return len({r.privileged for r in self.resources})

    @property
    def resource_ids(self) -> list[str]:
        return [r.id for r in self.resources]

    def sorted_users(self) -> list[str]:
        return sorted(self.users)

    def __contains__(self, rid: object) -> bool:
        return rid in self._by_id

    def resource(self, rid: str) -> ResourceEntry:
        try:
            return self._by_id[rid]
        except KeyError:
            raise KeyError(f"unknown resource {rid!r}") from None

    def privileged(self, rid: str) -> frozenset[str]:
        return self.resource(rid).privileged

    def entitlement(self, user: str) -> frozenset[str]:
        """Resources the user is allowed to access."""
        return frozenset(r.id for r in self.resources if user in r.privileged)

    def has_duplicate_memberships(self) -> bool:
        return self.m != len(self.resources)

    def with_resources(self, extra: Iterable[ResourceEntry]) -> "AccessStructure":
        return AccessStructure(self.users, self.resources + tuple(extra), strict=self.strict)

    def to_dict(self) -> dict:
        resources = []
        for r in self.resources:
            item: dict = {"id": r.id, "privileged": sorted(r.privileged)}
            item["forbidden"] = sorted(sorted(s) for s in r.forbidden or ())
            resources.append(item)
        return {"users": self.sorted_users(), "resources": resources}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _structure_from_obj(obj: object, strict: bool) -> AccessStructure:
    if not isinstance(obj, dict):
        raise AccessStructureError("top level must be a JSON object")
    if "users" not in obj or "resources" not in obj:
        raise AccessStructureError("missing 'users' or 'resources'")
    if not isinstance(obj["users"], list) or not isinstance(obj["resources"], list):
        raise AccessStructureError("'users' and 'resources' must be lists")
    users = _unique_ids(obj["users"], "user id")
    entries = []
    for item in obj["resources"]:
        if not isinstance(item, dict) or "id" not in item or "privileged" not in item:
            raise AccessStructureError(f"bad resource entry {item!r}")
        if not isinstance(item["privileged"], list):
            raise AccessStructureError(f"privileged set of {item['id']!r} must be a list")
        privileged = _unique_ids(item["privileged"], "user id")
        forbidden = None
        if "forbidden" in item and item["forbidden"] is not None:
            if not isinstance(item["forbidden"], list):
                raise AccessStructureError(f"forbidden sets of {item['id']!r} must be a list")
            fsets = []
            for s in item["forbidden"]:
                if not isinstance(s, list):
                    raise AccessStructureError(f"forbidden set {s!r} must be a list")
                fs = frozenset(_unique_ids(s, "user id"))
                if fs in fsets:
                    raise AccessStructureError(f"duplicate forbidden set {sorted(fs)}")
                fsets.append(fs)
            forbidden = frozenset(fsets)
        entries.append(ResourceEntry(_check_id(item["id"], "resource id"), frozenset(privileged), forbidden))
    return AccessStructure(frozenset(users), tuple(entries), strict=strict)


def parse_access_structure(data: bytes | str, strict: bool = True) -> AccessStructure:
    """Parse the JSON structure format.

    ``{"users": [...], "resources": [{"id": ..., "privileged": [...],
    "forbidden": [[...], ...]}]}``; ``forbidden`` is optional.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise AccessStructureError(f"input is not UTF-8: {exc}") from None
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise AccessStructureError(f"invalid JSON: {exc}") from None
    return _structure_from_obj(obj, strict)


def is_ideal(s: AccessStructure) -> bool:
    # an empty complement has nobody to exclude, so it counts as ideal
    for r in s.resources:
        complement = s.users - r.privileged
        if complement and complement not in (r.forbidden or ()):
            return False
    return True


def user_degree(s: AccessStructure, user: str) -> int:
    """Number of resource keys ``user`` stores when nothing is linked."""
    if user not in s.users:
        raise AccessStructureError(f"unknown user {user!r}")
    return sum(1 for r in s.resources if user in r.privileged)


def random_structure(
    n_users: int, n_resources: int, rng: random.Random, prefix: str = "r"
) -> AccessStructure:
    """Random ideal structure with pairwise-distinct privileged sets."""
    if n_users < 1:
        raise ValueError("need at least one user")
    if n_resources > 2**n_users - 1:
        raise ValueError(f"at most {2**n_users - 1} distinct memberships over {n_users} users")
    users = [f"u{i}" for i in range(1, n_users + 1)]
    seen: set[frozenset[str]] = set()
    privileged: dict[str, list[str]] = {}
    width = len(str(n_resources))
    while len(privileged) < n_resources:
        size = rng.randint(1, n_users)
        members = frozenset(rng.sample(users, size))
        if members in seen:
            continue
        seen.add(members)
        privileged[f"{prefix}{len(privileged) + 1:0{width}d}"] = sorted(members)
    return AccessStructure.build(users, privileged)
