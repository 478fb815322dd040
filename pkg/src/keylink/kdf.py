"""Key derivation with a keyed pseudorandom function.

A child key is ``f(parent_key, encode_label(parent_id, child_id))``; chains
fold that step along a path. The default PRF is HMAC-SHA-256.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .access import AccessStructure
from .linker import ForestError, LinkForest

__all__ = [
    "KeyMaterial",
    "Prf",
    "HmacPrf",
    "HMAC_SHA256",
    "PRFS",
    "LabelError",
    "encode_label",
    "derive_key",
    "derive_chain",
    "resource_key",
    "resource_keys",
    "random_seeds",
    "parse_seeds",
    "dump_seeds",
]

DEFAULT_KEY_BITS = 256


class LabelError(ValueError):
    pass


class KeyMaterial:
    """Fixed-length secret key.

    The bytes sit in a private bytearray that is overwritten when the object
    is collected. Equality uses a constant-time comparison.
    """

    __slots__ = ("_buf",)

    def __init__(self, data: bytes | bytearray, bits: int = DEFAULT_KEY_BITS) -> None:
        if bits <= 0 or bits % 8:
            raise ValueError(f"key length must be a positive multiple of 8 bits, got {bits}")
        if len(data) != bits // 8:
            raise ValueError(f"expected {bits // 8} key bytes, got {len(data)}")
        self._buf = bytearray(data)

    @classmethod
    def random(cls, bits: int = DEFAULT_KEY_BITS) -> "KeyMaterial":
        return cls(secrets.token_bytes(bits // 8), bits)

    @classmethod
    def from_hex(cls, text: str, bits: int = DEFAULT_KEY_BITS) -> "KeyMaterial":
        try:
            raw = bytes.fromhex(text)
        except ValueError:
            raise ValueError("key is not valid hex") from None
        return cls(raw, bits)

    @property
    def bits(self) -> int:
        return len(self._buf) * 8

    def __bytes__(self) -> bytes:
        return bytes(self._buf)

    def __len__(self) -> int:
        return len(self._buf)

    def hex(self) -> str:
        return self._buf.hex()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KeyMaterial):
            return NotImplemented
        return hmac.compare_digest(self._buf, other._buf)

    def __hash__(self) -> int:
        return hash(bytes(self._buf))

    def __repr__(self) -> str:
        return f"KeyMaterial(<{self.bits} bits>)"

    def __del__(self) -> None:
        buf = getattr(self, "_buf", None)
        if buf is not None:
            buf[:] = bytes(len(buf))


class Prf(Protocol):
    name: str

    def __call__(self, key: bytes, data: bytes) -> bytes: ...


class HmacPrf:
    """HMAC over a hashlib digest; output truncated to the key length."""

    def __init__(self, digest: str = "sha256") -> None:
        self.digest = digest
        self.name = f"hmac-{digest}"
        self.output_bits = hashlib.new(digest).digest_size * 8

    def __call__(self, key: bytes, data: bytes) -> bytes:
        return hmac.new(key, data, self.digest).digest()

    def __repr__(self) -> str:
        return f"HmacPrf({self.digest!r})"


HMAC_SHA256 = HmacPrf("sha256")
PRFS: dict[str, Callable[[bytes, bytes], bytes]] = {"hmac-sha256": HMAC_SHA256}


def encode_label(src: str, dst: str) -> bytes:
    """Length-prefixed ``src || dst``: 4-byte big-endian length, then UTF-8 bytes, twice."""
    if src == dst:
        raise LabelError(f"source and destination labels are identical: {src!r}")
    a = src.encode("utf-8")
    b = dst.encode("utf-8")
    return len(a).to_bytes(4, "big") + a + len(b).to_bytes(4, "big") + b


def derive_key(
    k: KeyMaterial, src: str, dst: str, prf: Callable[[bytes, bytes], bytes] = HMAC_SHA256
) -> KeyMaterial:
    out = prf(bytes(k), encode_label(src, dst))
    if len(out) < len(k):
        raise ValueError(f"PRF output ({len(out)} bytes) shorter than the key ({len(k)} bytes)")
    return KeyMaterial(out[: len(k)], k.bits)


def derive_chain(
    k: KeyMaterial, path: Sequence[str], prf: Callable[[bytes, bytes], bytes] = HMAC_SHA256
) -> KeyMaterial:
    """Fold :func:`derive_key` along consecutive pairs of ``path``."""
    if len(path) < 2:
        raise LabelError("a derivation path needs at least two labels")
    key = k
    for src, dst in zip(path, path[1:]):
        key = derive_key(key, src, dst, prf)
    return key


def resource_key(
    structure: AccessStructure | None,
    forest: LinkForest,
    seeds: Mapping[str, KeyMaterial],
    r: str,
    prf: Callable[[bytes, bytes], bytes] = HMAC_SHA256,
) -> KeyMaterial:
    """Key of resource ``r``: its seed if it is a root, otherwise derived
    down the chain from the root's seed."""
    if structure is not None and r not in structure:
        raise KeyError(f"unknown resource {r!r}")
    path = forest.path_to_root(r)
    root = path[0]
    if root not in seeds:
        raise KeyError(f"no seed for root resource {root!r}")
    if len(path) == 1:
        return seeds[root]
    return derive_chain(seeds[root], path, prf)


def resource_keys(
    structure: AccessStructure,
    forest: LinkForest,
    seeds: Mapping[str, KeyMaterial],
    prf: Callable[[bytes, bytes], bytes] = HMAC_SHA256,
) -> dict[str, KeyMaterial]:
    """All resource keys, each link evaluated once."""
    out: dict[str, KeyMaterial] = {}
    for rid in forest.topological_order(structure.resource_ids):
        parent = forest.parent(rid)
        if parent is None:
            if rid not in seeds:
                raise KeyError(f"no seed for root resource {rid!r}")
            out[rid] = seeds[rid]
        else:
            if parent not in out:
                raise ForestError(f"parent {parent!r} of {rid!r} is not in the structure")
            out[rid] = derive_key(out[parent], parent, rid, prf)
    return out


def random_seeds(ids: Iterable[str], bits: int = DEFAULT_KEY_BITS) -> dict[str, KeyMaterial]:
    return {rid: KeyMaterial.random(bits) for rid in ids}


def parse_seeds(data: bytes | str, bits: int = DEFAULT_KEY_BITS) -> dict[str, KeyMaterial]:
    """Seed file: ``{"r1": "<hex>", ...}``."""
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValueError(f"invalid seed file: {exc}") from None
    if not isinstance(obj, dict):
        raise ValueError("seed file must be a JSON object")
    seeds = {}
    for rid, text in obj.items():
        if not isinstance(text, str):
            raise ValueError(f"seed for {rid!r} must be a hex string")
        try:
            seeds[rid] = KeyMaterial.from_hex(text, bits)
        except ValueError as exc:
            raise ValueError(f"seed for {rid!r}: {exc}") from None
    return seeds


def dump_seeds(seeds: Mapping[str, KeyMaterial]) -> str:
    return json.dumps({rid: k.hex() for rid, k in sorted(seeds.items())}, indent=2)
