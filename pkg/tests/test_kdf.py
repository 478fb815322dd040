import hashlib
import itertools
import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keylink.access import AccessStructure
from keylink.kdf import (
    HMAC_SHA256,
    KeyMaterial,
    LabelError,
    derive_chain,
    derive_key,
    dump_seeds,
    encode_label,
    parse_seeds,
    random_seeds,
    resource_key,
    resource_keys,
)
from keylink.linker import LinkForest, derivation_closure, greedy_link

from instances import complete_structure

# RFC 4231, HMAC-SHA-256 column; case 5 is truncated to 128 bits
RFC4231 = [
    (b"\x0b" * 20, b"Hi There",
     "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"),
    (b"Jefe", b"what do ya want for nothing?",
     "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"),
    (b"\xaa" * 20, b"\xdd" * 50,
     "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe"),
    (bytes(range(1, 26)), b"\xcd" * 50,
     "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b"),
    (b"\x0c" * 20, b"Test With Truncation", "a3b6167473100ee06e0c796c2955552b"),
    (b"\xaa" * 131, b"Test Using Larger Than Block-Size Key - Hash Key First",
     "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54"),
    (b"\xaa" * 131,
     b"This is a test using a larger than block-size key and a larger than block-size data."
     b" The key needs to be hashed before being used by the HMAC algorithm.",
     "9b09ffa71b942fcb27635fbcd5b0e944bfdc63644f0713938a7f51535c3a35e2"),
]

# computed with a hand-written ipad/opad HMAC over hashlib.sha256
ZERO_KEY_A_B = "8d06ec4f68f2985fdb8437b6b5c6514ea94021171b181b605692885185e9aedc"
ZERO_KEY_R1_R2 = "acaba6a992ad8e0454bd22e90e417ba7e9eccb055e50814e5ebb864134276550"
ZERO_KEY_R1_R2_R3 = "19c7c1d6dcf0f61671501d5a90118df137a1bfb888825ae05c96cc473939cc74"


def manual_hmac_sha256(key: bytes, msg: bytes) -> bytes:
    if len(key) > 64:
        key = hashlib.sha256(key).digest()
    key = key.ljust(64, b"\0")
    inner = hashlib.sha256(bytes(b ^ 0x36 for b in key) + msg).digest()
    return hashlib.sha256(bytes(b ^ 0x5C for b in key) + inner).digest()


@pytest.mark.parametrize("key,data,digest", RFC4231)
def test_rfc4231(key, data, digest):
    assert HMAC_SHA256(key, data).hex()[: len(digest)] == digest
    assert manual_hmac_sha256(key, data).hex()[: len(digest)] == digest


def test_encode_label():
    assert encode_label("a", "b") == bytes.fromhex("00000001 61 00000001 62")
    assert encode_label("r1", "r2") != encode_label("r", "1r2")
    with pytest.raises(LabelError):
        encode_label("r1", "r1")


def test_encode_label_injective_short_ids():
    alphabet = ["", "a", "b", "ab", "ba", "aa", "b\x00", "\x00"]
    seen = {}
    for pair in itertools.product(alphabet, repeat=2):
        if pair[0] == pair[1]:
            continue
        enc = encode_label(*pair)
        assert seen.setdefault(enc, pair) == pair


@given(st.text(min_size=1), st.text(min_size=1), st.text(min_size=1), st.text(min_size=1))
@settings(max_examples=500)
def test_encode_label_injective(a, b, c, d):
    if a == b or c == d:
        return
    if (a, b) != (c, d):
        assert encode_label(a, b) != encode_label(c, d)


def test_derive_key_vector():
    k = KeyMaterial(bytes(32))
    assert derive_key(k, "a", "b").hex() == ZERO_KEY_A_B
    assert derive_key(k, "a", "b") == derive_key(k, "a", "b")


def test_bit_flip_changes_output():
    rng = random.Random(11)
    for _ in range(200):
        raw = bytearray(rng.randbytes(32))
        before = derive_key(KeyMaterial(raw), "r1", "r2")
        bit = rng.randrange(256)
        raw[bit // 8] ^= 1 << (bit % 8)
        assert derive_key(KeyMaterial(raw), "r1", "r2") != before


def test_chain_definitions():
    k = KeyMaterial(bytes(32))
    assert derive_chain(k, ["r1", "r2"]) == derive_key(k, "r1", "r2")
    assert derive_chain(k, ["r1", "r2"]).hex() == ZERO_KEY_R1_R2
    three = derive_chain(k, ["r1", "r2", "r3"])
    assert three == derive_key(derive_key(k, "r1", "r2"), "r2", "r3")
    assert three.hex() == ZERO_KEY_R1_R2_R3
    with pytest.raises(LabelError):
        derive_chain(k, ["r1"])
    with pytest.raises(LabelError):
        derive_chain(k, ["r1", "r2", "r2"])


def test_long_chain():
    k = KeyMaterial(bytes(range(32)))
    path = [f"r{i}" for i in range(1001)]
    a = derive_chain(k, path)
    assert a == derive_chain(k, path)
    assert len(a) == 32


def test_key_material_contract():
    k = KeyMaterial(bytes(32))
    assert k.bits == 256 and len(k) == 32
    assert "00" not in repr(k)
    with pytest.raises(ValueError):
        KeyMaterial(bytes(31))
    with pytest.raises(ValueError):
        KeyMaterial(bytes(2), bits=12)
    assert KeyMaterial.from_hex("ab" * 16, 128).hex() == "ab" * 16
    assert derive_key(KeyMaterial(bytes(16), 128), "a", "b").hex() == ZERO_KEY_A_B[:32]


def test_recording_prf_is_pluggable():
    calls = []

    def recorder(key, data):
        calls.append(data)
        return HMAC_SHA256(key, data)

    derive_chain(KeyMaterial(bytes(32)), ["x", "y", "z"], recorder)
    assert calls == [encode_label("x", "y"), encode_label("y", "z")]


def test_resource_key_unfolding():
    s = AccessStructure.build(["u1", "u2", "u3"], {"r1": ["u1"], "r2": ["u1", "u2"], "r3": ["u1", "u3"]})
    f = LinkForest({"r2": "r1", "r3": "r1"})
    seeds = {"r1": KeyMaterial(bytes(32))}
    assert resource_key(s, f, seeds, "r1") == seeds["r1"]
    assert resource_key(s, f, seeds, "r2").hex() == ZERO_KEY_R1_R2
    assert resource_key(s, f, seeds, "r2") != resource_key(s, f, seeds, "r3")
    with pytest.raises(KeyError):
        resource_key(s, f, {}, "r2")
    with pytest.raises(KeyError):
        resource_key(s, f, seeds, "nope")


def test_siblings_distinct_over_random_seeds():
    f = LinkForest({"c1": "p", "c2": "p", "c3": "p"})
    for _ in range(200):
        seeds = random_seeds(["p"])
        keys = {resource_key(None, f, seeds, c).hex() for c in ("c1", "c2", "c3")}
        assert len(keys) == 3


def test_holder_recomputes_descendants():
    s = complete_structure(4)
    f = greedy_link(s)
    seeds = random_seeds(f.roots(s))
    keys = resource_keys(s, f, seeds)
    children = f.children()
    for r in s.resource_ids:
        derived = {r: keys[r]}
        stack = [r]
        while stack:
            cur = stack.pop()
            for child in children.get(cur, ()):
                derived[child] = derive_key(derived[cur], cur, child)
                stack.append(child)
        assert set(derived) == derivation_closure(f, {r})
        for rid, key in derived.items():
            assert key == keys[rid] == resource_key(s, f, seeds, rid)


def test_seed_file_round_trip():
    seeds = random_seeds(["r1", "r2"])
    assert parse_seeds(dump_seeds(seeds)) == seeds
    with pytest.raises(ValueError):
        parse_seeds('{"r1": "zz"}')
    with pytest.raises(ValueError):
        parse_seeds('{"r1": "abcd"}')


def test_output_bit_frequencies():
    # smoke test only: 10^4 derived keys, every bit position near one half
    counts = [0] * 256
    k = KeyMaterial(bytes(32))
    labels = string.ascii_lowercase
    n = 10_000
    for i in range(n):
        out = int.from_bytes(bytes(derive_key(k, f"src{i}", labels[i % 26])), "big")
        for b in range(256):
            counts[b] += out >> b & 1
    assert all(0.45 <= c / n <= 0.55 for c in counts)
