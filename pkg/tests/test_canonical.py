"""Canonical JSON serialization and hashing."""

import hashlib
import shutil
import subprocess

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import canonical_json
from rta.canonical import (
    GENESIS_HASH,
    canonical_bytes,
    canonical_dumps,
    canonical_hash,
    sha256_hex,
)


def test_keys_sorted_at_every_level():
    value = {"b": 1, "a": {"z": 0, "m": {"q": 1, "a": 2}}, "c": [{"y": 1, "x": 2}]}
    assert canonical_dumps(value) == '{"a":{"m":{"a":2,"q":1},"z":0},"b":1,"c":[{"x":2,"y":1}]}'


def test_no_whitespace():
    text = canonical_dumps({"a": [1, 2, {"b": "c"}], "d": None})
    assert " " not in text
    assert "\n" not in text


def test_float_repr_shortest_roundtrip():
    assert canonical_dumps(0.1) == "0.1"
    assert canonical_dumps(1.0) == "1.0"
    assert canonical_dumps(0.30000000000000004) == "0.30000000000000004"
    assert canonical_dumps(1e-7) == "1e-07"
    assert canonical_dumps(-0.0) == "-0.0"


def test_ints_stay_ints():
    assert canonical_dumps({"n": 5}) == '{"n":5}'
    assert canonical_dumps(10**30) == str(10**30)


def test_booleans_and_null():
    assert canonical_dumps([True, False, None]) == "[true,false,null]"


def test_utf8_not_escaped():
    text = canonical_dumps({"name": "café ◼"})
    assert "café ◼" in text
    assert "\\u" not in text


def test_nan_rejected():
    with pytest.raises(ValueError):
        canonical_dumps({"x": float("nan")})


def test_infinity_rejected():
    with pytest.raises(ValueError):
        canonical_dumps([1.0, float("inf")])
    with pytest.raises(ValueError):
        canonical_dumps({"a": {"b": [float("-inf")]}})


def test_nested_nan_reported_with_location():
    with pytest.raises(ValueError, match="deep"):
        canonical_dumps({"deep": {"deep": float("nan")}})


def test_equal_trees_equal_bytes():
    a = {"context": {"b": 1, "a": 2}, "scope": "s"}
    b = {"scope": "s", "context": {"a": 2, "b": 1}}
    assert canonical_bytes(a) == canonical_bytes(b)
    assert canonical_hash(a) == canonical_hash(b)


def test_sha256_hex_known_vector():
    # sha256("") is a published constant.
    assert (
        sha256_hex(b"")
        == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    )
    assert sha256_hex(b"abc") == hashlib.sha256(b"abc").hexdigest()


def test_genesis_hash_shape():
    assert GENESIS_HASH == "0" * 64
    assert len(GENESIS_HASH) == 64
    int(GENESIS_HASH, 16)  # valid hex


@pytest.mark.skipif(shutil.which("sha256sum") is None, reason="sha256sum not on PATH")
def test_hash_matches_system_sha256sum(tmp_path):
    payload = canonical_bytes({"k": [1, 2.5, "x", None, True], "m": {"a": "b"}})
    target = tmp_path / "payload.json"
    target.write_bytes(payload)
    out = subprocess.run(
        ["sha256sum", str(target)], capture_output=True, text=True, check=True
    )
    assert out.stdout.split()[0] == sha256_hex(payload)


# A value-tree strategy: JSON-compatible, finite numbers only.
_scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-(10**12), max_value=10**12),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=20),
)
_trees = st.recursive(
    _scalars,
    lambda children: st.one_of(
        st.lists(children, max_size=4),
        st.dictionaries(st.text(max_size=8), children, max_size=4),
    ),
    max_leaves=25,
)


@given(_trees)
def test_matches_independent_serializer(tree):
    assert canonical_dumps(tree) == canonical_json(tree)


@given(_trees)
def test_roundtrips_through_json(tree):
    import json

    assert json.loads(canonical_dumps(tree)) == tree
