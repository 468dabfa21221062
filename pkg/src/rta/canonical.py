"""Deterministic JSON canonicalization and content hashing.

Canonical form: UTF-8 JSON, object keys sorted lexicographically by
Unicode codepoint at every nesting level, no insignificant whitespace,
floats rendered in Python's shortest round-trip form, NaN/Infinity
rejected. Identical value trees always produce identical bytes, which is
what the decision hash and the audit chain rely on.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

GENESIS_HASH = "0" * 64  # 32 zero bytes, hex-encoded


def _reject_non_finite(value: Any, where: str = "$") -> None:
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"non-finite number at {where}")
    if isinstance(value, dict):
        for k, v in value.items():
            _reject_non_finite(v, f"{where}.{k}")
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _reject_non_finite(v, f"{where}[{i}]")


def canonical_dumps(value: Any) -> str:
    """Canonical JSON text for a JSON-compatible value tree."""
    _reject_non_finite(value)
    return json.dumps(
        value,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def canonical_bytes(value: Any) -> bytes:
    """Canonical JSON as UTF-8 bytes."""
    return canonical_dumps(value).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    """Lowercase hex SHA-256 digest."""
    return hashlib.sha256(data).hexdigest()


def canonical_hash(value: Any) -> str:
    """SHA-256 hex digest of the canonical JSON bytes."""
    return sha256_hex(canonical_bytes(value))
