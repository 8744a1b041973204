"""Deterministic seed derivation.

A single root seed fans out to per-stage and per-record seeds through a
stable hash, so parallel execution order can never change outputs.
"""

from __future__ import annotations

import hashlib


def derive_seed(root: int, *labels: object) -> int:
    """Derive a 64-bit child seed from a root seed and a label path."""
    material = ":".join([str(int(root)), *(str(x) for x in labels)])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
