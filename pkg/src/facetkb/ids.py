"""Slugs and the stable hash used for minted entity identifiers.

Entity ids are public, so the hash is fixed: 64-bit FNV-1a over UTF-8 bytes.
Do not change it without a migration for existing snapshots.
"""

from __future__ import annotations

import re

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def slugify(text: str) -> str:
    """Lowercase; every run of characters outside ``[a-z0-9]`` becomes one hyphen."""
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
