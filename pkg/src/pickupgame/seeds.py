"""Deterministic seed derivation for all stochastic stages.

Every random stream in the package is derived from a single master seed
plus a label path (strings and ints), so results never depend on how work
is scheduled or batched. Derivation uses SHA-256 over a canonical encoding
of the path, which is stable across platforms and Python versions.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_seed(master: int, *path: str | int) -> int:
    """Derive a 128-bit child seed from ``master`` and a label path."""
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for part in path:
        h.update(_SEP)
        if isinstance(part, bool):
            raise TypeError("bool is not a valid seed path component")
        if isinstance(part, int):
            h.update(b"i" + str(part).encode())
        elif isinstance(part, str):
            h.update(b"s" + part.encode())
        else:
            raise TypeError(f"unsupported seed path component: {part!r}")
    return int.from_bytes(h.digest()[:16], "big")


def derive_rng(master: int, *path: str | int) -> np.random.Generator:
    """A fresh, independent ``numpy`` generator for the given label path."""
    return np.random.default_rng(derive_seed(master, *path))
