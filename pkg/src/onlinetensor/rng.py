"""Named, independent random streams.

Every stochastic component draws from its own stream, keyed by a base seed
and a name, so toggling one component never shifts another's draws.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")


def stream(seed: int, name: str) -> np.random.Generator:
    """Philox generator for ``(seed, name)``; same inputs give the same draws."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), _name_key(name)])))


def derived_seed(seed: int, name: str) -> int:
    """A 32-bit integer seed for libraries that take plain ints."""
    return int(stream(seed, name).integers(0, 2**32 - 1))
