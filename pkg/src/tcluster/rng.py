"""Named random substreams derived from a single 64-bit seed.

Every stochastic stage pulls its own substream so that, for example, changing
the solver's iteration budget never perturbs dataset generation.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _name_key(name: str) -> int:
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for the substream ``name`` of the master ``seed``."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, _name_key(name)])
    return np.random.default_rng(ss)


def subseed(seed: int, name: str) -> int:
    """A 63-bit integer seed for the substream, for APIs that take raw seeds."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, _name_key(name)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
