"""Deterministic sub-stream derivation from one 64-bit master seed.

Every source of randomness in a run (data generation, initial point,
verification sampling, ...) pulls its own generator via a fixed string
label so that adding draws to one component never perturbs another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def rng_for(master_seed: int, label: str) -> np.random.Generator:
    """Return a Generator seeded by (master_seed, label), stable across runs."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    label_key = int.from_bytes(digest[:8], "big")
    seq = np.random.SeedSequence([int(master_seed) % 2**64, label_key])
    return np.random.default_rng(seq)
