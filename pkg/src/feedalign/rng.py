"""Deterministic random streams.

All randomness in the package flows through PCG64 generators built here.
Each consumer (weight init, feedback matrices, shuffling, synthetic data)
names its own stream with a text label, so adding or reordering one
consumer never perturbs another's draws. Same (seed, label) always yields
the same byte-identical stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, label: str) -> np.random.Generator:
    """PCG64 generator for one named consumer of ``seed``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    tag = int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tag])))
