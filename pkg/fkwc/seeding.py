"""Deterministic random streams keyed by (seed, purpose, index...)"""

import numpy as np

# Stream purposes; part of the SeedSequence entropy so streams never collide
PROJECTIONS = 1
TIE_BREAKS = 2
DATA = 3
DEPTH = 4
MONTE_CARLO = 6


def stream(seed: int, purpose: int, *index: int) -> np.random.Generator:
    """Generator for one (seed, purpose, index...) key"""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(purpose)]
    entropy.extend(int(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, purpose: int, *index: int) -> int:
    """64-bit child seed, for handing to APIs that take an integer seed"""
    return int(stream(seed, purpose, *index).integers(0, 2**63 - 1))
