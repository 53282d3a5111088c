"""Deterministic derivation of independent random substreams.

Stochastic routines accept either an integer seed or a ``SeedSequence`` and
derive named substreams from it by key.  Derivation is purely functional
(never via the stateful ``spawn``), so identical ``(seed, key)`` pairs yield
identical draws regardless of call order or worker count.  Samplers share the
``INIT_STREAM`` / ``STEP_STREAM`` labels, which is what makes trajectory
comparisons between schemes consuming noise in the same order meaningful.
"""

from __future__ import annotations

import numpy as np

# Stream labels shared by every sampling scheme.
INIT_STREAM = 0
STEP_STREAM = 1

SeedLike = "int | np.random.SeedSequence"


def seed_sequence(seed, *key: int) -> np.random.SeedSequence:
    """Build the SeedSequence for substream ``key`` of ``seed`` without mutating it."""
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
        base = tuple(seed.spawn_key)
    else:
        entropy = int(seed)
        base = ()
    return np.random.SeedSequence(entropy=entropy, spawn_key=base + tuple(int(k) for k in key))


def substream(seed, *key: int) -> np.random.Generator:
    """Generator for the ``key`` substream of ``seed``."""
    return np.random.default_rng(seed_sequence(seed, *key))


def as_generator(seed_or_rng) -> np.random.Generator:
    """Accept a Generator, SeedSequence, or integer seed; return a Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def derive_seed(seed, *key: int) -> int:
    """Stable integer seed for substream ``key``, for APIs that take plain seeds."""
    return int(seed_sequence(seed, *key).generate_state(1, dtype=np.uint64)[0])
