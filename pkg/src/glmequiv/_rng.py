"""Seed handling shared by every Monte-Carlo routine.

A run is identified by one master seed. Replication ``r`` always draws from the
``r``-th child of ``SeedSequence(master)``, so results do not depend on how the
replications are scheduled or batched.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise ConfigError("an explicit seed is required for reproducible runs")
    if isinstance(seed, (list, tuple)):
        return np.random.SeedSequence([int(s) for s in seed])
    return np.random.SeedSequence(int(seed))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed_sequence(seed))


def child_seeds(seed, k: int) -> list[np.random.SeedSequence]:
    """The first ``k`` children of the master seed (stable across calls)."""
    ss = seed_sequence(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,)) for i in range(k)]


def substreams(seed, k: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in child_seeds(seed, k)]


def derive(seed, *keys: int) -> np.random.SeedSequence:
    """A named sub-seed, e.g. ``derive(master, n, 3)`` for task 3 at size n."""
    ss = seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + tuple(int(k) for k in keys))
