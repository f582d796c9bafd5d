"""Seeded random substreams.

Every random quantity is drawn from a generator whose seed sequence is
``SeedSequence(master, spawn_key=(purpose, *ids))``.  Results therefore do
not depend on the order in which trials, nodes or walks are processed.
"""
from __future__ import annotations

import numpy as np

# purpose tags (first element of the spawn key)
PLACEMENT = 0
WALK = 1
AUX = 2
TABLE = 3
FILTER = 4
GRAPH = 5
TABLE_SEED = 6


def substream(master: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master, spawn_key=key)))


def derive_seed(master: int, *key: int) -> int:
    """A 64-bit integer seed derived from ``master`` and ``key``."""
    state = np.random.SeedSequence(master, spawn_key=key).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def trial_streams(master: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(walk, aux) generators for one search trial.

    Walk stepping and filter/selection draws use separate streams, so a
    partial-walk search and a baseline random-walk search with the same
    master seed follow the same underlying total walk.
    """
    return substream(master, WALK, trial), substream(master, AUX, trial)
