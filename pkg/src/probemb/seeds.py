"""Deterministic named RNG streams derived from one master seed.

Each (stream name, extra ids) pair maps to a fixed spawn key of a
SeedSequence, so data generation, initialization, shuffling and
Monte-Carlo sampling draw from independent generators that are stable
across runs and machines.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "data": 0,
    "init": 1,
    "shuffle": 2,
    "mc": 3,
    "pairs": 4,
    "corrupt": 5,
    "search": 6,
    "eval_mc": 7,
}


def stream(master_seed: int, name: str, *extra: int) -> np.random.Generator:
    key = (STREAMS[name],) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=key))
