"""Seed splitting.

The master seed is split into one sub-seed per pipeline stage with
``derive_seed``. Every random draw then comes from a Philox generator keyed by
``SeedSequence(sub_seed, spawn_key=(block, channel))``. Paths are grouped
in fixed blocks of ``BLOCK`` consecutive indices, so the numbers a path sees
depend only on (seed, stage, path index), never on how many paths or threads
are used.
"""

from __future__ import annotations

import numpy as np

BLOCK = 1024

# stage tags for the master-seed split
SOLVER, BACKTEST, BASELINES = 0, 1, 2

# channel tags inside a block
NORMALS, CHANGE_TIME, LEVEL = 0, 1, 2


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master: int, stage: int) -> int:
    """64-bit sub-seed for one pipeline stage."""
    ss = np.random.SeedSequence(int(master) & (2**64 - 1), spawn_key=(int(stage),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def blocks(m_paths: int):
    """Yield (block index, first path, stop path) covering range(m_paths)."""
    for b, start in enumerate(range(0, m_paths, BLOCK)):
        yield b, start, min(start + BLOCK, m_paths)
