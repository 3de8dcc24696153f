"""Seeded, splittable random streams.

Every chunk of replicates gets its own Philox generator keyed by
``(seed, purpose, chunk index)``. Chunk boundaries never depend on the number
of worker threads, so results are identical however the work is scheduled.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

CHUNK = 4096

# stream purposes
NULL_UNIFORMS = 1
EXPERIMENT = 2
BOOTSTRAP = 3
SUBSAMPLE = 4
SAMPLING = 5

MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def generator(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(purpose, index))
    return np.random.Generator(np.random.Philox(ss))


def map_chunks(
    fn: Callable[[int, int, int], np.ndarray],
    total: int,
    workers: int = 1,
    chunk: int = CHUNK,
) -> np.ndarray:
    """Evaluate ``fn(index, start, stop)`` over fixed chunks and concatenate."""
    bounds = [(j, s, min(s + chunk, total)) for j, s in enumerate(range(0, total, chunk))]
    if workers <= 1 or len(bounds) == 1:
        parts = [fn(*b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: fn(*b), bounds))
    return np.concatenate(parts) if parts else np.empty(0)


def sorted_uniforms(seed: int, purpose: int, index: int, rows: int, n: int) -> np.ndarray:
    u = generator(seed, purpose, index).random((rows, n))
    u.sort(axis=1)
    return u
