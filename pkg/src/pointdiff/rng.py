"""Reproducible block-structured random streams.

Work is partitioned into fixed-size blocks of paths; block k always draws
from the counter-based stream seeded by SeedSequence(seed, spawn_key=(k,)),
so results are a pure function of (seed, n) and independent of how many
workers process the blocks or in which order they finish.
"""

from __future__ import annotations

import numpy as np

BLOCK = 4096


def block_rng(seed: int, block_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(block_index,))
    return np.random.Generator(np.random.Philox(ss))


def block_ranges(n: int, block: int = BLOCK):
    """Yield (block_index, start, stop) covering range(n)."""
    k, start = 0, 0
    while start < n:
        stop = min(start + block, n)
        yield k, start, stop
        k += 1
        start = stop


def run_blocks(seed: int, n: int, fn, workers: int = 1, block: int = BLOCK):
    """Concatenate ``fn(count, rng)`` over all blocks, in block order.

    ``fn`` must depend only on its arguments; ``workers`` then changes wall
    time but never the result.
    """
    jobs = list(block_ranges(n, block))
    if workers <= 1 or len(jobs) == 1:
        parts = [fn(stop - start, block_rng(seed, k))
                 for k, start, stop in jobs]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(fn, stop - start, block_rng(seed, k))
                    for k, start, stop in jobs]
            parts = [f.result() for f in futs]
    return np.concatenate(parts, axis=0)
