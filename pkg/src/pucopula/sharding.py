"""Seeded, shard-count-independent Monte Carlo execution.

Draws are split into fixed-size blocks. Block ``b`` always uses the stream
spawned as child ``b`` of ``SeedSequence(seed)``, so the output depends only
on ``(seed, n, block_size)`` and never on how many workers ran the blocks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

__all__ = ["BLOCK_SIZE", "THREADS_ENV", "default_workers", "run_blocks"]

BLOCK_SIZE = 1 << 16
THREADS_ENV = "PUCOPULA_THREADS"


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(int(env), 1)
    return os.cpu_count() or 1


def run_blocks(
    draw: Callable[[int, np.random.Generator], np.ndarray],
    n: int,
    seed: int,
    workers: int | None = None,
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Concatenate ``draw(count, rng)`` over seeded blocks covering ``n`` draws."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if seed is None:
        raise ValueError("an explicit seed is required")
    counts = [block_size] * (n // block_size)
    if n % block_size:
        counts.append(n % block_size)
    children = np.random.SeedSequence(int(seed)).spawn(len(counts))

    def one(b):
        return draw(counts[b], np.random.Generator(np.random.PCG64(children[b])))

    workers = default_workers() if workers is None else max(int(workers), 1)
    if workers == 1 or len(counts) <= 1:
        parts = [one(b) for b in range(len(counts))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(counts))))
    if not parts:
        return draw(0, np.random.Generator(np.random.PCG64(int(seed))))
    return np.concatenate(parts)
