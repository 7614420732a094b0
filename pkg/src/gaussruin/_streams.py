"""Counter-based random substreams and an order-preserving batch runner."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def batch_generator(seed, index):
    """Generator for batch ``index`` derived from the master ``seed``.

    Batch streams depend only on ``(seed, index)``, so the split of batches
    across workers never changes the numbers drawn.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def batch_sizes(n, batch_size):
    if n < 1:
        raise ValueError("number of replications must be at least 1")
    full, rest = divmod(int(n), int(batch_size))
    return [int(batch_size)] * full + ([rest] if rest else [])


def run_batches(func, n, batch_size, seed, workers=1):
    """Call ``func(rng, size)`` for every batch and return results in batch order."""
    sizes = batch_sizes(n, batch_size)
    jobs = [(batch_generator(seed, i), size) for i, size in enumerate(sizes)]
    if workers is None or workers <= 1:
        return [func(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(lambda job: func(*job), jobs))
