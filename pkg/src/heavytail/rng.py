"""Seed handling and splittable random streams.

Seeds are plain integers or :class:`numpy.random.SeedSequence` objects.
Sub-streams are derived by extending the spawn key rather than calling
``SeedSequence.spawn``, so deriving a child never mutates the parent and
the same (seed, key path) always maps to the same stream.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_DEFAULT_ENTROPY = 20240601


def as_seedseq(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        return np.random.SeedSequence(_DEFAULT_ENTROPY)
    if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        return np.random.SeedSequence(int(seed))
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


def child(seed, *keys):
    """Deterministic sub-stream of ``seed`` addressed by integer ``keys``."""
    ss = as_seedseq(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in keys))


def generator(seed):
    return np.random.Generator(np.random.PCG64(as_seedseq(seed)))


def partition(count, streams):
    """Split ``count`` into ``streams`` contiguous chunk sizes (larger chunks first)."""
    base, extra = divmod(count, streams)
    return [base + (1 if i < extra else 0) for i in range(streams)]


def run_streams(fn, seed, sizes, n_jobs=1):
    """Call ``fn(generator, size)`` for each chunk on its own sub-stream.

    Results are returned in stream order, so the concatenated output does not
    depend on ``n_jobs``.
    """
    tasks = [(generator(child(seed, i)), size) for i, size in enumerate(sizes)]
    if n_jobs == 1 or len(tasks) == 1:
        return [fn(g, s) for g, s in tasks]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda t: fn(*t), tasks))
