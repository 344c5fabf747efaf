"""Seed derivation and deterministic parallel mapping.

Every stochastic stage derives its generator from the master seed and a
fixed integer path (stream tag plus index) instead of drawing from one
shared stream, so results never depend on execution order.  The map helper
always reduces in input order, making output independent of worker count.
"""

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

# stream tags: one namespace component per stochastic stage
STREAM_PERMUTE = 1
STREAM_TRIAL = 2
STREAM_ORACLE = 3
STREAM_FOREST = 4
STREAM_FOLDS = 5
STREAM_NOISE = 6
STREAM_MISSING = 7


def as_seedseq(seed) -> np.random.SeedSequence:
    """Normalize an int seed or SeedSequence into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def derive(seed, *path: int) -> np.random.SeedSequence:
    """Child SeedSequence at an integer path below ``seed``.

    ``derive(s, a, b)`` is a pure function of (s, a, b); distinct paths
    give statistically independent streams.
    """
    ss = as_seedseq(seed)
    return np.random.SeedSequence(entropy=ss.entropy,
                                  spawn_key=ss.spawn_key + tuple(path))


def rng_at(seed, *path: int) -> np.random.Generator:
    """Generator seeded at ``derive(seed, *path)``."""
    return np.random.default_rng(derive(seed, *path))


def resolve_threads(threads=None) -> int:
    """Worker count: explicit value, else VIMP_THREADS, else 1."""
    if threads is not None:
        n = int(threads)
    else:
        env = os.environ.get("VIMP_THREADS")
        n = int(env) if env else 1
    if n < 1:
        raise ValueError("thread count must be at least 1")
    return n


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map ``fn`` over ``items``, results always in input order.

    ``threads`` <= 1 runs serially; otherwise a process pool is used.  The
    output is identical either way provided ``fn`` is deterministic in its
    argument.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))
