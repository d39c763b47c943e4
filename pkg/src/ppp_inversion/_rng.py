"""Seed handling shared by every sampler in the package.

All randomness flows through ``numpy.random.Generator`` objects built from
``SeedSequence`` trees, so a run is fully determined by its integer seeds and
parallel workers receive independent, order-stable substreams.
"""
import os

import numpy as np


def as_generator(seed):
    """Return a Generator for an int, SeedSequence, Generator or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.default_rng(seed)


def spawn(seed, n):
    """Split ``seed`` into ``n`` independent child generators.

    The split is counter based (``SeedSequence.spawn``), so child ``i`` is the
    same no matter how many workers consume the children or in what order.
    """
    if isinstance(seed, np.random.Generator):
        ss = seed.bit_generator.seed_seq.spawn(1)[0]
    elif isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(child)) for child in ss.spawn(n)]


def thread_count():
    """Worker cap from ``PPP_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("PPP_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
