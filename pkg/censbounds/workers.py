# vim: sw=4 ts=4 et si:
#
"""Parallel-map capability handed to the numerical modules."""

import hashlib
import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np

log = logging.getLogger(__name__)


def default_threads():
    env = os.getenv('CENSBOUNDS_THREADS')
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning('ignoring bad CENSBOUNDS_THREADS value %r', env)
    return 1


def parallel_map(func, items, threads=1):
    """Order-preserving map; runs inline when threads <= 1."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))


def float_key(value):
    """Stable 63-bit key for a float, for seeding substreams."""
    digest = hashlib.blake2b(struct.pack('<d', float(value)), digest_size=8).digest()
    return int.from_bytes(digest, 'little') >> 1


def substream(*keys):
    """A Generator keyed by nonnegative integers, independent of scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))
