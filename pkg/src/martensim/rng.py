"""Counter-based random numbers keyed by (seed, step, component id, stream).

Each call evaluates Philox4x64-10 on explicit counters, so a draw depends
only on its key and never on how many draws happened before it. That is
what makes Model A reproducible under any iteration order or thread count.
"""

import numpy as np

from . import kernels

# stream tags (third counter word)
STREAM_PLACE = 0
STREAM_MODEL_B = 1
STREAM_RESAMPLE = 2
STREAM_MC = 3

_MASK64 = (1 << 64) - 1


def seed_key(seed):
    """Two 64-bit key words from an arbitrary Python int seed."""
    seed = int(seed)
    return seed & _MASK64, (seed >> 64) & _MASK64


def words(seed, c0, c1, stream, c3=0):
    """Raw Philox output, shape (n, 4) uint64, for counters (c0, c1, stream, c3)."""
    k0, k1 = seed_key(seed)
    c0 = np.atleast_1d(np.asarray(c0, dtype=np.uint64))
    c1 = np.broadcast_to(np.asarray(c1, dtype=np.uint64), c0.shape)
    c2 = np.broadcast_to(np.asarray(stream, dtype=np.uint64), c0.shape)
    c3 = np.broadcast_to(np.asarray(c3, dtype=np.uint64), c0.shape)
    return kernels.philox(c0, c1, c2, c3, k0, k1)


def uniforms(seed, c0, c1, stream, c3=0):
    """Four doubles in (0, 1) per counter, shape (n, 4)."""
    return kernels.to_unit(words(seed, c0, c1, stream, c3))


def uniform_block(seed, stream, start, n, c1=0):
    """``n`` doubles in (0, 1) from consecutive counters, used by Monte Carlo."""
    nblk = (n + 3) // 4
    idx = np.arange(start, start + nblk, dtype=np.uint64)
    return uniforms(seed, idx, c1, stream).ravel()[:n]
