"""Counter-based random streams.

Every random object is addressed by ``(seed, tag, index)``: ``tag`` names the
kind of object (symmetric matrix, column vector, ...), ``index`` is the trial
number. The stream is a Philox generator keyed by those words, and a value at
position ``p`` of the stream is a pure function of ``(seed, tag, index, p)``.
Matrix entry ``(i, j)`` is read from a fixed position, so minors and
parallel batches are reproducible.
"""
from concurrent.futures import ThreadPoolExecutor
import zlib

import numpy as np

MASK64 = (1 << 64) - 1

# stream tags, one per kind of random object
TAG_SYM = 1
TAG_COL = 2
TAG_SUBSET = 3
TAG_TILDE = 4
TAG_ZEROED = 5
TAG_IID = 6
TAG_MISC = 7

DEFAULT_CHUNK = 256


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix(*words):
    """Hash a sequence of integers (or strings) to one 64-bit word."""
    h = 0x6A09E667F3BCC909
    for w in words:
        if isinstance(w, str):
            w = zlib.crc32(w.encode())
        h = splitmix64(h ^ (int(w) & MASK64))
    return h


def stream(seed, tag, index=0):
    return np.random.Philox(key=[mix(seed, tag), int(index) & MASK64])


def raw(seed, tag, index, m):
    """First ``m`` 64-bit words of the stream ``(seed, tag, index)``."""
    return stream(seed, tag, index).random_raw(int(m))


def to_uniform(words):
    """Map 64-bit words to doubles strictly inside (0, 1).

    Uses the top 53 bits, so the top bit of a word decides ``u < 1/2``.
    """
    words = np.asarray(words, dtype=np.uint64)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def uniforms(seed, tag, index, m):
    return to_uniform(raw(seed, tag, index, m))


def uniform_batch(seed, tag, indices, m):
    """Uniforms for many trials, shape ``(len(indices), m)``."""
    out = np.empty((len(indices), int(m)), dtype=np.float64)
    for r, idx in enumerate(indices):
        out[r] = uniforms(seed, tag, idx, m)
    return out


def map_trials(fn, trials, threads=1, chunk=DEFAULT_CHUNK):
    """Apply ``fn`` to fixed-size chunks of trial indices and concatenate.

    Chunk boundaries do not depend on ``threads``, so the result is identical
    for every thread count.
    """
    if threads is not None and threads < 1:
        raise ValueError("threads must be at least 1")
    idx = np.arange(int(trials))
    chunks = [idx[s:s + chunk] for s in range(0, len(idx), chunk)]
    if not chunks:
        return fn(idx)
    if threads is None or threads <= 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=0)
