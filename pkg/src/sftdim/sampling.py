"""Seeded two-sided sampling of stationary Markov paths.

Randomness comes from Philox4x32-10 (Salmon et al., Random123), a
counter-based generator evaluated inside the compiled walk. The 64-bit user
seed is the key; the counter of the k-th 128-bit block of a stream is

    (k, 0, direction, sample_index)      direction 0: symbol 0 + forward steps
                                         direction 1: backward steps

Each block yields two doubles with 53 random bits. Streams depend only on
``(seed, sample_index, direction)``: results do not depend on chunking or the
number of workers, and lengthening a path keeps its existing prefix.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, TypeVar

import numba
import numpy as np

from .markov import MarkovMeasure
from .sft import Word

CHUNK = 1000
T = TypeVar("T")

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


@numba.njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 4x32-bit counter; all arguments are uint64 < 2**32."""
    for i in range(10):
        if i > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> _SHIFT) ^ c1 ^ k0) & _MASK
        n1 = p1 & _MASK
        n2 = ((p0 >> _SHIFT) ^ c3 ^ k1) & _MASK
        n3 = p0 & _MASK
        c0, c1, c2, c3 = n0, n1, n2, n3
    return c0, c1, c2, c3


@numba.njit(cache=True, nogil=True, inline="always")
def _to_double(hi, lo):
    return ((hi >> np.uint64(5)) * 67108864.0 + (lo >> np.uint64(6))) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True, nogil=True)
def _fill_uniforms(out, k0, k1, direction, sample):
    blocks = (out.shape[0] + 1) // 2
    for k in range(blocks):
        x0, x1, x2, x3 = philox4x32(np.uint64(k), np.uint64(0), np.uint64(direction), np.uint64(sample), k0, k1)
        out[2 * k] = _to_double(x0, x1)
        if 2 * k + 1 < out.shape[0]:
            out[2 * k + 1] = _to_double(x2, x3)


@numba.njit(cache=True, nogil=True, inline="always")
def _pick(cdf, u):
    for j in range(cdf.shape[0]):
        if u < cdf[j]:
            return j
    return cdf.shape[0] - 1


@numba.njit(cache=True, nogil=True)
def _walk(cdf_v, cdf_f, cdf_b, k0, k1, start, n_back, out):
    n_fwd = out.shape[1] - n_back - 1
    uf = np.empty(n_fwd + 1)
    ub = np.empty(n_back)
    for r in range(out.shape[0]):
        _fill_uniforms(uf, k0, k1, 0, start + r)
        _fill_uniforms(ub, k0, k1, 1, start + r)
        s = _pick(cdf_v, uf[0])
        out[r, n_back] = s
        for t in range(1, n_fwd + 1):
            s = _pick(cdf_f[s], uf[t])
            out[r, n_back + t] = s
        s = out[r, n_back]
        for t in range(n_back):
            s = _pick(cdf_b[s], ub[t])
            out[r, n_back - 1 - t] = s


def uniforms(seed: int, direction: int, sample: int, size: int) -> np.ndarray:
    """The first ``size`` uniforms of one stream (exposed for testing)."""
    k0, k1 = _key(seed)
    out = np.empty(size)
    _fill_uniforms(out, k0, k1, direction, sample)
    return out


def _key(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an integer in [0, 2**64)")
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def _guarded_cdf(P: np.ndarray) -> np.ndarray:
    """Row CDFs with every entry from the last positive probability on set to 1,
    so rounding can never select a zero-probability symbol."""
    P2 = np.atleast_2d(np.asarray(P, dtype=float))
    cum = np.cumsum(P2, axis=1)
    for r in range(P2.shape[0]):
        cum[r, np.flatnonzero(P2[r] > 0)[-1] :] = 1.0
    return cum if np.ndim(P) == 2 else cum[0]


def sample_block(
    measure: MarkovMeasure, n_back: int, n_fwd: int, seed: int, start: int, count: int
) -> np.ndarray:
    """Paths for samples ``start .. start+count-1`` as an int array.

    Column ``j`` holds the symbol at index ``j - n_back``; each row covers the
    indices ``-n_back .. n_fwd``.
    """
    if n_back < 0 or n_fwd < 0:
        raise ValueError("n_back and n_fwd must be >= 0")
    if start < 0 or start + count > 2**32:
        raise ValueError("sample indices must lie in [0, 2**32)")
    k0, k1 = _key(seed)
    out = np.empty((count, n_back + n_fwd + 1), dtype=np.int64)
    _walk(
        _guarded_cdf(measure.v),
        _guarded_cdf(measure.P),
        _guarded_cdf(measure.reversed_matrix()),
        k0,
        k1,
        start,
        n_back,
        out,
    )
    return out


def sample_path(measure: MarkovMeasure, n_back: int, n_fwd: int, seed: int, index: int = 0) -> Word:
    """One stationary path on indices ``-n_back .. n_fwd``.

    Symbol 0 is drawn from ``v``, forward symbols from ``P`` and backward
    symbols from the time-reversed chain ``v_j P_ji / v_i``.
    """
    row = sample_block(measure, n_back, n_fwd, seed, index, 1)[0]
    return Word(tuple(int(x) for x in row), -n_back)


def chunks(samples: int, size: int = CHUNK) -> Iterator[tuple[int, int]]:
    for start in range(0, samples, size):
        yield start, min(size, samples - start)


def map_chunks(fn: Callable[[int, int], T], samples: int, workers: int = 1) -> list[T]:
    """Apply ``fn(start, count)`` over fixed-size chunks; results in chunk order."""
    spans = list(chunks(samples))
    if workers <= 1:
        return [fn(s, c) for s, c in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda sc: fn(*sc), spans))


@numba.njit(cache=True, nogil=True, inline="always")
def window_value(values, nsym, depth, row, pos):
    """Value of a flattened depth-``depth`` table on ``row[pos : pos + depth]``."""
    idx = 0
    for i in range(depth):
        idx = idx * nsym + row[pos + i]
    return values[idx]
