"""Counter-based random numbers: Philox4x32-10.

Every uniform drawn anywhere in the package is a pure function of
``(seed, stream, step, slot)``: ``stream`` identifies the sample path,
``step`` the walk step, ``slot`` the purpose lane.  Parallel estimators
therefore give identical results for any worker count or batch split,
and the compiled kernels consume bit-identical numbers to the NumPy
fallback because both evaluate the same keyed function.

The generator is the standard 10-round Philox 4x32 block cipher
(counter = (step, slot, stream_lo, stream_hi), key = 64-bit seed).
State words live in uint64 arrays masked to 32 bits, which avoids
dtype round-trips in the vectorized path.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_SHIFT11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)

DEFAULT_SEED = 0x5EED_CAFE_0000_0001


def philox4x32(c0, c1, c2, c3, k0, k1):
    """One Philox4x32-10 block: four 32-bit words per counter.

    Inputs are uint64 scalars/arrays holding 32-bit values; broadcasting
    follows NumPy rules. Returns four uint64 arrays of 32-bit words.
    """
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    k0 = np.asarray(k0, dtype=np.uint64)
    k1 = np.asarray(k1, dtype=np.uint64)
    for _ in range(10):
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ k0,
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ k1,
            p0 & _MASK32,
        )
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _words_to_doubles(w0, w1, w2, w3):
    """Two uniforms in [0,1) from four 32-bit words (53-bit mantissas)."""
    d0 = (((w0 << _SHIFT32) | w1) >> _SHIFT11).astype(np.float64) * _INV53
    d1 = (((w2 << _SHIFT32) | w3) >> _SHIFT11).astype(np.float64) * _INV53
    return d0, d1


def step_uniforms(seed: int, streams, step: int, slot: int = 0):
    """Vector of uniform pairs for walk step ``step`` across ``streams``.

    ``streams`` is an integer array of 64-bit sample indices. Returns two
    float64 arrays (lane 0 drives the transition draw, lane 1 an optional
    second draw, e.g. the additive innovation of an affine recursion).
    """
    seed &= (1 << 64) - 1
    streams = np.asarray(streams, dtype=np.uint64)
    w = philox4x32(
        np.uint64(step),
        np.uint64(slot),
        streams & _MASK32,
        streams >> _SHIFT32,
        np.uint64(seed & 0xFFFFFFFF),
        np.uint64(seed >> 32),
    )
    return _words_to_doubles(*w)


def _pair_scalar(seed: int, stream: int, step: int, slot: int) -> tuple[float, float]:
    """Scalar twin of step_uniforms on pure Python ints (same bits)."""
    mask = 0xFFFFFFFF
    c = [step & mask, slot & mask, stream & mask, (stream >> 32) & mask]
    k0, k1 = seed & mask, (seed >> 32) & mask
    for _ in range(10):
        p0 = c[0] * 0xD2511F53
        p1 = c[2] * 0xCD9E8D57
        c = [
            (p1 >> 32) ^ c[1] ^ k0,
            p1 & mask,
            (p0 >> 32) ^ c[3] ^ k1,
            p0 & mask,
        ]
        k0 = (k0 + 0x9E3779B9) & mask
        k1 = (k1 + 0xBB67AE85) & mask
    d0 = (((c[0] << 32) | c[1]) >> 11) * _INV53
    d1 = (((c[2] << 32) | c[3]) >> 11) * _INV53
    return d0, d1


class SeededGenerator:
    """Reproducible per-path uniform source.

    ``step_pair(k)`` returns the canonical draws for walk step ``k`` —
    the same numbers the batch kernels consume for this (seed, stream),
    so a single simulated path reproduces sample ``stream`` of a batch
    estimator exactly. ``uniform()`` is a sequential convenience stream
    on a separate slot, for ad-hoc sampling.
    """

    def __init__(self, seed: int = DEFAULT_SEED, stream: int = 0):
        self.seed = int(seed) & ((1 << 64) - 1)
        self.stream = int(stream)
        self._n = 0

    def step_pair(self, step: int) -> tuple[float, float]:
        return _pair_scalar(self.seed, self.stream, step, 0)

    def uniform(self) -> float:
        pair = _pair_scalar(self.seed, self.stream, self._n >> 1, 1)
        u = pair[self._n & 1]
        self._n += 1
        return u

    def __repr__(self) -> str:
        return f"SeededGenerator(seed={self.seed:#x}, stream={self.stream})"
