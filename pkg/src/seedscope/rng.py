"""Portable counter-based pseudorandom numbers.

All toolkit randomness flows through a SplitMix64 stream (Steele, Lea &
Flood's SplittableRandom finalizer): draw ``k`` of the stream for ``seed``
is the pure function

    raw(seed, k) = mix64(mix64(seed) + (k + 1) * PHI)   (mod 2**64)

where ``PHI = 0x9E3779B97F4A7C15`` and ``mix64`` is the standard
xor-shift/multiply finalizer. Uniforms take the top 53 bits, normals are
produced from uniform pairs via Box-Muller. Draw ``k`` therefore never
depends on platform, history, or global state, which makes streams
swappable and replayable at any offset.
"""

from __future__ import annotations

import numpy as np

_PHI = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)

_MASK64 = 0xFFFFFFFFFFFFFFFF
_TWO_NEG53 = 2.0 ** -53


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _MIX_A
    z ^= z >> np.uint64(27)
    z *= _MIX_B
    z ^= z >> np.uint64(31)
    return z


def _stream_base(seed: int) -> np.uint64:
    s = np.array([seed & _MASK64], dtype=np.uint64)
    return _mix64(s)[0]


def raw_draws(seed: int, start: int, count: int) -> np.ndarray:
    """Raw 64-bit outputs for draws start..start+count-1 of the stream."""
    if count < 0 or start < 0:
        raise ValueError("start and count must be non-negative")
    k = np.arange(start, start + count, dtype=np.uint64)
    return _mix64(_stream_base(seed) + (k + np.uint64(1)) * _PHI)


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform draws in (0, 1], 53-bit resolution."""
    bits = raw_draws(seed, start, count) >> np.uint64(11)
    return (bits.astype(np.float64) + 1.0) * _TWO_NEG53


def normals(seed: int, start: int, count: int) -> np.ndarray:
    """Standard-normal draws via Box-Muller on consecutive uniform pairs.

    Draw ``2p`` is ``r*cos(theta)`` and draw ``2p+1`` is ``r*sin(theta)``
    with ``r = sqrt(-2 ln u_{2p})`` and ``theta = 2 pi u_{2p+1}``, so each
    draw index maps to a fixed pair of uniform indices regardless of how
    the sequence is chunked.
    """
    if count == 0:
        return np.zeros(0)
    k = np.arange(start, start + count, dtype=np.int64)
    pair = k >> 1
    u_lo = _pair_uniform(seed, 2 * pair)
    u_hi = _pair_uniform(seed, 2 * pair + 1)
    r = np.sqrt(-2.0 * np.log(u_lo))
    theta = (2.0 * np.pi) * u_hi
    return np.where(k % 2 == 0, r * np.cos(theta), r * np.sin(theta))


def _pair_uniform(seed: int, indices: np.ndarray) -> np.ndarray:
    bits = _mix64(_stream_base(seed) + (indices.astype(np.uint64) + np.uint64(1)) * _PHI)
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_NEG53


def derive_seed(seed: int, index: int) -> int:
    """Independent sub-stream seed (e.g. for pipeline stages)."""
    base = np.array([(seed & _MASK64)], dtype=np.uint64)
    salt = np.array([((index + 1) & _MASK64)], dtype=np.uint64) * _PHI
    return int(_mix64(_mix64(base) ^ salt)[0])
