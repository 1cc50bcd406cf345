"""Deterministic 64-bit random primitives for reproducible selection.

All seeded randomness in the selection strategies flows through the
generators defined here, so a query set can be reproduced from (seed,
parameters) alone, in any language. The exact algorithms:

* SplitMix64 (Stafford mix13 finalizer) expands a user seed into a stream
  of 64-bit values; it seeds the main generator state and derives restart
  or sub-task seeds.
* xoshiro256** is the main generator. Its four state words are the first
  four SplitMix64 outputs of the seed.
* Bounded integers use rejection sampling: draw 64-bit values, discard
  those >= floor(2^64 / bound) * bound, reduce the survivor mod bound.
* Shuffling is Fisher-Yates from the highest index down: for i = n-1 .. 1,
  swap element i with element j = next_below(i + 1).
* Floats in [0, 1) take the top 53 bits: (next_uint64() >> 11) * 2**-53.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix13(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream over a 64-bit state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix13(self._state)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** seeded from four SplitMix64 outputs of ``seed``."""

    def __init__(self, seed: int):
        sm = SplitMix64(seed)
        self._s = [sm.next_uint64() for _ in range(4)]

    @classmethod
    def from_state(cls, state: tuple[int, int, int, int]) -> "Xoshiro256StarStar":
        gen = cls.__new__(cls)
        gen._s = [w & _MASK64 for w in state]
        return gen

    def next_uint64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def next_below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = ((1 << 64) // bound) * bound
        while True:
            r = self.next_uint64()
            if r < limit:
                return r % bound

    def next_float64(self) -> float:
        return (self.next_uint64() >> 11) * 2.0**-53

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates, iterating from the top index down."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.next_below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]


def derive_seeds(seed: int, count: int) -> list[int]:
    """First ``count`` SplitMix64 outputs of ``seed`` (restart seeds etc.)."""
    sm = SplitMix64(seed)
    return [sm.next_uint64() for _ in range(count)]


def mix_seeds(*values: int) -> int:
    """Order-sensitive combination of integers into one 64-bit seed."""
    acc = 0
    for v in values:
        acc = _mix13(((acc ^ (v & _MASK64)) + _GOLDEN) & _MASK64)
    return acc
