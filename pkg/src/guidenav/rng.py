"""Deterministic random primitives shared by the embedder, simulator, and mocks.

Fixture reproducibility depends on this exact stack, kept bit-for-bit stable
so stored embeddings can be regenerated in any language:

* strings hash with 64-bit FNV-1a over their UTF-8 bytes;
* a splitmix64 expander turns one 64-bit seed into the four xoshiro256++
  state words;
* uniforms in [0, 1) take the top 53 bits of each xoshiro256++ output;
* gaussians use the Marsaglia polar method: draw a uniform pair (u, v) in
  (-1, 1) x (-1, 1), reject it when s = u*u + v*v is 0 or >= 1, and yield
  u*sqrt(-2 ln s / s) followed by v*sqrt(-2 ln s / s) before drawing the
  next pair.  A fresh generator therefore produces the same gaussian
  sequence everywhere.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1

FNV1A_OFFSET = 0xCBF29CE484222325
FNV1A_PRIME = 0x100000001B3


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash (xor byte, then multiply by the FNV prime)."""
    h = FNV1A_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV1A_PRIME) & _MASK64
    return h


def hash_text(text: str) -> int:
    return fnv1a_64(text.encode("utf-8"))


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256pp:
    """xoshiro256++ seeded through splitmix64 from a single 64-bit value."""

    __slots__ = ("_s", "_spare")

    def __init__(self, seed: int):
        state = seed & _MASK64
        words = []
        for _ in range(4):
            word, state = _splitmix64(state)
            words.append(word)
        self._s = words
        self._spare: float | None = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[0] + s[3]) & _MASK64, 23) + s[0]) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Uniform in [0, 1) built from the top 53 bits of the next output."""
        return (self.next_u64() >> 11) * 2.0**-53

    def gaussian(self) -> float:
        if self._spare is not None:
            value, self._spare = self._spare, None
            return value
        while True:
            u = 2.0 * self.uniform() - 1.0
            v = 2.0 * self.uniform() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                break
        scale = math.sqrt(-2.0 * math.log(s) / s)
        self._spare = v * scale
        return u * scale

    def gaussians(self, n: int) -> list[float]:
        return [self.gaussian() for _ in range(n)]
