"""Deterministic, platform-independent random number generation.

The generator is xoshiro256++ with its state expanded from a 64-bit seed by
splitmix64, so a single integer seed reproduces the exact same draw sequence
on every platform. All randomness in the library flows through this class;
nothing touches the global numpy or stdlib RNG state.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_SPLITMIX_MUL1 = 0xBF58476D1CE4E5B9
_SPLITMIX_MUL2 = 0x94D049BB133111EB


def splitmix64_next(x: int) -> tuple[int, int]:
    """One splitmix64 step. Returns (new_state, output)."""
    x = (x + _SPLITMIX_GAMMA) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * _SPLITMIX_MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * _SPLITMIX_MUL2) & _MASK64
    return x, z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Derive an independent 64-bit sub-seed from (seed, index).

    Used to hand out per-image seeds so that work items can be processed in
    any order (or in parallel) without perturbing each other's streams.
    """
    x = (seed & _MASK64) ^ ((index & _MASK64) * _SPLITMIX_GAMMA & _MASK64)
    _, out = splitmix64_next(x)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class SeededRng:
    """xoshiro256++ stream seeded via splitmix64 from a 64-bit seed."""

    __slots__ = ("_s",)

    def __init__(self, seed: int):
        x = seed & _MASK64
        state = []
        for _ in range(4):
            x, word = splitmix64_next(x)
            state.append(word)
        self._s = state

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

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias (rejection sampling)."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            u = self.next_u64()
            if u <= limit:
                return u % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.below(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        """k distinct items, order-stable partial Fisher-Yates."""
        if k > len(items):
            raise ValueError("sample larger than population")
        pool = list(items)
        picked = []
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
            picked.append(pool[i])
        return picked

    def choice(self, items: list):
        if not items:
            raise ValueError("choice from empty sequence")
        return items[self.below(len(items))]

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Gaussian draw via Box-Muller (two uniforms per call, no caching)."""
        u1 = self.random()
        while u1 == 0.0:
            u1 = self.random()
        u2 = self.random()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mu + sigma * z

    def spawn(self, index: int) -> "SeededRng":
        """Child stream for work item `index`, independent of this stream."""
        return SeededRng(derive_seed_from_state(self._s, index))


def derive_seed_from_state(state: list[int], index: int) -> int:
    mixed = (state[0] ^ state[3]) & _MASK64
    return derive_seed(mixed, index)
