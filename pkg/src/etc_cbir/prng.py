"""Deterministic SplitMix64 stream generator.

Single randomness source for key generation, encryption plans, and k-means
seeding. Chosen for bit-exact portability: any implementation of the same
three-line mixer reproduces every ciphertext and codebook built here.
Bounded draws use plain modulo reduction; the bias is negligible for the
moduli (2, 8, block counts) this toolkit draws.
"""

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """SplitMix64 with 64-bit wrapping arithmetic."""

    def __init__(self, seed: int):
        self._z = seed & MASK64

    def next_u64(self) -> int:
        self._z = (self._z + _GAMMA) & MASK64
        x = self._z
        x ^= x >> 30
        x = (x * _MIX1) & MASK64
        x ^= x >> 27
        x = (x * _MIX2) & MASK64
        x ^= x >> 31
        return x

    def next_below(self, bound: int) -> int:
        """Draw an integer in [0, bound) by modulo reduction."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def next_float(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates: for i = n-1 .. 1, j = draw mod (i+1)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]
