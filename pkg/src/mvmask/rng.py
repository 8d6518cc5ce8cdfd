"""Deterministic, platform-independent 64-bit random stream.

The generator is the SplittableRandom / SplitMix64 construction: output k of
a stream is the avalanche mix of ``seed + k * GOLDEN``.  Because it is
counter-based, blocks of any size can be produced with vectorized uint64
arithmetic, bit-identical to the scalar path, across platforms and numpy
versions.  Random-mode wire frames regenerate their masking pattern from a
transmitted seed, so this exactness is a protocol requirement, not a nicety.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_SEED_INIT = 0x8BADF00D5EEDC0DE

# 1/2**53, the spacing of the 53-bit uniform grid in [0, 1)
_U53 = 2.0**-53


def mix64(z: int) -> int:
    """SplitMix64 avalanche finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed, order-sensitively.

    Used to derive independent per-purpose streams, e.g.
    ``mix_seed(base_seed, camera_id, frame_id, purpose_tag)``.
    """
    h = _SEED_INIT
    for p in parts:
        h = mix64((h + GOLDEN) ^ (p & MASK64))
    return h


class Stream:
    """Seeded 64-bit stream with identical scalar and vector paths."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.seed + self.counter * GOLDEN)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits of the next word."""
        return (self.next_u64() >> 11) * _U53

    def u64_block(self, n: int) -> np.ndarray:
        """Next n raw 64-bit words as a uint64 array (wrapping arithmetic)."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + idx * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
        return z ^ (z >> np.uint64(31))

    def random_block(self, n: int) -> np.ndarray:
        """Next n uniform doubles in [0, 1) as a float64 array."""
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * _U53
