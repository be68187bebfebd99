"""SplitMix64 streams keyed by (seed, decision step, rollout index).

Every shield rollout owns its own stream, so results do not depend on the
order in which rollouts run.  The numba kernels carry a bit-identical copy
of this generator.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB
TO_UNIT = 2.0 ** -53


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MUL1) & MASK64
    z = ((z ^ (z >> 27)) * MUL2) & MASK64
    return z ^ (z >> 31)


def stream_seed(seed: int, step: int, index: int) -> int:
    s = mix64((seed + GOLDEN) & MASK64)
    s = mix64(((s ^ (step & MASK64)) + GOLDEN) & MASK64)
    return mix64(((s ^ (index & MASK64)) + GOLDEN) & MASK64)


class Stream:
    __slots__ = ("state",)

    def __init__(self, seed: int, step: int = 0, index: int = 0):
        self.state = stream_seed(int(seed) & MASK64, int(step), int(index))

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        self.state = (self.state + GOLDEN) & MASK64
        return (mix64(self.state) >> 11) * TO_UNIT


def sample_index(probs, u: float) -> int:
    """Inverse-CDF draw; zero-probability entries are never returned."""
    c = 0.0
    last = -1
    for a in range(len(probs)):
        p = probs[a]
        if p > 0.0:
            c += p
            last = a
            if u < c:
                return a
    return last
