"""Seeded PRNG used for all algorithmic randomness in the package.

xoshiro256** with a splitmix64 seeder.  Implemented here rather than taken
from numpy so that every random draw is bit-stable across platforms and
library versions; seeds are recorded in file headers and bench CSVs.
"""

MASK64 = (1 << 64) - 1


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class Rng:
    """xoshiro256** stream.  Deterministic for a given integer seed."""

    def __init__(self, seed=0):
        self.seed = int(seed) & MASK64
        s = self.seed
        self.state = []
        for _ in range(4):
            s, v = _splitmix64(s)
            self.state.append(v)

    def next64(self):
        s0, s1, s2, s3 = self.state
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.state = [s0, s1, s2, s3]
        return result

    def randint(self, n):
        """Uniform integer in [0, n).  Rejection sampling, no modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        if n == 1:
            return 0
        limit = (MASK64 + 1) - ((MASK64 + 1) % n)
        while True:
            v = self.next64()
            if v < limit:
                return v % n

    def randints(self, n, count):
        return [self.randint(n) for _ in range(count)]

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def shuffle(self, seq):
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint(i + 1)
            seq[i], seq[j] = seq[j], seq[i]
        return seq

    def spawn(self, tag):
        """Derive an independent child stream from this seed and a tag."""
        h = self.seed
        for ch in str(tag).encode():
            h, _ = _splitmix64(h ^ ch)
        _, v = _splitmix64(h)
        return Rng(v)
