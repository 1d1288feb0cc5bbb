"""Standalone reimplementation of the crate's PRNG conventions.

xoshiro256** with state filled by SplitMix64(seed); uniform index by
widening multiply; Fisher-Yates from the last slot down. Used to freeze the
expected values asserted in the Rust tests.
"""
M = (1 << 64) - 1


def splitmix(seed):
    x = seed
    while True:
        x = (x + 0x9E3779B97F4A7C15) & M
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
        yield z ^ (z >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & M


class Xoshiro:
    def __init__(self, seed):
        g = splitmix(seed)
        self.s = [next(g) for _ in range(4)]

    def next(self):
        s = self.s
        result = (rotl((s[1] * 5) & M, 7) * 9) & M
        t = (s[1] << 17) & M
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def below(self, n):
        return (self.next() * n) >> 64

    def shuffle(self, items):
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def mask_labels(class_ids, fraction, seed):
    """class_ids: list (by class index) of ascending train ids."""
    rng = Xoshiro(seed)
    labeled = []
    for ids in class_ids:
        if not ids:
            continue
        ids = list(ids)
        keep = max(1, int(_round_half_away(fraction * len(ids))))
        rng.shuffle(ids)
        labeled.extend(ids[:keep])
    return sorted(labeled)


def _round_half_away(x):
    import math
    return math.floor(x + 0.5) if x >= 0 else -math.floor(-x + 0.5)


if __name__ == "__main__":
    r = Xoshiro(0)
    print("seed0 first three:", [r.next() for _ in range(3)])
    # toy corpus used by dataset::tests: 3 classes, train ids interleaved
    # class of train id i is i % 3 for i in 0..30
    class_ids = [[i for i in range(30) if i % 3 == c] for c in range(3)]
    print("mask 0.3 seed 7:", mask_labels(class_ids, 0.3, 7))
    print("mask 0.1 seed 7:", mask_labels(class_ids, 0.1, 7))
