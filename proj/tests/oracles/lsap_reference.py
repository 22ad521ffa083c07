# Copyright 2026 The lsapcvae Authors
# SPDX-License-Identifier: Apache-2.0

# Independent SplitMix64 + exhaustive enumeration for the seeded 5x5 example
# in test_lsap.cpp. Run: python3 lsap_reference.py
from fractions import Fraction
from itertools import permutations

MASK = (1 << 64) - 1

class SplitMix64:
    def __init__(self, seed):
        self.s = seed & MASK

    def next(self):
        self.s = (self.s + 0x9E3779B97F4A7C15) & MASK
        z = self.s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def uniform(self):
        return (self.next() >> 11) * 2.0 ** -53

rng = SplitMix64(42)
n = 5
c = [[rng.uniform() for _ in range(n)] for _ in range(n)]
# Exact rational totals so the minimizer is not decided by rounding.
best = min(permutations(range(n)), key=lambda p: (sum(Fraction(c[i][p[i]]) for i in range(n)), p))
print("first_entry =", repr(c[0][0]))
print("perm =", list(best))
print("cost =", repr(float(sum(Fraction(c[i][best[i]]) for i in range(n)))))
