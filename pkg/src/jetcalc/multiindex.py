"""Multi-index arithmetic for jet coordinates."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from .errors import DimensionMismatch, NotAPartition


class MultiIndex(tuple):
    """n-tuple of non-negative per-direction derivative counts."""

    def __new__(cls, counts):
        t = tuple(counts)
        if any(c < 0 for c in t):
            raise ValueError(f"negative derivative count in {t}")
        return super().__new__(cls, t)

    @classmethod
    def zero(cls, n: int) -> "MultiIndex":
        return cls((0,) * n)

    @classmethod
    def unit(cls, sigma: int, n: int) -> "MultiIndex":
        if not 0 <= sigma < n:
            raise DimensionMismatch(f"direction {sigma} out of range for dimension {n}")
        return cls(tuple(1 if i == sigma else 0 for i in range(n)))

    @property
    def order(self) -> int:
        return sum(self)

    def factorial(self) -> int:
        out = 1
        for c in self:
            out *= math.factorial(c)
        return out

    def add(self, other) -> "MultiIndex":
        if len(self) != len(other):
            raise DimensionMismatch(f"dimension {len(self)} vs {len(other)}")
        return MultiIndex(tuple(a + b for a, b in zip(self, other)))

    def sub(self, other) -> "MultiIndex":
        if len(self) != len(other):
            raise DimensionMismatch(f"dimension {len(self)} vs {len(other)}")
        t = tuple(a - b for a, b in zip(self, other))
        if any(c < 0 for c in t):
            raise ValueError(f"{other} is not a sub-index of {self}")
        return MultiIndex(t)

    def bump(self, sigma: int) -> "MultiIndex":
        return MultiIndex(
            tuple(c + 1 if i == sigma else c for i, c in enumerate(self))
        )

    def drop(self, sigma: int) -> "MultiIndex":
        if self[sigma] == 0:
            raise ValueError(f"direction {sigma} absent from {self}")
        return MultiIndex(tuple(c - 1 if i == sigma else c for i, c in enumerate(self)))

    def support(self):
        return [i for i, c in enumerate(self) if c]


def mi_add(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return MultiIndex(alpha).add(beta)


def mi_multinomial(alpha, beta, gamma) -> Fraction:
    """alpha! / (beta! gamma!) for the partition beta + gamma = alpha."""
    alpha, beta, gamma = MultiIndex(alpha), MultiIndex(beta), MultiIndex(gamma)
    if beta.add(gamma) != alpha:
        raise NotAPartition(f"{beta} + {gamma} != {alpha}")
    return Fraction(alpha.factorial(), beta.factorial() * gamma.factorial())


def multiindices(n: int, order: int):
    """All multi-indices of dimension n with |alpha| == order."""
    if order == 0:
        yield MultiIndex.zero(n)
        return
    for bars in itertools.combinations_with_replacement(range(n), order):
        counts = [0] * n
        for b in bars:
            counts[b] += 1
        yield MultiIndex(counts)


def multiindices_upto(n: int, order: int):
    for k in range(order + 1):
        yield from multiindices(n, k)


def subindices(alpha) -> list:
    """All beta with 0 <= beta <= alpha componentwise."""
    alpha = MultiIndex(alpha)
    ranges = [range(c + 1) for c in alpha]
    return [MultiIndex(t) for t in itertools.product(*ranges)]
