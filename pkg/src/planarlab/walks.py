"""Exact and log-space probabilities for simple random walk.

``S`` is simple random walk, ``T`` its first hitting time of -1 and ``P_l``
the law started from ``l``. Walk lengths up to ``exact_threshold`` are
handled with exact rationals; longer ones in log space with ``math.fsum``
for any sums.
"""
from __future__ import annotations

import math
from fractions import Fraction

EXACT_THRESHOLD = 64


def _log_binom(n: int, j: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1)


class WalkOracle:
    def __init__(self, max_length: int = 10**7, exact_threshold: int = EXACT_THRESHOLD):
        self.max_length = max_length
        self.exact_threshold = exact_threshold

    def _exact(self, n: int) -> bool:
        return n <= self.exact_threshold

    def _check(self, n: int) -> None:
        if n > self.max_length:
            raise ValueError(f"walk length {n} exceeds max_length {self.max_length}")

    def point(self, start: int, n: int, end: int):
        """P_start(S_n = end)."""
        self._check(n)
        diff = end - start
        if n < 0 or abs(diff) > n or (n + diff) % 2:
            return Fraction(0) if self._exact(n) else 0.0
        ups = (n + diff) // 2
        if self._exact(n):
            return Fraction(math.comb(n, ups), 2**n)
        return math.exp(_log_binom(n, ups) - n * math.log(2.0))

    def hitting(self, level: int, n: int):
        """P_level(T = n) via Kemperman's formula (level+1)/n * P_level(S_n = -1)."""
        if n < 1 or level < 0:
            raise ValueError("need level >= 0 and n >= 1")
        p = self.point(level, n, -1)
        if self._exact(n):
            return Fraction(level + 1, n) * p
        return (level + 1) / n * p

    def conditioned_marginal(self, k: int, i: int, level: int):
        """P(S_i = level | T = 2k+1)."""
        if not 1 <= i <= 2 * k:
            raise ValueError(f"need 1 <= i <= 2k, got i={i}, k={k}")
        exact = self._exact(2 * k + 1)
        if level < 0 or level > min(i, 2 * k - i) or (i + level) % 2:
            return Fraction(0) if exact else 0.0
        if exact:
            num = 2 * self.hitting(level, i + 1) * self.hitting(level, 2 * k + 1 - i)
            return num / self.hitting(0, 2 * k + 1)
        # log-space version of the second form of the product formula
        log_pref = (
            math.log(2 * (2 * k + 1))
            + 2 * math.log(level + 1)
            - math.log(i + 1)
            - math.log(2 * k + 1 - i)
        )
        log_a = _log_binom(i + 1, (i - level) // 2) - (i + 1) * math.log(2.0)
        m = 2 * k + 1 - i
        log_b = _log_binom(m, (m - 1 - level) // 2) - m * math.log(2.0)
        log_c = _log_binom(2 * k + 1, k) - (2 * k + 1) * math.log(2.0)
        return math.exp(log_pref + log_a + log_b - log_c)

    def marginal_support(self, k: int, i: int) -> range:
        lo = i % 2
        return range(lo, min(i, 2 * k - i) + 1, 2)


_DEFAULT = WalkOracle()


def kemperman(level: int, n: int):
    return _DEFAULT.hitting(level, n)


def conditioned_marginal(k: int, i: int, level: int):
    return _DEFAULT.conditioned_marginal(k, i, level)


def brownian_density(t: float, x: float, y: float = 0.0) -> float:
    """Heat kernel p_t(x, y)."""
    return math.exp(-((y - x) ** 2) / (2 * t)) / math.sqrt(2 * math.pi * t)


def local_limit_gap(n: int, s: float, x: float) -> float:
    """|sqrt(n) P(S_[ns] in {[x sqrt n], [x sqrt n]+1}) - 2 p_s(0, x)|."""
    m = math.floor(n * s)
    if m < 1:
        raise ValueError("need n*s >= 1")
    a = math.floor(x * math.sqrt(n))
    prob = math.fsum(_DEFAULT.point(0, m, j) for j in (a, a + 1))
    return abs(math.sqrt(n) * float(prob) - 2 * brownian_density(s, 0.0, x))
