"""Special functions for hydrogenic two-electron integrals.

Factorial ratios are handled in log space with signs tracked separately so
that the large intermediate factorials of the Coulomb sums never overflow.
Angular-momentum arguments are :class:`HalfInteger` values (stored as twice
the value) or plain ints, which are promoted.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "HalfInteger",
    "log_factorial",
    "binomial",
    "assoc_laguerre",
    "clebsch_gordan",
    "gauss_2f1_a1",
]

_EXACT_FACTORIAL_MAX = 20
_LOG_FACT_SMALL = [math.log(math.factorial(n)) for n in range(_EXACT_FACTORIAL_MAX + 1)]


@dataclass(frozen=True, order=True)
class HalfInteger:
    """An integer or half-integer ``j`` stored exactly as ``2*j``."""

    twice_value: int

    @classmethod
    def of(cls, value) -> "HalfInteger":
        if isinstance(value, HalfInteger):
            return value
        twice = Fraction(value) * 2
        if twice.denominator != 1:
            raise ValueError(f"{value!r} is not an integer or half-integer")
        return cls(int(twice))

    @property
    def value(self) -> float:
        return self.twice_value / 2

    def __neg__(self) -> "HalfInteger":
        return HalfInteger(-self.twice_value)

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        if self.twice_value % 2 == 0:
            return f"HalfInteger({self.twice_value // 2})"
        return f"HalfInteger({self.twice_value}/2)"


def log_factorial(n: int) -> float:
    """Natural log of ``n!``."""
    if n < 0:
        raise ValueError(f"log_factorial needs n >= 0, got {n}")
    if n <= _EXACT_FACTORIAL_MAX:
        return _LOG_FACT_SMALL[n]
    return math.lgamma(n + 1.0)


def binomial(a: int, b: int) -> float:
    """Binomial coefficient C(a, b), zero outside ``0 <= b <= a``."""
    if a < 0:
        raise ValueError(f"binomial needs a >= 0, got {a}")
    if b < 0 or b > a:
        return 0.0
    if a <= _EXACT_FACTORIAL_MAX:
        return float(math.comb(a, b))
    return math.exp(log_factorial(a) - log_factorial(b) - log_factorial(a - b))


def assoc_laguerre(n: int, alpha: int, x):
    """Associated Laguerre polynomial in the mathematical convention.

    ``L_n^alpha(x) = sum_k (-1)^k C(n+alpha, n-k) x^k / k!``. The finite sum
    is evaluated in exact rational arithmetic on the binary value of ``x``
    and rounded once, so the alternating terms (up to x^n/n!) cannot cancel
    catastrophically at large x. Works for scalar or numpy-array ``x``.
    """
    if n < 0 or alpha < 0:
        raise ValueError("assoc_laguerre needs n >= 0 and alpha >= 0")
    coefs = _laguerre_coefficients(n, alpha)
    if np.ndim(x) == 0:
        return _exact_poly(coefs, float(x))
    xs = np.asarray(x, dtype=float)
    return np.array([_exact_poly(coefs, v) for v in xs.ravel()]).reshape(xs.shape)


@lru_cache(maxsize=None)
def _laguerre_coefficients(n: int, alpha: int) -> tuple:
    return tuple(Fraction((-1) ** k * math.comb(n + alpha, n - k), math.factorial(k)) for k in range(n + 1))


def _exact_poly(coefs, x: float) -> float:
    if not math.isfinite(x):
        return math.nan
    fx = Fraction(x)
    acc = Fraction(0)
    for c in reversed(coefs):
        acc = acc * fx + c
    return float(acc)


# (j1, m1, j2, m2, j, m) as twice-values -> coefficient
_CG_CACHE: dict[tuple[int, ...], float] = {}
_CG_LOCK = threading.Lock()


def _twice(v) -> int:
    return HalfInteger.of(v).twice_value


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m> by the Racah sum.

    Arguments may be ints, Fractions, floats holding half-integers, or
    :class:`HalfInteger`. Returns 0 for any selection-rule or triangle
    violation rather than raising.
    """
    key = tuple(_twice(v) for v in (j1, m1, j2, m2, j, m))
    cached = _CG_CACHE.get(key)
    if cached is not None:
        return cached
    value = _clebsch_gordan_twice(*key)
    with _CG_LOCK:
        _CG_CACHE.setdefault(key, value)
    return value


def _clebsch_gordan_twice(tj1, tm1, tj2, tm2, tj, tm) -> float:
    if tm != tm1 + tm2:
        return 0.0
    if min(tj1, tj2, tj) < 0:
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm) > tj:
        return 0.0
    # j +/- m must be integral for each pair
    if (tj1 - tm1) % 2 or (tj2 - tm2) % 2 or (tj - tm) % 2:
        return 0.0
    if tj < abs(tj1 - tj2) or tj > tj1 + tj2 or (tj1 + tj2 + tj) % 2:
        return 0.0

    # all combinations below are integers
    a1 = (tj1 + tj2 - tj) // 2
    a2 = (tj + tj1 - tj2) // 2
    a3 = (tj + tj2 - tj1) // 2
    a4 = (tj + tj1 + tj2) // 2 + 1
    log_a = log_factorial(a1) + log_factorial(a2) + log_factorial(a3) - log_factorial(a4)
    log_b = (
        log_factorial((tj1 + tm1) // 2)
        + log_factorial((tj1 - tm1) // 2)
        + log_factorial((tj2 + tm2) // 2)
        + log_factorial((tj2 - tm2) // 2)
        + log_factorial((tj + tm) // 2)
        + log_factorial((tj - tm) // 2)
    )
    log_pref = 0.5 * (math.log(tj + 1) + log_a + log_b)

    c1 = a1                       # j1 + j2 - j - n
    c2 = (tj1 - tm1) // 2         # j1 - m1 - n
    c3 = (tj2 + tm2) // 2         # j2 + m2 - n
    c4 = (tj - tj2 + tm1) // 2    # j - j2 + m1 + n
    c5 = (tj - tj1 - tm2) // 2    # j - j1 - m2 + n
    n_lo = max(0, -c4, -c5)
    n_hi = min(c1, c2, c3)
    total = 0.0
    for n in range(n_lo, n_hi + 1):
        log_den = (
            log_factorial(n)
            + log_factorial(c1 - n)
            + log_factorial(c2 - n)
            + log_factorial(c3 - n)
            + log_factorial(c4 + n)
            + log_factorial(c5 + n)
        )
        term = math.exp(log_pref - log_den)
        total += -term if n % 2 else term
    return total


def gauss_2f1_a1(b: int, c: int, x: float, rtol: float = 1e-16) -> float:
    """Gauss hypergeometric F(1, b; c; x) for integer b, c >= 1 and 0 <= x < 1."""
    if not (0.0 <= x < 1.0):
        raise ValueError(f"F(1,b;c;x) series needs 0 <= x < 1, got x={x}")
    if b < 1 or c < 1:
        raise ValueError("b and c must be positive integers")
    total = 1.0
    term = 1.0
    k = 0
    while True:
        term *= (b + k) / (c + k) * x
        total += term
        k += 1
        # ratio of successive terms tends to x < 1, so once it is below one
        # the remaining tail is bounded by term * x / (1 - x)
        if (b + k) / (c + k) * x < 1.0 and term <= rtol * total * (1.0 - x):
            break
        if term == 0.0:
            break
    return total
