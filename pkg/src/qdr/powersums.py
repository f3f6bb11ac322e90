"""Sums of powers over compositions and the delta_+ product coefficients.

``power_sum_poly(d)`` is the polynomial ``P`` with

    P(N) = sum over a_1 + ... + a_k = N, a_i >= 0, of a_1^d_1 ... a_k^d_k

(``0^0 = 1``).  It is obtained by exact interpolation through brute-force
values and then checked against its known degree, top coefficient and
parity.  ``c_coeffs(a)`` turns it into the coefficients expressing a product
of derivatives of the half delta function through its derivatives.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial, prod

from gmpy2 import mpq

__all__ = [
    "PowerSumPoly",
    "CCoeffs",
    "power_sum_poly",
    "power_sum_brute",
    "c_coeffs",
    "bernoulli",
    "bernoulli_abs",
    "s_series",
    "inverse_series",
]

_LOCK = threading.RLock()


@dataclass(frozen=True)
class PowerSumPoly:
    exponents: tuple[int, ...]
    coeffs: tuple  # mpq, index j is the coefficient of N^j

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, n: int) -> mpq:
        acc = mpq(0)
        for c in reversed(self.coeffs):
            acc = acc * n + c
        return acc


@dataclass(frozen=True)
class CCoeffs:
    exponents: tuple[int, ...]
    coeffs: dict  # j -> mpq, only nonzero entries

    def __getitem__(self, j: int) -> mpq:
        return self.coeffs.get(j, mpq(0))


@lru_cache(maxsize=None)
def _brute_row(exponents: tuple[int, ...], n_max: int) -> tuple[int, ...]:
    """Brute-force values for N = 0..n_max by convolution over the last part."""
    if len(exponents) == 1:
        d = exponents[0]
        return tuple(1 if (d == 0) else a**d for a in range(n_max + 1))
    head = _brute_row(exponents[:-1], n_max)
    d = exponents[-1]
    powers = [1 if d == 0 else a**d for a in range(n_max + 1)]
    return tuple(sum(head[n - a] * powers[a] for a in range(n + 1)) for n in range(n_max + 1))


def power_sum_brute(exponents, n: int) -> int:
    """Direct sum over compositions; used as an oracle and for interpolation."""
    return _brute_row(tuple(exponents), n)[n]


def _newton_to_monomial(values: list[int]) -> list[mpq]:
    """Coefficients of the polynomial through (k, values[k]), k = 0..len-1."""
    diffs = [mpq(v) for v in values]
    newton = []
    # forward differences: P(N) = sum_k Delta^k P(0) * binom(N, k)
    while diffs:
        newton.append(diffs[0])
        diffs = [b - a for a, b in zip(diffs, diffs[1:])]
    deg = len(newton) - 1
    coeffs = [mpq(0)] * (deg + 1)
    # binom(N, k) = N (N-1) ... (N-k+1) / k!
    falling = [mpq(1)]
    for k, d in enumerate(newton):
        if k > 0:
            nxt = [mpq(0)] * (k + 1)
            for j, c in enumerate(falling):
                nxt[j + 1] += c
                nxt[j] -= c * (k - 1)
            falling = nxt
        scale = d / factorial(k)
        for j, c in enumerate(falling):
            coeffs[j] += scale * c
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def power_sum_poly(exponents) -> PowerSumPoly:
    exps = tuple(int(d) for d in exponents)
    if not exps:
        raise ValueError("need at least one exponent")
    if any(d < 0 for d in exps):
        raise ValueError("exponents must be non-negative")
    return _power_sum_poly(tuple(sorted(exps)))


@lru_cache(maxsize=None)
def _power_sum_poly(exps: tuple[int, ...]) -> PowerSumPoly:
    with _LOCK:
        k = len(exps)
        deg = k - 1 + sum(exps)
        values = list(_brute_row(exps, deg + 1))
        coeffs = _newton_to_monomial(values[: deg + 1])
        coeffs += [mpq(0)] * (deg + 1 - len(coeffs))
        poly = PowerSumPoly(exps, tuple(coeffs))
        # one extra node beyond the interpolation range
        if poly(deg + 1) != values[deg + 1]:
            raise ArithmeticError(f"interpolation failed for {exps}")
        top = mpq(prod(factorial(d) for d in exps), factorial(deg))
        if coeffs[deg] != top:
            raise ArithmeticError(f"top coefficient mismatch for {exps}")
        return poly


def c_coeffs(a) -> CCoeffs:
    """Coefficients ``C_j`` with prod delta_+^(a_i) = (-i)^(n-1) sum_j C_j delta_+^(j)."""
    exps = tuple(int(x) for x in a)
    if not exps or any(x < 1 for x in exps):
        raise ValueError("c_coeffs needs a non-empty list of integers >= 1")
    return _c_coeffs(tuple(sorted(exps)))


@lru_cache(maxsize=None)
def _c_coeffs(exps: tuple[int, ...]) -> CCoeffs:
    poly = power_sum_poly(exps)
    top = len(exps) - 1 + sum(exps)
    out = {}
    for j, c in enumerate(poly.coeffs):
        if (top - j) % 2:
            if c:
                raise ArithmeticError(f"parity violated for {exps} at j={j}")
            continue
        if c:
            out[j] = -c if ((top - j) // 2) % 2 else c
    return CCoeffs(exps, out)


@lru_cache(maxsize=None)
def _bernoulli_table(n: int) -> tuple:
    # sum_{k=0}^{m} binom(m+1, k) B_k = 0 for m >= 1, B_0 = 1
    b = [mpq(1)]
    for m in range(1, n + 1):
        b.append(-sum(comb(m + 1, k) * b[k] for k in range(m)) / (m + 1))
    return tuple(b)


def bernoulli(n: int) -> mpq:
    """Bernoulli number B_n (B_1 = -1/2 convention)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return _bernoulli_table(n)[n]


def bernoulli_abs(g: int) -> mpq:
    """|B_{2g}|."""
    if g < 1:
        raise ValueError("g must be >= 1")
    return abs(bernoulli(2 * g))


def s_series(order: int) -> list[mpq]:
    """Even coefficients s_0..s_order of S(z) = (e^{z/2} - e^{-z/2}) / z."""
    if order < 0:
        raise ValueError("order must be non-negative")
    return [mpq(1, 4**i * factorial(2 * i + 1)) for i in range(order + 1)]


def inverse_series(coeffs: list) -> list[mpq]:
    """Power-series reciprocal; ``coeffs[0]`` must be nonzero."""
    if not coeffs or coeffs[0] == 0:
        raise ZeroDivisionError("series has no constant term")
    inv = [mpq(1) / coeffs[0]]
    for n in range(1, len(coeffs)):
        inv.append(-sum(coeffs[k] * inv[n - k] for k in range(1, n + 1)) / coeffs[0])
    return inv
