"""Symmetrized Pochhammer polynomials P_k^+ and P_k^-.

P_k(s) = prod_{j=1}^{k} (1 - s/j) and P_k(it) = P_k^+(t) + i P_k^-(t).
Values come from the forward recursion; coefficient vectors are exact
rationals built from the integer polynomial prod_{j=1}^{k} (j - s).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import List, Sequence

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpc, mpfr, mpz

from ._mp import DEFAULT_BITS, to_mpf, to_mpfr, working


@dataclass(frozen=True)
class PochPair:
    k: int
    plus: object
    minus: object

    @property
    def value(self):
        """P_k(it) as a complex number."""
        return mpc(self.plus, self.minus)


@dataclass(frozen=True)
class EvenPolynomial:
    """p(u) = sum_j coeffs[j] u**j with u = t**2.

    ``parity`` is "even" for p(t**2) and "odd" for t * p(t**2).
    Coefficients may be Fractions (exact) or mpfr.
    """

    coeffs: tuple
    parity: str = "even"

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, u):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * u + c
        return acc

    def eval_t(self, t):
        v = self(t * t)
        return t * v if self.parity == "odd" else v

    def derivative(self) -> "EvenPolynomial":
        """d/du, keeping the parity tag."""
        return EvenPolynomial(
            tuple(j * c for j, c in enumerate(self.coeffs) if j), self.parity
        )

    def is_alternating(self) -> bool:
        nz = [c for c in self.coeffs if c != 0]
        return bool(nz) and nz[0] > 0 and all(
            (a > 0) != (b > 0) for a, b in zip(nz, nz[1:])
        )

    def to_mpfr(self) -> "EvenPolynomial":
        return EvenPolynomial(tuple(to_mpfr(c) for c in self.coeffs), self.parity)


# ---------------------------------------------------------------- exact rows

_rows: List[List[int]] = [[1]]


def integer_row(k: int) -> List[int]:
    """Integer coefficients (ascending in s) of prod_{j=1}^{k} (j - s)."""
    while len(_rows) <= k:
        j = len(_rows)
        prev = _rows[-1]
        row = [0] * (j + 1)
        for i, c in enumerate(prev):
            row[i] += j * c
            row[i + 1] -= c
        _rows.append(row)
    return _rows[k]


def _split_row(k: int):
    """Integer numerators of P_k^+ (in u) and P_k^-/t (in u), common denominator k!."""
    q = integer_row(k)
    plus = [(-1) ** m * q[2 * m] for m in range(k // 2 + 1)]
    minus = [(-1) ** m * q[2 * m + 1] for m in range((k - 1) // 2 + 1)] if k else [0]
    return plus, minus


def coeffs_plus(k: int) -> EvenPolynomial:
    if k < 0:
        raise ValueError("k must be >= 0")
    plus, _ = _split_row(k)
    d = factorial(k)
    return EvenPolynomial(tuple(Fraction(c, d) for c in plus), "even")


def coeffs_minus(k: int) -> EvenPolynomial:
    """P_k^-(t) = t * p(t**2)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    _, minus = _split_row(k)
    d = factorial(k)
    return EvenPolynomial(tuple(Fraction(c, d) for c in minus), "odd")


@lru_cache(maxsize=8)
def plus_matrix(n: int, bits: int) -> np.ndarray:
    """Object matrix C[k, j] = u**j coefficient of P_k^+, rows k = 0..n, as mpfr."""
    m = n // 2 + 1
    out = np.zeros((n + 1, m), dtype=object)
    with working(bits):
        zero = mpfr(0)
        for k in range(n + 1):
            plus, _ = _split_row(k)
            d = mpfr(mpz(factorial(k)))
            for j in range(m):
                out[k, j] = mpfr(mpz(plus[j])) / d if j < len(plus) else zero
    return out


# ---------------------------------------------------------------- evaluation


def eval_pair(k: int, t, bits: int = DEFAULT_BITS) -> PochPair:
    """(P_k^+(t), P_k^-(t)) by forward recursion. ``t`` may be complex."""
    if k < 0:
        raise ValueError("k must be >= 0")
    with working(bits):
        t = to_mpfr(t) if not isinstance(t, (type(mpfr(0)), type(mpc(0)))) else t
        p, m = mpfr(1), mpfr(0)
        for j in range(k):
            p, m = p + t * m / (j + 1), m - t * p / (j + 1)
    return PochPair(k, p, m)


def eval_pairs_dt(n: int, t, bits: int = DEFAULT_BITS):
    """Lists (P+, P-, dP+/dt, dP-/dt) for k = 0..n at real ``t``."""
    with working(bits):
        t = to_mpfr(t)
        p, m, dp, dm = mpfr(1), mpfr(0), mpfr(0), mpfr(0)
        out = [(p, m, dp, dm)]
        for j in range(n):
            c = j + 1
            p, m, dp, dm = (
                p + t * m / c,
                m - t * p / c,
                dp + (m + t * dm) / c,
                dm - (p + t * dp) / c,
            )
            out.append((p, m, dp, dm))
    return out


def harmonic_sum(n: int, t, bits: int = DEFAULT_BITS):
    """sum_{k=0}^{n} P_k^+(t)/(k+1); equals -P_{n+1}^-(t)/t for t != 0."""
    with working(bits):
        t = to_mpfr(t)
        p, m = mpfr(1), mpfr(0)
        acc = mpfr(0)
        for j in range(n + 1):
            acc += p / (j + 1)
            p, m = p + t * m / (j + 1), m - t * p / (j + 1)
    return acc


# ---------------------------------------------------------------- asymptotics


@dataclass(frozen=True)
class PochAsymptotics:
    u: object
    r_u: object
    phi_u: object


def poch_asymptotics(u, bits: int = DEFAULT_BITS) -> PochAsymptotics:
    """r(u) = |Gamma(1-iu)| and phi(u) = arg Gamma(1-iu), continuous in u."""
    with working(bits):
        u = to_mpf(u)
        lg = mpmath.loggamma(mpmath.mpc(1, -u))
        return PochAsymptotics(u, mpmath.exp(lg.real), lg.imag)


def asymptotic_plus(k: int, u, bits: int = DEFAULT_BITS):
    """Large-k form cos(u log k + phi(u)) / r(u) of P_k^+(u)."""
    a = poch_asymptotics(u, bits)
    with working(bits):
        return mpmath.cos(a.u * mpmath.log(k) + a.phi_u) / a.r_u


# ---------------------------------------------------------------- identities


def euler_formula_check(y, beta, t, n_terms: int, bits: int = DEFAULT_BITS):
    """|exp(-iyt) - sum_k e^{-beta y}(1-e^{-beta y})^k P_k(it/beta)| for k <= n_terms.

    With P_1(it) = 1 - it the series is the binomial expansion of
    e^{-beta y} (e^{-beta y})^{it/beta - 1}, hence the minus sign in the phase.
    """
    with working(bits):
        y, beta, t = to_mpfr(y), to_mpfr(beta), to_mpfr(t)
        if y <= 0 or beta <= 0:
            raise ValueError("y and beta must be positive")
        e = gmpy2.exp(-beta * y)
        q = 1 - e
        s = t / beta
        p, m = mpfr(1), mpfr(0)
        w = e
        acc = mpc(0)
        for j in range(n_terms + 1):
            acc += w * mpc(p, m)
            p, m = p + s * m / (j + 1), m - s * p / (j + 1)
            w *= q
        target = mpc(gmpy2.cos(y * t), -gmpy2.sin(y * t))
        return abs(target - acc)


def generating_partial(s, e, n_terms: int, bits: int = DEFAULT_BITS):
    """sum_{k<=N} P_k(s+1) e^k, which tends to (1-e)^s for |e| < 1."""
    with working(bits):
        s, e = to_mpfr(s), to_mpfr(e)
        p = mpfr(1)
        acc = mpfr(0)
        ek = mpfr(1)
        for j in range(n_terms + 1):
            acc += p * ek
            p *= 1 - (s + 1) / (j + 1)
            ek *= e
        return acc


def roots_plus(k: int, bits: int = DEFAULT_BITS) -> List:
    """Ascending u-roots of P_k^+; raises if any root fails to be real."""
    if k < 2:
        raise ValueError("P_k^+ has no roots for k < 2")
    from .rootfinder import real_roots_exact

    return real_roots_exact(coeffs_plus(k), bits)


def roots_minus(k: int, bits: int = DEFAULT_BITS) -> List:
    """Ascending u-roots of P_k^-/t (k >= 3)."""
    from .rootfinder import real_roots_exact

    return real_roots_exact(coeffs_minus(k), bits)

