"""Precision plumbing shared by every module.

Hot loops run on gmpy2 ``mpfr``/``mpc``; special functions come from mpmath.
Conversions between the two are exact (mantissa/exponent), never via float.
"""
from __future__ import annotations

from contextlib import contextmanager
from fractions import Fraction
from functools import lru_cache

import gmpy2
import mpmath
from gmpy2 import mpc, mpfr, mpz

DEFAULT_BITS = 256


@contextmanager
def working(bits: int):
    """Set both gmpy2 and mpmath to ``bits`` of mantissa for the block."""
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        with mpmath.workprec(bits):
            yield


def bits_now() -> int:
    return gmpy2.get_context().precision


def to_mpf(x):
    """mpfr/mpc/int/Fraction -> mpmath number, exactly."""
    if isinstance(x, type(mpc(0))):
        return mpmath.mpc(to_mpf(x.real), to_mpf(x.imag))
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, type(mpfr(0))):
        if not gmpy2.is_finite(x):
            return mpmath.mpf(str(x))
        if x == 0:
            return mpmath.mpf(0)
        man, exp = x.as_mantissa_exp()
        return mpmath.mpf((int(man), int(exp)))
    return mpmath.mpf(x) if not isinstance(x, (mpmath.mpf, mpmath.mpc)) else x


def to_mpfr(x):
    """mpmath / int / str / Fraction -> mpfr at the current precision."""
    if isinstance(x, mpmath.mpc):
        return mpc(to_mpfr(x.real), to_mpfr(x.imag))
    if isinstance(x, mpmath.mpf):
        sign, man, exp, _ = x._mpf_
        if man == 0:
            return mpfr(0)
        v = gmpy2.mul_2exp(mpfr(mpz(man)), exp)
        return -v if sign else v
    if isinstance(x, Fraction):
        return mpfr(x.numerator) / mpfr(x.denominator)
    if isinstance(x, (complex, type(mpc(0)))):
        return mpc(x)
    return mpfr(x)


def mpfr_to_fraction(x) -> Fraction:
    man, exp = x.as_mantissa_exp()
    man, exp = int(man), int(exp)
    return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)


def digits_for(bits: int) -> int:
    """Decimal digits used when printing ``bits``-bit numbers."""
    return -(-bits * 302 // 1000)


def fmt(x, bits: int) -> str:
    """Full-precision decimal string for mpfr or mpc."""
    d = digits_for(bits)
    if isinstance(x, type(mpc(0))):
        return f"{fmt(x.real, bits)}{'+' if x.imag >= 0 else '-'}{fmt(abs(x.imag), bits)}j"
    with mpmath.workprec(max(bits, x.precision if isinstance(x, type(mpfr(0))) else 0) + 8):
        return mpmath.nstr(to_mpf(x), d, min_fixed=-5, max_fixed=5, strip_zeros=False)


@lru_cache(maxsize=32)
def gl_rule(degree: int, bits: int):
    """Gauss-Legendre rule on [-1, 1] with 3*2**(degree-1) nodes, as mpfr tuples."""
    gl = mpmath.calculus.quadrature.GaussLegendre(mpmath.mp)
    with working(bits + 16):
        pairs = gl.calc_nodes(degree, bits + 16)
    with working(bits):
        xs = tuple(to_mpfr(x) for x, _ in pairs)
        ws = tuple(to_mpfr(w) for _, w in pairs)
    return xs, ws
