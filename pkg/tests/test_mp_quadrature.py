from fractions import Fraction

import gmpy2
import mpmath
import numpy as np
import pytest
from gmpy2 import mpfr
from hypothesis import given
from hypothesis import strategies as st

from pochxi._mp import digits_for, fmt, gl_rule, mpfr_to_fraction, to_mpf, to_mpfr, working
from pochxi.quadrature import QuadratureError, integrate


@given(st.integers(-(2**300), 2**300), st.integers(-400, 400))
def test_mpfr_mpmath_round_trip_is_exact(man, exp):
    with working(400):
        x = gmpy2.mul_2exp(mpfr(man), exp)
        assert to_mpfr(to_mpf(x)) == x


def test_fraction_conversion():
    with working(128):
        assert mpfr_to_fraction(mpfr("0.375")) == Fraction(3, 8)
        assert to_mpf(Fraction(1, 3)) == mpmath.mpf(1) / 3


def test_working_restores_precision():
    before = gmpy2.get_context().precision
    with working(512):
        assert gmpy2.get_context().precision == 512
        assert mpmath.mp.prec == 512
    assert gmpy2.get_context().precision == before


def test_fmt_digit_count():
    assert digits_for(256) == 78
    with working(256):
        s = fmt(mpfr(1) / 3, 256)
    digits = s.split(".")[1]
    assert len(digits) == 78 and digits[:76] == "3" * 76


def test_gl_rule_integrates_polynomials_exactly():
    xs, ws = gl_rule(3, 200)
    with working(200):
        # 12 nodes: exact up to degree 23
        got = sum(w * x**22 for x, w in zip(xs, ws))
        assert abs(got - mpfr(2) / 23) < mpfr(2) ** -190


def test_integrate_vector_output():
    bits = 192
    with working(bits):

        def f(nodes):
            return np.array([[gmpy2.exp(-x), gmpy2.sin(x) ** 2] for x in nodes], dtype=object)

        res = integrate(f, [0, 1, 3], 1e-40, bits)
        exact0 = 1 - gmpy2.exp(mpfr(-3))
        exact1 = mpfr(3) / 2 - gmpy2.sin(mpfr(6)) / 4
        assert abs(res.values[0] - exact0) < mpfr("1e-45")
        assert abs(res.values[1] - exact1) < mpfr("1e-45")
        assert max(res.rel_err) < 1e-40


def test_integrate_raises_when_budget_exhausted():
    with working(128):

        def f(nodes):
            return np.array([[gmpy2.sqrt(abs(x))] for x in nodes], dtype=object)

        with pytest.raises(QuadratureError):
            integrate(f, [-1, 1], 1e-35, 128, max_rounds=3)
