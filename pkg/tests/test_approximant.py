import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr
from hypothesis import given
from hypothesis import strategies as st

from pochxi._mp import working
from pochxi.afamily import bessel, incgamma, riemann, step, tau, xi_exact
from pochxi.approximant import build, large_beta_residual
from pochxi.coefficients import real_axis_C1, remainder_bound
from pochxi.pochhammer import eval_pair
from pochxi.rootfinder import approx_all_real, classify

BITS = 256


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------- structure


@pytest.mark.parametrize("n", [4, 5, 9, 30])
def test_degree_and_alternation(n):
    a = build(bessel(), n, 2)
    assert a.degree == n // 2
    cs = a.poly_u.coeffs
    assert cs[0] > 0
    assert all((c > 0) == (j % 2 == 0) for j, c in enumerate(cs))


def test_n_below_four_rejected():
    with pytest.raises(ValueError):
        build(step(), 3, 1)


def test_value_at_zero_is_coefficient_sum():
    a = build(riemann(), 12, 3)
    with working(BITS):
        assert rel(a.eval(0), sum(a.coeffs.values)) < mpfr("1e-60")
        assert a.eval_dt(0) == 0


@given(st.floats(-15, 15, allow_nan=False))
def test_dense_matches_term_sum(t):
    a = _cached("riemann20")
    with working(BITS):
        dense = a.eval(t)
        direct = a.term_sum(t)
        assert abs(dense - direct) <= mpfr("1e-25") * max(abs(direct), mpfr(1))


def test_term_sum_is_pochhammer_expansion():
    a = build(bessel(), 10, "1.7")
    with working(BITS):
        t = mpfr("4.2")
        s = sum(b * eval_pair(k, t / a.beta, BITS).plus for k, b in enumerate(a.coeffs.values))
        assert abs(s - a.term_sum(t)) < mpfr("1e-60")


_CACHE = {}


def _cached(key):
    if key not in _CACHE:
        _CACHE[key] = build(riemann(), 20, "3.5")
    return _CACHE[key]


@given(st.floats(0.1, 12))
def test_t_derivatives_by_finite_difference(t):
    a = _cached("riemann20")
    with working(BITS):
        tv, h = mpfr(t), mpfr("1e-25")
        fd1 = (a.eval(tv + h) - a.eval(tv - h)) / (2 * h)
        fd2 = (a.eval(tv + h) - 2 * a.eval(tv) + a.eval(tv - h)) / (h * h)
        assert abs(a.eval_dt(tv) - fd1) <= mpfr("1e-20") * max(abs(fd1), mpfr(1))
        assert abs(a.eval_dtt(tv) - fd2) <= mpfr("1e-10") * max(abs(fd2), mpfr(1))


def test_complex_evaluation_is_conjugate_symmetric():
    a = build(bessel(), 12, 2)
    with working(BITS):
        z = gmpy2.mpc(mpfr("3.1"), mpfr("0.4"))
        assert abs(a.eval(z) - a.eval(z.conjugate()).conjugate()) < mpfr("1e-60")


# ---------------------------------------------------------------- double roots


def test_step_n4_double_root_near_346():
    prof = classify(build(step(), 4, "0.074").poly_u)
    ts = [float(t) for t in prof.real_roots_t] + [float(re) for re, _ in prof.complex_pairs]
    # just below the onset: a pair sits near 3.46, real or barely complex
    assert any(abs(t - 3.46) < 0.05 for t in ts)
    gap_ts = sorted(ts)
    assert min(b - a for a, b in zip(gap_ts, gap_ts[1:])) < 0.1 or prof.complex_pairs


def test_riemann_n10_near_double_root():
    # beta = 3.23 is 0.1% below the onset; the pair's imaginary part grows like
    # sqrt(delta beta), about 1.4% of |t| here
    prof = classify(build(riemann(), 10, "3.23").poly_u, coalesce_rel="0.02")
    assert prof.double_root is not None
    assert abs(float(prof.double_root[0]) - 10.63) < 0.05


# ---------------------------------------------------------------- beta derivative


def _fd_dbeta(spec, n, beta, t, bits=BITS):
    with working(bits):
        b, tv = mpfr(beta), mpfr(t)
        h = b * mpfr("1e-10")
        return (build(spec, n, b + h, bits).eval(tv) - build(spec, n, b - h, bits).eval(tv)) / (2 * h)


def test_dbeta_riemann_n10():
    a = build(riemann(), 10, 3)
    with working(BITS):
        assert rel(a.eval_dbeta(10), _fd_dbeta(riemann(), 10, 3, 10)) <= 1e-6


def test_dbeta_random_cases():
    rng = np.random.default_rng(20240611)
    specs = [riemann(), bessel(), bessel("0.005"), incgamma("0.01"), incgamma("1"), step(), tau(5)]
    for _ in range(10):
        spec = specs[rng.integers(len(specs))]
        n = int(rng.integers(4, 31))
        beta = f"{rng.uniform(0.5, 6):.6f}"
        t = f"{rng.uniform(0.2, 12):.6f}"
        a = build(spec, n, beta)
        with working(BITS):
            assert rel(a.eval_dbeta(t), _fd_dbeta(spec, n, beta, t)) <= 1e-6, (spec.label, n, beta, t)


def test_dbeta_step_at_zero_closed_form():
    # Xi_n(0) = sum_k 4 q^{k+1} / (beta (k+1)), q = 1 - e^{-beta}
    n, beta = 12, mpfr("0.9")
    a = build(step(), n, beta)
    with working(BITS):
        q = -gmpy2.expm1(-beta)
        dq = gmpy2.exp(-beta)
        exact = sum(4 * (q ** (k + 1) * (-1 / beta**2) + (k + 1) * q**k * dq / beta) / (k + 1)
                    for k in range(n + 1))
        assert rel(a.eval_dbeta(0), exact) < mpfr("1e-60")


def test_dbeta_dt_by_finite_difference():
    a = build(bessel(), 14, "2.2")
    with working(BITS):
        t, h = mpfr("5.5"), mpfr("1e-25")
        fd = (a.eval_dbeta(t + h) - a.eval_dbeta(t - h)) / (2 * h)
        assert rel(a.eval_dbeta_dt(t), fd) < mpfr("1e-15")


def test_dbeta_tracks_shifted_xi_star_on_step_trace(traces):
    # beta_n d/dbeta Xi_{n+1}(t_n, beta_n) has the sign of 4 cos(t_n + 1.12) away from jumps
    tr = traces("step_w1")
    jumps = tr.jump_ns()
    agree = total = 0
    for r in tr.good_rows():
        if r.n < 10 or r.n >= 100 or any(abs(r.n - j) <= 1 or abs(r.n + 1 - j) <= 1 for j in jumps):
            continue
        a = build(tr.spec, r.n + 1, r.beta)
        with working(BITS):
            lhs = r.beta * a.eval_dbeta(r.t)
        total += 1
        agree += (lhs > 0) == (math.cos(float(r.t) + 1.12) > 0)
    assert total > 50 and agree / total >= 0.95


# ---------------------------------------------------------------- large beta


def test_large_beta_residual_decreases():
    r3 = large_beta_residual(riemann(), 8, 1e3, 5)
    r4 = large_beta_residual(riemann(), 8, 1e4, 5)
    assert r4 < r3 < 0.05
    assert large_beta_residual(riemann(), 8, 1e6, 5) < r4


def test_large_beta_residual_at_zero():
    assert large_beta_residual(bessel(), 6, 1e5, 0) < 1e-3


@pytest.mark.parametrize("spec", [riemann(), bessel(), step()])
def test_all_real_for_huge_beta(spec):
    for n in (4, 7, 12, 20, 31, 40):
        assert approx_all_real(build(spec, n, 100 * n)), n


def test_convergence_to_xi_within_remainder_bound():
    spec, n, bits = riemann(), 200, 128
    with working(bits):
        beta = mpfr(2)
        a = build(spec, n, beta, bits, tol=1e-25, derivative=False)
        for t in (0, 5, 10):
            t = mpfr(t)
            bound = remainder_bound(spec, n, beta, 0, real_axis_C1(t, beta, bits), bits)
            assert abs(xi_exact(spec, t, bits) - a.eval(t)) <= bound * (1 + mpfr("1e-8")), t
