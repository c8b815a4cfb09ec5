"""Expansion coefficients b_k(beta), B_k = beta*b_k, derivatives and remainders.

With y = exp(-beta v),

    b_k(beta) = 4 * int_0^inf A_I(e^{2v}) e^{-beta v} (1 - e^{-beta v})^k dv,

which is the y-integral (4/beta) int_0^1 A_I(y^{-2/beta}) (1-y)^k dy written
in the variable where A_I does not depend on beta. All k share one
quadrature; the beta-derivative differentiates the integrand analytically.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpfr

from ._mp import DEFAULT_BITS, to_mpf, to_mpfr, working
from .afamily import AFunctionSpec, ai_v, cutoff_v, xi_exact
from .quadrature import integrate

DEFAULT_TOL = 1e-30


class RegimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CoeffVector:
    spec: AFunctionSpec
    beta: object
    ks: tuple
    values: tuple  # b_k, mpfr
    dvalues: Optional[tuple]  # d b_k / d beta
    achieved_tol: tuple  # per-entry relative error estimate
    bits: int

    def __post_init__(self):
        if any(v <= 0 for v in self.values) and self.spec.variant != "dirichlet5":
            # the dirichlet5 weight is not sign-definite; callers check it
            raise ValueError("non-positive coefficient; quadrature or spec problem")

    def as_rows(self):
        return [(k, v, e) for k, v, e in zip(self.ks, self.values, self.achieved_tol)]


def _step_closed(spec: AFunctionSpec, beta, ks, derivative: bool):
    w = spec.mp("w") * mpfr(spec.vscale)
    e = gmpy2.exp(-w * beta)
    q = -gmpy2.expm1(-w * beta)
    vals, dvals = [], []
    for k in ks:
        qk = q**k
        b = 4 * qk * q / (beta * (k + 1))
        vals.append(b)
        if derivative:
            dvals.append(-b / beta + 4 * w * e * qk / beta)
    return vals, (dvals if derivative else None)


def _v_upper(spec: AFunctionSpec, beta, kmax: int, bits: int):
    upper = cutoff_v(spec, bits)
    # the factor e^{-beta v} alone makes the tail negligible past this point
    vb = ((bits + 80) * gmpy2.log(mpfr(2)) + gmpy2.log(mpfr(kmax + 2))) / beta
    return min(upper, vb)


def _grid(spec: AFunctionSpec, beta, upper):
    width = min(mpfr("0.25"), 4 / beta)
    count = max(1, int(gmpy2.ceil(upper / width)))
    pts = [upper * i / count for i in range(count + 1)]
    sup = spec.support_upper_v
    if sup is not None:
        s = to_mpfr(sup)
        if 0 < s < upper and s not in pts:
            pts = sorted(pts + [s])
    return pts


def _integrand(spec: AFunctionSpec, beta, ks, derivative: bool, bits: int, tail: bool = False):
    ks = list(ks)
    steps = [ks[0]] + [b - a for a, b in zip(ks, ks[1:])]
    karr = np.array([mpfr(k) for k in ks], dtype=object)

    def f(nodes):
        vn = np.asarray(nodes, dtype=object)
        a = np.array([ai_v(spec, v, bits) for v in nodes], dtype=object)
        e = np.array([gmpy2.exp(-beta * v) for v in nodes], dtype=object)
        q = np.array([-gmpy2.expm1(-beta * v) for v in nodes], dtype=object)
        # factors[:, i] = q^{k_i - k_{i-1}}; cumulative product gives q^{k_i}
        fac = np.empty((len(nodes), len(ks)), dtype=object)
        for i, st in enumerate(steps):
            fac[:, i] = q if st == 1 else [x**st for x in q]
        # tail=True integrates A q^{k}, the t=0 remainder kernel
        lead = a if tail else a * e
        fac[:, 0] = fac[:, 0] * lead
        vals = np.multiply.accumulate(fac, axis=1)
        if not derivative:
            return vals
        # d/dbeta [e q^k] = v e q^k (k e/q - 1)
        g = vn * e / q
        dvals = vals * (np.outer(g, karr) - vn[:, None])
        return np.concatenate([vals, dvals], axis=1)

    return f


def coeff_vector(
    spec: AFunctionSpec,
    beta,
    ks: Sequence[int],
    bits: int = DEFAULT_BITS,
    tol: float = DEFAULT_TOL,
    derivative: bool = False,
) -> CoeffVector:
    """b_k(beta) for the sorted indices ``ks``, optionally with d/dbeta."""
    ks = tuple(sorted(int(k) for k in ks))
    if not ks or ks[0] < 0:
        raise ValueError("indices must be non-negative")
    with working(bits):
        beta = to_mpfr(beta)
        if beta <= 0:
            raise ValueError("beta must be positive")
        if spec.variant == "step":
            vals, dvals = _step_closed(spec, beta, ks, derivative)
            return CoeffVector(spec, beta, ks, tuple(vals), tuple(dvals) if dvals else None,
                               tuple(0.0 for _ in ks), bits)
        upper = _v_upper(spec, beta, ks[-1], bits)
        f = _integrand(spec, beta, ks, derivative, bits)
        res = integrate(f, _grid(spec, beta, upper), tol, bits)
        vals = [4 * v for v in res.values]
        nk = len(ks)
        b = tuple(vals[:nk])
        db = tuple(vals[nk:]) if derivative else None
        return CoeffVector(spec, beta, ks, b, db, tuple(res.rel_err[:nk]), bits)


def coeff_bk(spec, k: int, beta, bits: int = DEFAULT_BITS, tol: float = DEFAULT_TOL):
    return coeff_vector(spec, beta, [k], bits, tol).values[0]


def coeff_Bn(spec, n: int, beta, bits: int = DEFAULT_BITS, tol: float = DEFAULT_TOL):
    with working(bits):
        return to_mpfr(beta) * coeff_bk(spec, n, beta, bits, tol)


def coeff_Bn_dbeta(spec, n: int, beta, bits: int = DEFAULT_BITS, tol: float = DEFAULT_TOL):
    """dB_n/dbeta = b_n + beta * db_n/dbeta."""
    cv = coeff_vector(spec, beta, [n], bits, tol, derivative=True)
    with working(bits):
        return cv.values[0] + to_mpfr(beta) * cv.dvalues[0]


# ---------------------------------------------------------------- Laplace


def laplace_Bn(spec: AFunctionSpec, n: int, beta, bits: int = DEFAULT_BITS):
    """Laplace-method estimate of B_n(beta) for weights of exponential order 1."""
    if spec.exp_order != 1.0:
        raise ValueError("Laplace estimate needs exponential order 1")
    with working(bits):
        a = spec.exp_type
        if a is None or a <= 0:
            raise ValueError("type a must be positive")
        n_ = mpmath.mpf(n)
        beta = to_mpf(to_mpfr(beta))
        eps = 2 / beta
        from .asymptotics import sublog

        lo, hi = 1 / to_mpf(sublog(n, bits)), 1 / mpmath.log(n_)
        if not (eps <= lo * (1 + mpmath.mpf("1e-9")) and eps > hi):
            warnings.warn(f"eps={float(eps):.4g} outside ({float(hi):.4g}, {float(lo):.4g}]",
                          RegimeWarning)
        ne = n_**eps
        # the prefactor 4 of the B_n integral is kept
        val = 4 * mpmath.sqrt(2 * mpmath.pi * a * eps * ne) / n_ * mpmath.exp(-a * ne - a * eps * ne)
        if spec.variant == "riemann_bessel_approx":
            val *= ne ** (mpmath.mpf(9) / 4)
        return to_mpfr(val)


# ---------------------------------------------------------------- remainder


def remainder0(spec: AFunctionSpec, n: int, beta, bits: int = DEFAULT_BITS,
               tol: float = DEFAULT_TOL):
    """R_n(0) = sum_{k>n} b_k = 4 int A_I q^{n+1} dv (the 1/y kernel in v)."""
    with working(bits):
        beta = to_mpfr(beta)
        upper = cutoff_v(spec, bits)
        f = _integrand(spec, beta, [n + 1], False, bits, tail=True)
        res = integrate(f, _grid(spec, beta, upper), tol, bits)
        return 4 * res.values[0]


def remainder(spec: AFunctionSpec, n: int, beta, t=0, bits: int = DEFAULT_BITS,
              tol: float = DEFAULT_TOL):
    """R_n(t, beta) = Xi(t) - Xi_n(t, beta)."""
    with working(bits):
        t = to_mpfr(t)
        if t == 0:
            return remainder0(spec, n, beta, bits, tol)
        from .approximant import build

        approx = build(spec, n, beta, bits=bits, tol=tol)
        return xi_exact(spec, t, bits) - approx.eval(t)


def lerch_phi_shift(z, s_pos, a, bits: int = DEFAULT_BITS):
    """sum_{k>=0} (k + a)^{s_pos} z^k for 0 <= z < 1, s_pos >= 0.

    Direct summation when z is not close to 1, Euler-Maclaurin on the tail otherwise.
    """
    with working(bits):
        z, s_pos = to_mpfr(z), to_mpfr(s_pos)
        if s_pos == 0:
            return 1 / (1 - z)
        if -gmpy2.log(z) >= mpfr("0.05"):
            acc, k = mpfr(0), 0
            zk = mpfr(1)
            stop = mpfr("1e-35")
            while True:
                term = mpfr(k + a) ** s_pos * zk
                acc += term
                if term < stop * acc and k > 5:
                    return acc
                k += 1
                zk *= z
        return to_mpfr(_lerch_em(to_mpf(z), to_mpf(s_pos), mpmath.mpf(a)))


def _lerch_em(z, sigma, a, shift=40, max_terms=40):
    """Euler-Maclaurin for sum (k+a)^sigma z^k with z near 1.

    The first terms are summed until k + a >= ``shift``; the tail integral is an
    upper incomplete gamma, the derivative corrections shrink like (2 pi (K+a))^{-2j}.
    """
    L = -mpmath.log(z)
    K = max(0, int(mpmath.ceil(shift - a)))
    head = mpmath.fsum((k + a) ** sigma * z**k for k in range(K))
    x0 = K + a
    zK = z**K
    tail = mpmath.exp(L * a) * L ** (-sigma - 1) * mpmath.gammainc(sigma + 1, L * x0)
    tail += x0**sigma * zK / 2
    # falling factorials of sigma times x0^{sigma-i}
    g = [x0**sigma]
    for i in range(1, 2 * max_terms):
        g.append(g[-1] * (sigma - i + 1) / x0)
    eps = mpmath.eps * abs(tail + head)
    for j in range(1, max_terms + 1):
        m = 2 * j - 1
        d = mpmath.fsum(mpmath.binomial(m, i) * g[i] * (-L) ** (m - i) for i in range(m + 1))
        corr = mpmath.bernoulli(2 * j) / mpmath.factorial(2 * j) * d * zK
        tail -= corr
        if abs(corr) < eps:
            return head + tail
    raise RuntimeError("Euler-Maclaurin tail did not converge")


def remainder_bound(spec: AFunctionSpec, n: int, beta, M=0, C1=None,
                    bits: int = DEFAULT_BITS, tol: float = 1e-20):
    """Upper bound for |R_n(t)| on |Im t| <= M.

    C1 bounds |P_k(it/beta)| / k^{M/beta}. For real t (M = 0) pass
    ``real_axis_C1(t, beta)``; with M > 0 it has to be supplied.
    """
    with working(bits):
        beta = to_mpfr(beta)
        if C1 is None:
            if M != 0:
                raise ValueError("C1 required for M > 0")
            C1 = mpfr(1)
        C1 = to_mpfr(C1)
        if M == 0:
            return C1 * remainder0(spec, n, beta, bits, tol)
        s = to_mpfr(M) / beta
        upper = cutoff_v(spec, bits)

        def f(nodes):
            out = np.empty((len(nodes), 1), dtype=object)
            for i, v in enumerate(nodes):
                e = gmpy2.exp(-beta * v)
                q = -gmpy2.expm1(-beta * v)
                phi = lerch_phi_shift(q, s, n + 1, bits)
                out[i, 0] = ai_v(spec, v, bits) * e * q ** (n + 1) * phi
            return out

        res = integrate(f, _grid(spec, beta, upper), tol, bits)
        return 4 * C1 * res.values[0]


def real_axis_C1(t, beta, bits: int = DEFAULT_BITS):
    """sup_k |P_k(it/beta)| = sqrt(sinh(pi s)/(pi s)), s = t/beta."""
    with working(bits):
        s = abs(to_mpf(t) / to_mpf(beta))
        if s == 0:
            return mpfr(1)
        return to_mpfr(mpmath.sqrt(mpmath.sinh(mpmath.pi * s) / (mpmath.pi * s)))


def tail_slope(spec: AFunctionSpec, beta, ks: Sequence[int], bits: int = 128):
    """Least-squares slope of log b_k against log k."""
    cv = coeff_vector(spec, beta, ks, bits, tol=1e-20)
    x = np.log(np.array(ks, dtype=float))
    y = np.array([float(gmpy2.log(v)) for v in cv.values])
    return float(np.polyfit(x, y, 1)[0])
