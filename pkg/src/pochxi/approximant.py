"""Polynomial approximants Xi_n(t, beta) = sum_{k<=n} b_k(beta) P_k^+(t/beta).

The dense form is a polynomial in u = t^2 of degree floor(n/2). Its
coefficients are accumulated from the exact Pochhammer rows at twice the
working precision, then rounded; the beta-derivative polynomial is carried
alongside so the double-root Newton system needs no finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from ._mp import DEFAULT_BITS, to_mpfr, working
from .afamily import AFunctionSpec, eval_AI
from .coefficients import DEFAULT_TOL, CoeffVector, coeff_vector
from .pochhammer import EvenPolynomial, eval_pair, eval_pairs_dt, plus_matrix

N_MIN = 4


@dataclass(frozen=True)
class XiApproximant:
    spec: AFunctionSpec
    n: int
    beta: object
    coeffs: CoeffVector
    poly_u: EvenPolynomial
    dpoly_u: Optional[EvenPolynomial]  # d/dbeta of the u-coefficients
    bits: int

    # -- evaluation ---------------------------------------------------------
    def _horner(self, cs, u, order: int):
        """p(u), p'(u), p''(u) up to ``order``."""
        p = dp = ddp = 0
        for c in reversed(cs):
            if order >= 2:
                ddp = ddp * u + 2 * dp
            if order >= 1:
                dp = dp * u + p
            p = p * u + c
        return p, dp, ddp

    def _arg(self, t):
        if isinstance(t, (type(mpfr(0)), type(mpc(0)))):
            return t
        if isinstance(t, complex):
            return mpc(t)
        return to_mpfr(t)

    def eval(self, t):
        with working(self.bits):
            t = self._arg(t)
            return self._horner(self.poly_u.coeffs, t * t, 0)[0]

    def eval_dt(self, t):
        with working(self.bits):
            t = self._arg(t)
            _, dp, _ = self._horner(self.poly_u.coeffs, t * t, 1)
            return 2 * t * dp

    def eval_dtt(self, t):
        with working(self.bits):
            t = self._arg(t)
            u = t * t
            _, dp, ddp = self._horner(self.poly_u.coeffs, u, 2)
            return 2 * dp + 4 * u * ddp

    def eval_all(self, t):
        """(Xi, Xi', Xi'') at t in one pass."""
        with working(self.bits):
            t = self._arg(t)
            u = t * t
            p, dp, ddp = self._horner(self.poly_u.coeffs, u, 2)
            return p, 2 * t * dp, 2 * dp + 4 * u * ddp

    def eval_dbeta(self, t):
        self._need_d()
        with working(self.bits):
            t = self._arg(t)
            return self._horner(self.dpoly_u.coeffs, t * t, 0)[0]

    def eval_dbeta_dt(self, t):
        """d^2 Xi_n / (dbeta dt)."""
        self._need_d()
        with working(self.bits):
            t = self._arg(t)
            _, dp, _ = self._horner(self.dpoly_u.coeffs, t * t, 1)
            return 2 * t * dp

    def _need_d(self):
        if self.dpoly_u is None:
            raise ValueError("approximant built without beta-derivative")

    def term_sum(self, t):
        """Direct sum_k b_k P_k^+(t/beta) by recursion (oracle for the dense form)."""
        with working(self.bits):
            s = to_mpfr(t) / self.beta
            rows = eval_pairs_dt(self.n, s, self.bits)
            return sum((b * r[0] for b, r in zip(self.coeffs.values, rows)), mpfr(0))

    def term_sum_dbeta(self, t):
        """sum_k [b'_k P_k^+(t/beta) - b_k (t/beta^2) P_k^+'(t/beta)]."""
        with working(self.bits):
            t = to_mpfr(t)
            s = t / self.beta
            rows = eval_pairs_dt(self.n, s, self.bits)
            acc = mpfr(0)
            for b, db, r in zip(self.coeffs.values, self.coeffs.dvalues, rows):
                acc += db * r[0] - b * t / (self.beta * self.beta) * r[2]
            return acc

    @property
    def degree(self) -> int:
        return self.poly_u.degree

    def to_rows(self):
        return list(enumerate(self.poly_u.coeffs))


def build(
    spec: AFunctionSpec,
    n: int,
    beta,
    bits: int = DEFAULT_BITS,
    tol: float = DEFAULT_TOL,
    derivative: bool = True,
    coeffs: Optional[CoeffVector] = None,
) -> XiApproximant:
    if n < N_MIN:
        raise ValueError(f"n must be >= {N_MIN}")
    if coeffs is None:
        coeffs = coeff_vector(spec, beta, range(n + 1), bits, tol, derivative=derivative)
    with working(bits):
        beta = to_mpfr(beta)
    hi = 2 * bits
    C = plus_matrix(n, hi)
    m = n // 2 + 1
    with working(hi):
        b = np.array([mpfr(v) for v in coeffs.values], dtype=object)
        a = np.dot(b, C)
        bh = mpfr(beta)
        inv = 1 / (bh * bh)
        scale = [mpfr(1)]
        for _ in range(1, m):
            scale.append(scale[-1] * inv)
        cu = [a[j] * scale[j] for j in range(m)]
        dcu = None
        if derivative and coeffs.dvalues is not None:
            db = np.array([mpfr(v) for v in coeffs.dvalues], dtype=object)
            da = np.dot(db, C)
            dcu = [(da[j] - 2 * j * a[j] / bh) * scale[j] for j in range(m)]
    with working(bits):
        poly = EvenPolynomial(tuple(mpfr(c) for c in cu), "even")
        dpoly = EvenPolynomial(tuple(mpfr(c) for c in dcu), "even") if dcu else None
    return XiApproximant(spec, n, beta, coeffs, poly, dpoly, bits)


def large_beta_residual(spec: AFunctionSpec, n: int, beta, t, bits: int = DEFAULT_BITS):
    """Relative distance between Xi_n and its beta -> infinity form -4 A_I(1) P_{n+1}^-(t/beta)/t."""
    approx = build(spec, n, beta, bits=bits, derivative=False)
    with working(bits):
        beta = to_mpfr(beta)
        t = to_mpfr(t)
        a1 = eval_AI(spec, 1, bits)
        val = approx.eval(t)
        if t == 0:
            # P_{n+1}^-(s)/s -> -H_{n+1}, so the limit is 4 A_I(1) H_{n+1} / beta
            h = sum((mpfr(1) / j for j in range(1, n + 2)), mpfr(0))
            lim = 4 * a1 * h / beta
        else:
            lim = -4 * a1 * eval_pair(n + 1, t / beta, bits).minus / t
        return abs(val - lim) / abs(val)
