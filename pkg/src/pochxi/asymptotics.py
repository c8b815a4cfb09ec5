"""Asymptotic toolbox: Lambert W and sublog, growth-law fits of beta traces,
the transcendental u-equation with its jump predictor, and closed large-t
forms for the exponential reference weights."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpfr
from scipy import optimize

from ._mp import DEFAULT_BITS, to_mpf, to_mpfr, working
from .afamily import DomainError

MODELS = ("log_power", "pure_log", "sublog", "sublogxl")


# ---------------------------------------------------------------- Lambert W


def lambert_w(x, bits: int = DEFAULT_BITS):
    """Principal branch W0(x) for x >= -1/e by Halley iteration."""
    with working(bits + 16):
        x = to_mpfr(x) if not isinstance(x, type(mpfr(0))) else mpfr(x)
        e = gmpy2.exp(mpfr(1))
        branch = x * e + 1
        if branch < 0:
            raise DomainError("lambert_w needs x >= -1/e")
        if x == 0:
            return mpfr(0)
        if branch == 0:
            return mpfr(-1)
        if branch < mpfr("0.25"):
            p = gmpy2.sqrt(2 * branch)
            w = -1 + p - p * p / 3 + 11 * p**3 / 72
        elif x < 3:
            w = gmpy2.log1p(x) * mpfr("0.7")
        else:
            l1 = gmpy2.log(x)
            l2 = gmpy2.log(l1)
            w = l1 - l2 + l2 / l1
        eps = gmpy2.mul_2exp(mpfr(1), 4 - bits)
        for _ in range(200):
            ew = gmpy2.exp(w)
            f = w * ew - x
            wp1 = w + 1
            if wp1 == 0:
                break
            dw = f / (ew * wp1 - (w + 2) * f / (2 * wp1))
            w -= dw
            if abs(dw) <= eps * max(abs(w), mpfr(1)):
                break
    with working(bits):
        return +w


def _sublog_of_log(L, bits: int):
    """sublog(n) given L = log(n) > 0."""
    with working(bits + 16):
        L = to_mpfr(L) if not isinstance(L, type(mpfr(0))) else L
        if L <= 0:
            raise DomainError("sublog needs n > 1")
        w = lambert_w(L, bits + 16)
        out = L / w
    with working(bits):
        return +out


def sublog(n, bits: int = DEFAULT_BITS):
    """The x > 1 with x^x = n, i.e. log(n)/W(log(n))."""
    with working(bits + 16):
        n = to_mpfr(n) if not isinstance(n, type(mpfr(0))) else n
        if n <= 1:
            raise DomainError("sublog needs n > 1")
        L = gmpy2.log(n)
    return _sublog_of_log(L, bits)


def sublog_r(n, r, bits: int = DEFAULT_BITS):
    """r * sublog(n^{1/r}); solves log n = s log(s/r)."""
    with working(bits + 16):
        n, r = to_mpfr(n), to_mpfr(r)
        if r <= 0:
            raise DomainError("r must be positive")
        if n <= 1:
            raise DomainError("sublog needs n > 1")
        L = gmpy2.log(n) / r
    s = _sublog_of_log(L, bits)
    with working(bits):
        return r * s


# ---------------------------------------------------------------- fits


@dataclass(frozen=True)
class FitResult:
    model: str
    params: Dict[str, float]
    r2: float
    n_range: Tuple[int, int]
    npoints: int

    def predict(self, n, a: float = 1.0):
        return _MODEL_EVAL[self.model](np.asarray(n, dtype=float), self.params, a)

    def csv_lines(self):
        keys = sorted(self.params)
        head = ["model", *keys, "r2", "n_lo", "n_hi"]
        row = [self.model, *(repr(self.params[k]) for k in keys), repr(self.r2),
               str(self.n_range[0]), str(self.n_range[1])]
        return [",".join(head), ",".join(row)]


def _r2(y, yhat) -> float:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else -math.inf)


def _linear(X, y):
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError("singular normal equations")
    return coef


def _eval_log_power(n, p, a):
    return p["A"] * np.log(n + 1) ** p["c"] + p["D"]


def _eval_pure_log(n, p, a):
    return p["A"] * np.log(n / p["n0"])


def _sublog_f(n):
    return np.array([float(sublog(int(round(k)) if float(k).is_integer() else k, 64))
                     for k in np.atleast_1d(n)])


def _eval_sublog(n, p, a):
    return 2 * p["b"] * _sublog_f(n) + p["D"]


def _sublogxl_beta(n: float, sigma: float, mu: float, q: float, a: float) -> float:
    """beta solving log n = (beta/2)(log(sigma/(2ae) L) + q/(sigma L)), L = log(beta/mu)."""
    if not (sigma > 0 and 0 < mu < 1e300):
        return float("nan")
    target = math.log(n)
    c0 = sigma / (2 * a * math.e)

    def g(beta):
        L = math.log(beta / mu)
        return beta / 2 * (math.log(c0 * L) + q / (sigma * L)) - target

    # the right side is increasing once L is large enough; scan for a bracket
    try:
        lo = mu * math.exp(max(1.0, 1.0 / c0) * 1.0001)
        if g(lo) > 0:
            return float("nan")
        hi = lo * 2
        while g(hi) < 0:
            hi *= 2
            if hi > 1e12:
                return float("nan")
    except (OverflowError, ValueError):
        return float("nan")
    return optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-14)


def _eval_sublogxl(n, p, a):
    return np.array([_sublogxl_beta(float(k), p["sigma"], p["mu"], p["q"], a)
                     for k in np.atleast_1d(n)])


_MODEL_EVAL = {
    "log_power": _eval_log_power,
    "pure_log": _eval_pure_log,
    "sublog": _eval_sublog,
    "sublogxl": _eval_sublogxl,
}


def _fit_log_power(n, y):
    x = np.log(n + 1)

    def inner(c):
        X = np.column_stack([x**c, np.ones_like(x)])
        coef = _linear(X, y)
        return coef, float(np.sum((X @ coef - y) ** 2))

    # variable projection: (A, D) are linear once c is fixed
    cs = np.linspace(0.05, 3.0, 60)
    errs = [inner(c)[1] for c in cs]
    i = int(np.argmin(errs))
    lo, hi = cs[max(i - 1, 0)], cs[min(i + 1, len(cs) - 1)]
    res = optimize.minimize_scalar(lambda c: inner(c)[1], bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    c = float(res.x)
    (A, D), _ = inner(c)
    return {"A": float(A), "c": c, "D": float(D)}


def _fit_pure_log(n, y):
    A, B = _linear(np.column_stack([np.log(n), np.ones_like(n)]), y)
    return {"A": float(A), "n0": float(math.exp(-B / A))}


def _fit_sublog(n, y):
    b2, D = _linear(np.column_stack([_sublog_f(n), np.ones_like(n)]), y)
    return {"b": float(b2 / 2), "D": float(D)}


def _fit_sublogxl(n, y, a):
    s0, m0, q0 = constants_s_m()

    def resid(p):
        sigma, logmu, q = p
        mu = math.exp(min(logmu, 600.0))
        pred = _eval_sublogxl(n, {"sigma": sigma, "mu": mu, "q": q}, a)
        pred = np.where(np.isfinite(pred), pred, 1e6)
        return pred - y

    # the ansatz is stiff in (sigma, mu): seed LM from the best points of a coarse grid
    grid = [(float(s0), math.log(float(m0)), float(q0))]
    grid += [(sg, lm, qq) for sg in (0.3, 0.7, 1.5, 3.0, 6.0)
             for lm in (-10.0, -6.0, -3.0, -1.0, 0.5) for qq in (0.0, 3.0, 10.0, 20.0)]
    sub = slice(None, None, max(1, len(n) // 12))
    coarse = []
    for x0 in grid:
        pred = _eval_sublogxl(n[sub], {"sigma": x0[0], "mu": math.exp(x0[1]), "q": x0[2]}, a)
        if np.all(np.isfinite(pred)):
            coarse.append((float(np.sum((pred - y[sub]) ** 2)), x0))
    coarse.sort()
    starts = [x0 for _, x0 in coarse[:3]] or grid[:1]
    best = None
    for x0 in starts:
        res = optimize.least_squares(resid, x0, method="lm", xtol=1e-12, ftol=1e-12,
                                     max_nfev=2000)
        if best is None or res.cost < best.cost:
            best = res
    sigma, logmu, q = best.x
    return {"sigma": float(sigma), "mu": float(math.exp(logmu)), "q": float(q)}


def _trace_data(trace) -> Tuple[np.ndarray, np.ndarray]:
    if hasattr(trace, "good_rows"):
        rows = trace.good_rows()
        return (np.array([r.n for r in rows], dtype=float),
                np.array([float(r.beta) for r in rows]))
    ns, betas = trace
    return np.asarray(ns, dtype=float), np.asarray(betas, dtype=float)


def fit(trace, model: str = "log_power", n_range: Optional[Tuple[int, int]] = None,
        a: Optional[float] = None, subsample: Optional[slice] = None) -> FitResult:
    """Least-squares growth law for beta_n; ``trace`` is a BetaTrace or (ns, betas)."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    n, y = _trace_data(trace)
    if n_range is not None:
        keep = (n >= n_range[0]) & (n <= n_range[1])
        n, y = n[keep], y[keep]
    if subsample is not None:
        n, y = n[subsample], y[subsample]
    if len(n) < 10:
        raise ValueError(f"need at least 10 rows in the fit window, have {len(n)}")
    if a is None:
        spec = getattr(trace, "spec", None)
        a = float(spec.exp_type) if spec is not None and spec.exp_type else 1.0
    if model == "log_power":
        params = _fit_log_power(n, y)
    elif model == "pure_log":
        params = _fit_pure_log(n, y)
    elif model == "sublog":
        params = _fit_sublog(n, y)
    else:
        params = _fit_sublogxl(n, y, a)
    yhat = _MODEL_EVAL[model](n, params, a)
    return FitResult(model, params, _r2(y, yhat), (int(n.min()), int(n.max())), len(n))


def growth_class(c: float, threshold: float = 1.0) -> str:
    """'supra' for log-power exponents above ``threshold``, else 'sub'."""
    return "supra" if c > threshold else "sub"


def separation_margin(sub_cs: Sequence[float], supra_cs: Sequence[float]) -> float:
    return min(supra_cs) - max(sub_cs)


# ---------------------------------------------------------------- u-equation


@dataclass(frozen=True)
class AsymptoticSolution:
    u_star: float
    n0: float
    tau: float
    jump_ratio: float

    def jump_n(self, k: int) -> float:
        """Predicted n of the k-th t-jump."""
        u = self.u_star
        return self.n0 * math.exp(-(math.pi + self.tau) / u) * math.exp((0.5 + k) * math.pi / u)

    def jump_ns(self, kmax: int):
        return [self.jump_n(k) for k in range(1, kmax + 1)]


def _u_residual(u, tau):
    lg = mpmath.loggamma(1 - 1j * u)
    # Im loggamma is the continuous argument of Gamma(1 - iu)
    return u * mpmath.log(-lg.real) + lg.imag - tau - mpmath.pi


def solve_u_equation(tau: float, lo: float = 0.1, hi: float = 50.0,
                     bits: int = 128) -> AsymptoticSolution:
    if tau <= 0:
        raise DomainError("tau must be positive")
    with mpmath.workprec(bits):
        tau_m = mpmath.mpf(tau)
        grid = np.linspace(lo, hi, 500)
        vals = [_u_residual(mpmath.mpf(g), tau_m) for g in grid]
        bracket = None
        for i in range(len(grid) - 1):
            if vals[i] == 0 or vals[i] * vals[i + 1] < 0:
                bracket = (mpmath.mpf(grid[i]), mpmath.mpf(grid[i + 1]))
                break
        if bracket is None:
            raise DomainError(f"no root of the u-equation in ({lo}, {hi})")
        u = mpmath.findroot(lambda x: _u_residual(x, tau_m), bracket, solver="illinois")
        n0 = -mpmath.loggamma(1 - 1j * u).real
        return AsymptoticSolution(float(u), float(n0), float(tau), float(mpmath.exp(mpmath.pi / u)))


# ---------------------------------------------------------------- reference forms


def bessel_xi_asymptotic(a, t):
    """Large-t form of 2 K_{it/2}(2a)."""
    a, t = mpmath.mpf(a), mpmath.mpf(t)
    pi = mpmath.pi
    return 4 / mpmath.sqrt(pi * t) * mpmath.exp(-pi * t / 4) * mpmath.cos(
        t / 2 * mpmath.log(t / (2 * a * mpmath.e)) - pi / 4)


def bessel_zeros(a, k: int, bits: int = 128):
    """k-th zero of the large-t form: t/2 log(t/(2ae)) = (k - 1/4) pi."""
    if k < 1:
        raise ValueError("k starts at 1")
    with working(bits):
        a = mpmath.mpf(a)
        L = (k - mpmath.mpf(1) / 4) * mpmath.pi / (a * mpmath.e)
        return 2 * a * mpmath.e * to_mpf(_sublog_of_log(to_mpfr(L), bits))


def bessel_NT(a, T):
    a, T = mpmath.mpf(a), mpmath.mpf(T)
    return T / (2 * mpmath.pi) * mpmath.log(T / (2 * a * mpmath.e))


def incgamma_asymptotic(a, t):
    a, t = mpmath.mpf(a), mpmath.mpf(t)
    return 8 * a / (mpmath.exp(a) * t * t)


def constants_s_m():
    """(s, m, q) of the exponential-case beta ansatz."""
    pi, e = mpmath.pi, mpmath.e
    s = mpmath.mpf(1) / 2 / (pi / 4 - 1 / (2 * e))
    q = 21 * pi / 4
    m = 2 * pi**2 / e * mpmath.exp(-2 * q / e)
    return s, m, q


def riemann_bessel_asymptotic(t):
    t = mpmath.mpf(t)
    pi = mpmath.pi
    amp = mpmath.mpf(2) ** (-mpmath.mpf(5) / 4) * pi ** (mpmath.mpf(1) / 4)
    return amp * t ** (mpmath.mpf(7) / 4) * mpmath.exp(-pi * t / 4) * mpmath.cos(
        t / 2 * mpmath.log(t / (2 * pi * mpmath.e)) + 7 * pi / 8)


def riemann_bessel_NT(T):
    T = mpmath.mpf(T)
    return T / (2 * mpmath.pi) * mpmath.log(T / (2 * mpmath.pi * mpmath.e))


def riemann_bessel_zero_spacing(T):
    """pi over the phase derivative of the large-t form."""
    T = mpmath.mpf(T)
    return 2 * mpmath.pi / mpmath.log(T / (2 * mpmath.pi))
