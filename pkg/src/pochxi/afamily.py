"""The admissible weight family A_I(x) and reference Xi values.

Everything is evaluated in the log variable v with x = exp(2v), so that
Xi(t) = 4 * int_0^inf A_I(e^{2v}) cos(tv) dv. A spec carries an optional
``vscale`` (the power transform x -> x^{1/w}), applied as v -> v / vscale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpc, mpfr

from ._mp import DEFAULT_BITS, to_mpf, to_mpfr, working
from .quadrature import integrate

VARIANTS = (
    "riemann",
    "bessel",
    "incgamma",
    "step",
    "linear",
    "cosine",
    "tau",
    "dirichlet5",
    "riemann_bessel_approx",
)

_DEFAULTS: Dict[str, Dict[str, str]] = {
    "riemann": {"theta_terms": "0"},  # 0 -> automatic
    "bessel": {"a": "1"},
    "incgamma": {"a": "1"},
    "step": {"w": "1"},
    "linear": {"w": "1"},
    "cosine": {"w": "1"},
    "tau": {"k": "5"},
    "dirichlet5": {"k": "5"},
    "riemann_bessel_approx": {"terms": "1"},
}

_TAU_EXCLUDED = {1, 2, 3, 4, 6, 8, 12, 24}
_COMPACT = ("step", "linear", "cosine")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class AFunctionSpec:
    """Immutable description of one weight function.

    ``params`` holds decimal strings so that parameters such as a = 0.005 are
    read exactly at any working precision.
    """

    variant: str
    params: Tuple[Tuple[str, str], ...] = ()
    vscale: str = "1"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}")
        merged = dict(_DEFAULTS[self.variant])
        for key, val in self.params:
            if key not in merged:
                raise DomainError(f"{self.variant} has no parameter {key!r}")
            merged[key] = str(val)
        object.__setattr__(self, "params", tuple(sorted(merged.items())))
        object.__setattr__(self, "vscale", str(self.vscale))
        self._validate()

    def _validate(self):
        if mpmath.mpf(self.vscale) <= 0:
            raise DomainError("vscale must be positive")
        v = self.variant
        if v in ("bessel", "incgamma") and mpmath.mpf(self.param("a")) <= 0:
            raise DomainError("a must be positive")
        if v in _COMPACT and mpmath.mpf(self.param("w")) <= 0:
            raise DomainError("w must be positive")
        if v == "tau":
            k = int(self.param("k"))
            if k < 1 or k in _TAU_EXCLUDED:
                raise DomainError(f"tau weight not defined for k={k}")
        if v == "dirichlet5" and int(self.param("k")) < 4:
            raise DomainError("dirichlet5 needs k >= 4")
        if v == "riemann_bessel_approx" and int(self.param("terms")) < 1:
            raise DomainError("terms must be >= 1")
        if v == "riemann" and int(self.param("theta_terms")) < 0:
            raise DomainError("theta_terms must be >= 0")

    # ------------------------------------------------------------ metadata
    def param(self, name: str) -> str:
        return dict(self.params)[name]

    def mp(self, name: str):
        return mpfr(self.param(name))

    @property
    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        s = f"{self.variant}({inner})"
        return s if self.vscale == "1" else f"{s}^w={self.vscale}"

    @property
    def support_upper_v(self) -> Optional[mpmath.mpf]:
        """Right end of the support in v, or None for unbounded support."""
        if self.variant in _COMPACT:
            return mpmath.mpf(self.param("w")) * mpmath.mpf(self.vscale)
        return None

    @property
    def support_upper(self):
        """Right end of the support in x (mpmath inf when unbounded)."""
        v = self.support_upper_v
        return mpmath.inf if v is None else mpmath.exp(2 * v)

    @property
    def exp_order(self) -> Optional[float]:
        return {
            "riemann": 1.0,
            "bessel": 1.0,
            "incgamma": 1.0,
            "tau": 0.5,
            "dirichlet5": 2.0,
            "riemann_bessel_approx": 1.0,
        }.get(self.variant)

    @property
    def exp_type(self):
        """Type a of the decay exp(-a x^order), for the unscaled weight."""
        v = self.variant
        if v in ("bessel", "incgamma"):
            return mpmath.mpf(self.param("a"))
        if v in ("riemann", "riemann_bessel_approx"):
            return +mpmath.pi
        if v == "tau":
            return int(self.param("k")) * mpmath.pi / 12
        if v == "dirichlet5":
            return mpmath.pi / 5
        return None

    @property
    def has_closed_xi(self) -> bool:
        return self.variant in _COMPACT + ("bessel", "incgamma", "riemann_bessel_approx")

    @property
    def inversion_symmetric(self) -> bool:
        return self.variant in ("riemann", "bessel", "tau", "riemann_bessel_approx")


def make_spec(variant: str, vscale="1", **params) -> AFunctionSpec:
    return AFunctionSpec(variant, tuple((k, str(v)) for k, v in params.items()), str(vscale))


def riemann(theta_terms: int = 0) -> AFunctionSpec:
    return make_spec("riemann", theta_terms=theta_terms)


def bessel(a="1") -> AFunctionSpec:
    return make_spec("bessel", a=a)


def incgamma(a="1") -> AFunctionSpec:
    return make_spec("incgamma", a=a)


def step(w="1") -> AFunctionSpec:
    return make_spec("step", w=w)


def linear(w="1") -> AFunctionSpec:
    return make_spec("linear", w=w)


def cosine(w="1") -> AFunctionSpec:
    return make_spec("cosine", w=w)


def tau(k: int = 5) -> AFunctionSpec:
    return make_spec("tau", k=k)


def dirichlet5(k: int = 5) -> AFunctionSpec:
    return make_spec("dirichlet5", k=k)


def riemann_bessel_approx(terms: int = 1) -> AFunctionSpec:
    return make_spec("riemann_bessel_approx", terms=terms)


def parse_spec(text: str) -> AFunctionSpec:
    """Parse ``variant`` or ``variant(key=value,...)``; ``^w=...`` sets vscale."""
    text = text.strip()
    vscale = "1"
    if "^w=" in text:
        text, vscale = text.split("^w=", 1)
    if "(" in text:
        if not text.endswith(")"):
            raise DomainError(f"malformed spec {text!r}")
        name, inner = text[:-1].split("(", 1)
        items = [p for p in inner.split(",") if p.strip()]
        params = {}
        for p in items:
            if "=" not in p:
                raise DomainError(f"malformed parameter {p!r}")
            k, v = p.split("=", 1)
            params[k.strip()] = v.strip()
    else:
        name, params = text, {}
    return make_spec(name.strip(), vscale=vscale.strip(), **params)


def spec_record(spec: AFunctionSpec) -> Dict[str, str]:
    """Flat key/value record used by config files and checkpoints."""
    rec = {"variant": spec.variant, "vscale": spec.vscale}
    rec.update(dict(spec.params))
    return rec


def spec_from_record(rec: Dict[str, str]) -> AFunctionSpec:
    rec = dict(rec)
    variant = rec.pop("variant")
    vscale = rec.pop("vscale", "1")
    return make_spec(variant, vscale=vscale, **rec)


# ---------------------------------------------------------------- evaluators


def _stop(bits: int):
    """Relative size below which series terms are dropped."""
    return min(mpfr("1e-40"), mpfr(2) ** (-bits - 8))


def _theta_cap(x) -> int:
    return math.ceil(math.sqrt(40 / (math.pi * float(x)))) + 3


def _riemann_x(x, cap: int, bits: int):
    pi = gmpy2.const_pi()
    x54 = x * gmpy2.sqrt(gmpy2.sqrt(x))
    acc = mpfr(0)
    stop = _stop(bits)
    for n in range(1, cap + 1):
        n2 = n * n
        term = (2 * n2 * n2 * pi * pi * x - 3 * n2 * pi) * gmpy2.exp(-n2 * pi * x)
        acc += term
        nxt = (n + 1) ** 2
        if abs(2 * nxt * nxt * pi * pi * x * gmpy2.exp(-nxt * pi * x)) < stop * abs(acc):
            break
    return x54 * acc


def _tau_x(x, k: int, bits: int):
    pi = gmpy2.const_pi()
    sx = gmpy2.sqrt(x)
    log_eta = -pi * sx / 12
    stop = _stop(bits)
    n = 1
    while True:
        q = gmpy2.exp(-2 * pi * n * sx)
        if q < stop:
            break
        log_eta += gmpy2.log1p(-q)
        n += 1
    return gmpy2.exp(k * (gmpy2.log(x) / 8 + log_eta))


_CHI5 = (0, 1, -1, -1, 1)


def _dirichlet5_x(x, k: int, bits: int):
    pi = gmpy2.const_pi()
    x2 = x * x
    acc = mpfr(0)
    stop = _stop(bits)
    n = 1
    while True:
        n2x2 = n * n * x2
        e1 = gmpy2.exp(-pi * n2x2)
        e2 = gmpy2.exp(-pi * n2x2 / 5)
        t1 = (4 * pi * pi * n2x2 * n2x2 - 6 * pi * n2x2) * e1
        t2 = (4 * pi * pi * n2x2 * n2x2 / 25 - 6 * pi * n2x2 / 5) * e2
        term = k * t1 - _CHI5[n % 5] * t2
        acc += term
        bound = (4 * pi * pi * n2x2 * n2x2 + 8) * (k + 1) * e2
        if n > 1 and bound < stop * abs(acc):
            break
        n += 1
    return acc


def _rba_x(x, terms: int):
    pi = gmpy2.const_pi()
    xp = x ** mpfr("2.25")
    s = xp + 1 / xp
    c = x + 1 / x
    acc = mpfr(0)
    for kk in range(1, terms + 1):
        acc += kk**4 * gmpy2.exp(-pi * kk * kk * c)
    return pi * pi / 2 * s * acc


def ai_v(spec: AFunctionSpec, v, bits: int = DEFAULT_BITS):
    """A_I(e^{2v}) for v >= 0, at the caller's working precision."""
    if spec.vscale != "1":
        v = v / mpfr(spec.vscale)
    var = spec.variant
    if var in _COMPACT:
        w = spec.mp("w")
        if v > w:
            return mpfr(0)
        if var == "step":
            return mpfr(1)
        if var == "linear":
            return 1 - v / w
        return gmpy2.cos(gmpy2.const_pi() * v / (2 * w))
    if var == "bessel":
        return gmpy2.exp(-2 * spec.mp("a") * gmpy2.cosh(2 * v))
    x = gmpy2.exp(2 * v)
    if var == "incgamma":
        return gmpy2.exp(-spec.mp("a") * x)
    if var == "riemann":
        cap = int(spec.param("theta_terms")) or _theta_cap(x)
        return _riemann_x(x, cap, bits)
    if var == "tau":
        return _tau_x(x, int(spec.param("k")), bits)
    if var == "dirichlet5":
        return _dirichlet5_x(x, int(spec.param("k")), bits)
    return _rba_x(x, int(spec.param("terms")))


def eval_AI(spec: AFunctionSpec, x, bits: int = DEFAULT_BITS):
    """A_I(x) for x >= 1."""
    with working(bits):
        x = to_mpfr(x)
        if x < 1:
            raise DomainError("eval_AI is defined for x >= 1")
        return ai_v(spec, gmpy2.log(x) / 2, bits)


def eval_AI_of_y(spec: AFunctionSpec, y, beta, bits: int = DEFAULT_BITS):
    """A_I(y^{-2/beta}) for 0 < y <= 1, via v = -log(y)/beta."""
    with working(bits):
        y, beta = to_mpfr(y), to_mpfr(beta)
        if not (0 < y <= 1) or beta <= 0:
            raise DomainError("need 0 < y <= 1 and beta > 0")
        v = -gmpy2.log(y) / beta
        up = spec.support_upper_v
        if up is not None and v > to_mpfr(up):
            return mpfr(0)
        return ai_v(spec, v, bits)


# ---------------------------------------------------------------- cutoffs


@lru_cache(maxsize=256)
def cutoff_v(spec: AFunctionSpec, bits: int) -> mpfr:
    """Point beyond which |A_I| stays below 2^{-bits-40} * A_I(1)."""
    with working(bits):
        up = spec.support_upper_v
        if up is not None:
            return to_mpfr(up)
        ref = abs(ai_v(spec, mpfr(0), bits))
        thresh = ref * mpfr(2) ** (-bits - 40)
        v = mpfr("0.5")
        below = 0
        while below < 2:
            if abs(ai_v(spec, v, bits)) < thresh:
                below += 1
            else:
                below = 0
            v = v * mpfr("1.125")
            if v > 60:
                raise RuntimeError(f"no decay found for {spec.label}")
        return v


def breakpoints(spec: AFunctionSpec, upper, width="0.25") -> List[mpfr]:
    """Uniform grid of panel edges on [0, upper] plus the support edge."""
    upper = mpfr(upper)
    width = mpfr(width)
    count = max(1, int(gmpy2.ceil(upper / width)))
    pts = [upper * i / count for i in range(count + 1)]
    return pts


# ---------------------------------------------------------------- Xi values


def _closed_xi(spec: AFunctionSpec, t):
    """Closed forms, mpmath arithmetic; ``t`` already divided-through by vscale."""
    var = spec.variant
    if var in _COMPACT:
        w = mpmath.mpf(spec.param("w"))
        if var == "step":
            return 4 * w if t == 0 else 4 * mpmath.sin(w * t) / t
        if var == "linear":
            if t == 0:
                return 2 * w
            return 8 * mpmath.sin(w * t / 2) ** 2 / (w * t * t)
        # cosine: 4 int_0^w cos(pi v/(2w)) cos(tv) dv
        c = mpmath.pi / (2 * w)
        if abs(t * t - c * c) < mpmath.mpf(2) ** (-mpmath.mp.prec // 2):
            return 2 * w  # removable point t = pi/(2w)
        return 4 * c * mpmath.cos(w * t) / (c * c - t * t)
    if var == "bessel":
        a = mpmath.mpf(spec.param("a"))
        return 2 * mpmath.besselk(1j * t / 2, 2 * a).real if not isinstance(t, mpmath.mpc) else (
            mpmath.besselk(1j * t / 2, 2 * a) + mpmath.besselk(-1j * t / 2, 2 * a)
        )
    if var == "incgamma":
        a = mpmath.mpf(spec.param("a"))
        if t == 0:
            return 2 * mpmath.e1(a)
        z1 = a ** (-1j * t / 2) * mpmath.gammainc(1j * t / 2, a)
        if isinstance(t, mpmath.mpc):
            z2 = a ** (1j * t / 2) * mpmath.gammainc(-1j * t / 2, a)
            return z1 + z2
        return 2 * z1.real
    if var == "riemann_bessel_approx":
        pi = mpmath.pi
        nu = mpmath.mpf(9) / 4
        acc = 0
        for kk in range(1, int(spec.param("terms")) + 1):
            z = 2 * pi * kk * kk
            acc += kk**4 * (mpmath.besselk(nu + 1j * t / 2, z) + mpmath.besselk(nu - 1j * t / 2, z))
        return pi * pi * (acc.real if not isinstance(t, mpmath.mpc) else acc)
    raise DomainError(f"no closed form for {var}")


def xi_quad(spec: AFunctionSpec, ts: Sequence, bits: int = DEFAULT_BITS, tol: float = 1e-35):
    """Xi at several points by quadrature of 4 int A_I(e^{2v}) cos(tv) dv."""
    with working(bits):
        tv = [_as_gmp(t) for t in ts]
        upper = cutoff_v(spec, bits)
        tmax = max([abs(t) for t in tv] + [mpfr(1)])
        width = min(mpfr(1), 2 * gmpy2.const_pi() / tmax) / 4
        pts = breakpoints(spec, upper, width)

        def f(nodes):
            a = np.array([ai_v(spec, v, bits) for v in nodes], dtype=object)
            out = np.empty((len(nodes), len(tv)), dtype=object)
            for j, t in enumerate(tv):
                out[:, j] = a * np.array([_cos(t * v) for v in nodes], dtype=object)
            return out

        res = integrate(f, pts, tol, bits, abs_floor=mpfr(2) ** (-bits))
        return [4 * v for v in res.values], res.rel_err


def _cos(z):
    return gmpy2.cos(z)


def _as_gmp(t):
    """Real or complex input of any flavour -> mpfr or mpc."""
    if isinstance(t, (mpmath.mpf, mpmath.mpc)):
        return to_mpfr(t)
    if isinstance(t, complex):
        return mpc(t) if t.imag else mpfr(t.real)
    return to_mpfr(t)


def xi_exact(spec: AFunctionSpec, t, bits: int = DEFAULT_BITS, method: str = "auto"):
    """Reference Xi(t) for real or complex t; closed form when available."""
    if method not in ("auto", "closed", "quad"):
        raise ValueError(method)
    with working(bits):
        tm = to_mpf(t) if not isinstance(t, (int, float, complex)) else mpmath.mpmathify(t)
        if abs(mpmath.im(tm)) > 10:
            raise DomainError("|Im t| must be <= 10")
        use_closed = spec.has_closed_xi and method != "quad"
        if method == "closed" and not spec.has_closed_xi:
            raise DomainError(f"no closed form for {spec.variant}")
        if use_closed:
            s = mpmath.mpf(spec.vscale)
            if isinstance(tm, mpmath.mpc) and tm.imag == 0:
                tm = tm.real
            val = s * _closed_xi(spec, s * tm)
            return to_mpfr(val)
        vals, _ = xi_quad(spec, [to_mpfr(tm)], bits)
        v = vals[0]
        if isinstance(v, type(mpc(0))) and v.imag == 0:
            return v.real
        return v


def power_transform(spec: AFunctionSpec, w) -> AFunctionSpec:
    """Spec with A(x) -> A(x^{1/w}), so that Xi_new(t) = w Xi_old(w t)."""
    w = mpmath.mpf(str(w))
    if w <= 0:
        raise DomainError("w must be positive")
    if spec.variant in _COMPACT:
        # fold into the support parameter so the closed form stays exact
        neww = mpmath.mpf(spec.param("w")) * w
        params = dict(spec.params)
        params["w"] = _dec(neww)
        return make_spec(spec.variant, vscale=spec.vscale, **params)
    return replace(spec, vscale=_dec(mpmath.mpf(spec.vscale) * w))


def _dec(x) -> str:
    s = mpmath.nstr(x, 40, strip_zeros=True)
    return s[:-2] if s.endswith(".0") else s


# ---------------------------------------------------------------- references


@dataclass(frozen=True)
class XiReference:
    spec: AFunctionSpec
    known_zeros: Tuple = ()
    asymptotic_form: Optional[str] = None

    def __post_init__(self):
        z = list(self.known_zeros)
        if any(b <= a for a, b in zip(z, z[1:])):
            raise ValueError("known_zeros must be strictly increasing")


def sign_changes(spec: AFunctionSpec, t_lo, t_hi, steps: int, bits: int = 128) -> List[Tuple]:
    """Brackets (t_i, t_{i+1}) where Xi changes sign on a uniform grid."""
    with working(bits):
        lo, hi = to_mpfr(t_lo), to_mpfr(t_hi)
        grid = [lo + (hi - lo) * i / steps for i in range(steps + 1)]
        if spec.has_closed_xi:
            vals = [xi_exact(spec, g, bits) for g in grid]
        else:
            vals, _ = xi_quad(spec, grid, bits, tol=1e-20)
            vals = [v.real if isinstance(v, type(mpc(0))) else v for v in vals]
    out = []
    for i in range(steps):
        if vals[i] == 0 or (vals[i] > 0) != (vals[i + 1] > 0):
            out.append((grid[i], grid[i + 1]))
    return out


def first_zero(spec: AFunctionSpec, t_lo, t_hi, steps: int = 200, bits: int = 128):
    """Bisected first zero of Xi in (t_lo, t_hi], or None."""
    br = sign_changes(spec, t_lo, t_hi, steps, bits)
    if not br:
        return None
    a, b = br[0]
    with working(bits):
        fa = xi_exact(spec, a, bits)
        for _ in range(60):
            m = (a + b) / 2
            fm = xi_exact(spec, m, bits)
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
        return (a + b) / 2
