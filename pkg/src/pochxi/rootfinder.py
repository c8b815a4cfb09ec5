"""Certified root classification for even polynomials in u = t^2.

Coefficients (mpfr or Fraction) are converted exactly to an integer
polynomial after a power-of-two rescaling u = 2^s x that balances their
exponents. Two independent exact counts exist:

* a Sturm chain on gmpy2 integers (primitive pseudo-remainder sequence),
* rigorous ball-arithmetic isolation from FLINT (``fmpz_poly.complex_roots``).

The isolation also supplies locations, which are then polished by Newton at
working precision. Up to ``STURM_MAX_DEGREE`` both counts are computed and
must agree; beyond it the Sturm chain costs seconds per call and the FLINT
count is used alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import flint
import gmpy2
from gmpy2 import mpc, mpfr, mpz

from ._mp import DEFAULT_BITS, mpfr_to_fraction, to_mpfr, working
from .afamily import AFunctionSpec
from .approximant import XiApproximant, build
from .coefficients import DEFAULT_TOL
from .pochhammer import EvenPolynomial

COALESCE_REL = mpfr("1e-8")
STURM_MAX_DEGREE = 50


class CertificationError(RuntimeError):
    pass


class BracketError(ValueError):
    pass


# ---------------------------------------------------------------- exact Sturm


def integer_coeffs(coeffs: Sequence) -> List[mpz]:
    """Ascending exact coefficients scaled to coprime integers."""
    fr = [c if isinstance(c, Fraction) else
          (Fraction(int(c)) if isinstance(c, (int, type(mpz(0)))) else mpfr_to_fraction(c))
          for c in coeffs]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    ints = [mpz(f.numerator * (den // f.denominator)) for f in fr]
    g = mpz(0)
    for v in ints:
        g = gmpy2.gcd(g, v)
    if g > 1:
        ints = [v // g for v in ints]
    while len(ints) > 1 and ints[-1] == 0:
        ints.pop()
    return ints


def _primitive(p: List[mpz]) -> List[mpz]:
    g = mpz(0)
    for v in p:
        g = gmpy2.gcd(g, v)
        if g == 1:
            return p
    return [v // g for v in p] if g > 1 else p


def _prem(a: List[mpz], b: List[mpz]) -> List[mpz]:
    """Pseudo-remainder lc(b)^{da-db+1} a mod b, descending coefficient lists."""
    lb = b[0]
    r = list(a)
    tail = b[1:]
    for _ in range(len(a) - len(b) + 1):
        c = r[0]
        r = [lb * r[i + 1] - (c * tail[i] if i < len(tail) else 0) for i in range(len(r) - 1)]
    while r and r[0] == 0:
        r.pop(0)
    return r


def sturm_sequence(coeffs: Sequence) -> List[List[mpz]]:
    """Sturm chain (descending integer lists) of the ascending ``coeffs``."""
    p = integer_coeffs(coeffs)[::-1]
    d = len(p) - 1
    dp = _primitive([p[i] * (d - i) for i in range(d)])
    seq = [p, dp]
    while len(seq[-1]) > 1:
        a, b = seq[-2], seq[-1]
        r = _prem(a, b)
        if not r:
            break
        delta = len(a) - len(b)
        neg = b[0] < 0 and (delta + 1) % 2 == 1
        r = _primitive(r)
        seq.append(r if neg else [-v for v in r])
    return seq


def _variations(signs: Sequence[int]) -> int:
    s = [x for x in signs if x != 0]
    return sum(1 for a, b in zip(s, s[1:]) if a != b)


def _sgn(v) -> int:
    return (v > 0) - (v < 0)


def sturm_counts(coeffs: Sequence) -> Tuple[int, int]:
    """(# distinct real roots in (0, inf), # distinct real roots in (-inf, 0])."""
    seq = sturm_sequence(coeffs)
    at_inf = [_sgn(s[0]) for s in seq]
    at_minf = [_sgn(s[0]) * (-1) ** (len(s) - 1) for s in seq]
    at_zero = [_sgn(s[-1]) for s in seq]
    pos = _variations(at_zero) - _variations(at_inf)
    zero_root = 1 if seq[0][-1] == 0 else 0
    nonpos = _variations(at_minf) - _variations(at_zero) + zero_root
    return pos, nonpos


def count_positive_real(coeffs: Sequence) -> int:
    """Distinct positive real roots by the exact Sturm chain alone."""
    return sturm_counts(balanced_integer_poly(coeffs)[0])[0]


# ---------------------------------------------------------------- isolation


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, type(mpz(0)))):
        return Fraction(int(c))
    return mpfr_to_fraction(c)


def balanced_integer_poly(coeffs: Sequence) -> Tuple[List[mpz], int]:
    """(integer coefficients of p(2^s x), s) with s chosen to flatten exponents."""
    fr = [_as_fraction(c) for c in coeffs]
    while len(fr) > 1 and fr[-1] == 0:
        fr.pop()
    d = len(fr) - 1
    nz = [(j, f) for j, f in enumerate(fr) if f != 0]
    if d < 1 or len(nz) < 2:
        return integer_coeffs(fr), 0
    (j0, f0), (j1, f1) = nz[0], nz[-1]
    l0 = math.log2(abs(f0.numerator)) - math.log2(f0.denominator)
    l1 = math.log2(abs(f1.numerator)) - math.log2(f1.denominator)
    s = round((l0 - l1) / (j1 - j0))
    scaled = [f * Fraction(2) ** (s * j) for j, f in enumerate(fr)]
    return integer_coeffs(scaled), s


@dataclass(frozen=True)
class Isolation:
    """Certified roots of p(u): (midpoint, multiplicity) grouped by kind."""

    positive: List[Tuple]  # (u, mult, radius), u real > 0
    nonpositive: List[Tuple]  # (u, mult, radius), u real <= 0
    upper: List[Tuple]  # (u with Im u > 0, mult, radius)
    degree: int
    sturm_checked: bool

    @property
    def distinct_positive(self) -> int:
        return len(self.positive)

    @property
    def all_real_simple(self) -> bool:
        return (
            not self.upper
            and not self.nonpositive
            and all(r[1] == 1 for r in self.positive)
            and len(self.positive) == self.degree
        )


def _exact_mpfr(man, exp):
    m = mpz(int(man))
    with working(max(m.bit_length(), 2)):
        return gmpy2.mul_2exp(mpfr(m), int(exp))


def _arb_to_mpfr(x, shift: int):
    man, exp = x.mid().man_exp()
    return _exact_mpfr(man, int(exp) + shift)


def _arb_rad(x, shift: int):
    man, exp = x.rad().mid().man_exp()
    return _exact_mpfr(man, int(exp) + shift)


def isolate(coeffs: Sequence, sturm: Optional[bool] = None) -> Isolation:
    ints, s = balanced_integer_poly(coeffs)
    d = len(ints) - 1
    if d < 1:
        raise ValueError("degree must be >= 1")
    roots = flint.fmpz_poly([int(v) for v in ints]).complex_roots()
    pos, nonpos, upper = [], [], []
    for r, m in roots:
        if r.imag == 0:
            u = _arb_to_mpfr(r.real, s)
            (pos if r.real > 0 else nonpos).append((u, m, _arb_rad(r.real, s)))
        elif r.imag > 0:
            re, im = _arb_to_mpfr(r.real, s), _arb_to_mpfr(r.imag, s)
            with working(max(re.precision, im.precision)):
                z = mpc(re, im)
            upper.append((z, m, _arb_rad(r.real, s) + _arb_rad(r.imag, s)))
        elif not r.imag < 0:
            raise CertificationError("root ball straddles the real axis")
    pos.sort(key=lambda x: x[0])
    do_sturm = d <= STURM_MAX_DEGREE if sturm is None else sturm
    if do_sturm:
        sp, sn = sturm_counts(ints)
        if sp != len(pos) or sn != len(nonpos):
            raise CertificationError(
                f"Sturm counts ({sp}, {sn}) disagree with isolation ({len(pos)}, {len(nonpos)})"
            )
    return Isolation(pos, nonpos, upper, d, do_sturm)


def _newton_polish(cs, z, bits: int, radius=None, iters: int = 60):
    """Newton on p at working precision, kept inside the isolating ball."""
    z0 = z
    with working(bits):
        for _ in range(iters):
            p = dp = 0
            for c in reversed(cs):
                dp = dp * z + p
                p = p * z + c
            if dp == 0:
                break
            step = p / dp
            z = z - step
            if abs(step) <= abs(z) * mpfr(2) ** (-bits + 4):
                break
        if radius is not None and abs(z - z0) > 2 * radius:
            return z0
    return z


# ---------------------------------------------------------------- profiles


@dataclass
class RootProfile:
    real_roots_t: List
    complex_pairs: List[Tuple]  # (re, im > 0) in t
    min_gap: Optional[object]
    double_root: Optional[Tuple]  # (t*, kind)
    degree: int
    real_count_u: int

    @property
    def all_real(self) -> bool:
        """Only real and distinct roots."""
        return not self.complex_pairs and self.real_count_u == self.degree

    def export_rows(self):
        rows = [("real", r, 0) for r in self.real_roots_t]
        rows += [("complex", re, im) for re, im in self.complex_pairs]
        return rows


def _u_to_t(u):
    t = gmpy2.sqrt(mpc(u))
    if t.real < 0:
        t = -t
    return t


def classify(poly: EvenPolynomial, bits: int = DEFAULT_BITS,
             check_alternating: bool = True, coalesce_rel=COALESCE_REL) -> RootProfile:
    """Real/complex split of the roots of poly(t^2), with coalescence flags.

    A pair counts as (nearly) double when its imaginary part, or the gap between
    neighbouring real roots, is below ``coalesce_rel`` relative to its location.
    """
    cs = list(poly.coeffs)
    while len(cs) > 1 and cs[-1] == 0:
        cs.pop()
    if check_alternating and not EvenPolynomial(tuple(cs)).is_alternating():
        raise ValueError("polynomial is not alternating")
    iso = isolate(cs)
    if check_alternating and iso.nonpositive:
        raise CertificationError("alternating polynomial reported a root at u <= 0")
    with working(bits):
        cw = [to_mpfr(c) for c in cs]
        real_t = []
        for u, m, rad in iso.positive:
            if m == 1:
                u = _newton_polish(cw, u, bits, rad)
            real_t.extend([gmpy2.sqrt(u)] * m)
        pairs = []
        for u, m, rad in iso.upper:
            tz = _u_to_t(_newton_polish(cw, u, bits, rad) if m == 1 else u)
            pairs.extend([(tz.real, abs(tz.imag))] * m)
        for u, m, _ in iso.nonpositive:
            pairs.extend([(mpfr(0), gmpy2.sqrt(-u))] * m)
        pairs.sort(key=lambda p: (p[1] / abs(mpc(*p)), p[0]))
        gaps = [(b - a, (a + b) / 2) for a, b in zip(real_t, real_t[1:])]
        min_gap = min(gaps)[0] if gaps else None
        dbl = None
        tol = to_mpfr(coalesce_rel)
        near = [p for p in pairs if p[1] < tol * abs(mpc(*p))]
        if near:
            dbl = (near[0][0], "complex-pair")
        elif gaps:
            g, mid = min(gaps)
            if g < tol * mid:
                dbl = (mid, "real-gap")
    return RootProfile(real_t, pairs, min_gap, dbl, iso.degree, iso.distinct_positive)


def real_roots_exact(poly: EvenPolynomial, bits: int = DEFAULT_BITS) -> List:
    """Ascending positive real u-roots; raises unless all are real, positive and simple."""
    iso = isolate(poly.coeffs, sturm=True)
    if not iso.all_real_simple:
        raise CertificationError(
            f"{iso.degree - iso.distinct_positive} roots are not simple positive reals"
        )
    with working(bits):
        cw = [to_mpfr(c) for c in poly.coeffs]
        return [_newton_polish(cw, u, bits, rad) for u, _, rad in iso.positive]


def residual_ok(poly: EvenPolynomial, u, rel=mpfr("1e-20")) -> bool:
    """|p(u)| <= rel * sum |c_j| |u|^j."""
    acc = 0
    norm = 0
    for j, c in enumerate(poly.coeffs):
        term = c * u**j
        acc += term
        norm += abs(term)
    return abs(acc) <= rel * norm


# ---------------------------------------------------------------- regime


def approx_all_real(approx: XiApproximant) -> bool:
    return isolate(approx.poly_u.coeffs).all_real_simple


def all_real(spec: AFunctionSpec, n: int, beta, bits: int = DEFAULT_BITS,
             tol: float = DEFAULT_TOL) -> bool:
    """True iff Xi_n(., beta) has only real, distinct roots."""
    approx = build(spec, n, beta, bits=bits, tol=tol, derivative=False)
    return approx_all_real(approx)


@dataclass
class OnsetResult:
    beta: object  # upper end of the final bracket (all real)
    t: object
    beta_lo: object  # lower end (complex pair present)
    flips: List[Tuple] = field(default_factory=list)  # (beta_false, beta_true) transitions
    non_monotone: bool = False

    def __iter__(self):
        return iter((self.beta, self.t))


def _coalescing_t(spec, n, beta_lo, beta_hi, bits, tol):
    """Location of the pair that turns real between beta_lo and beta_hi."""
    lo_prof = classify(build(spec, n, beta_lo, bits=bits, tol=tol, derivative=False).poly_u,
                       bits, check_alternating=False)
    if lo_prof.complex_pairs:
        return lo_prof.complex_pairs[0][0]
    hi_prof = classify(build(spec, n, beta_hi, bits=bits, tol=tol, derivative=False).poly_u,
                       bits, check_alternating=False)
    gaps = [((b - a), (a + b) / 2) for a, b in zip(hi_prof.real_roots_t, hi_prof.real_roots_t[1:])]
    return min(gaps)[1]


def onset_beta(
    spec: AFunctionSpec,
    n: int,
    beta_lo,
    beta_hi,
    tol=1e-10,
    bits: int = DEFAULT_BITS,
    quad_tol: float = DEFAULT_TOL,
    grid: int = 64,
) -> OnsetResult:
    """Infimum of the all-real range reached from ``beta_hi`` downward."""
    with working(bits):
        lo, hi = to_mpfr(beta_lo), to_mpfr(beta_hi)
        if not (0 < lo < hi):
            raise BracketError("need 0 < beta_lo < beta_hi")
        pred = lambda b: all_real(spec, n, b, bits, quad_tol)  # noqa: E731
        ratio = (hi / lo) ** (mpfr(1) / (grid - 1))
        pts = [lo * ratio**i for i in range(grid - 1)] + [hi]
        vals = [pred(p) for p in pts]
        if vals[0]:
            raise BracketError(f"all roots already real at beta_lo={float(lo)}")
        if not vals[-1]:
            raise BracketError(f"complex roots remain at beta_hi={float(hi)}")
        flips = [(pts[i], pts[i + 1]) for i in range(grid - 1) if not vals[i] and vals[i + 1]]
        downs = [i for i in range(grid - 1) if vals[i] and not vals[i + 1]]
        i = max(j for j in range(grid) if not vals[j])
        a, b = pts[i], pts[i + 1]
        rel = mpfr(tol)
        while b - a > rel * b:
            m = gmpy2.sqrt(a * b)
            if pred(m):
                b = m
            else:
                a = m
        t = _coalescing_t(spec, n, a, b, bits, quad_tol)
        return OnsetResult(b, t, a, flips, bool(downs) or len(flips) > 1)
