"""Minimal beta-sequence tracking.

For each n the trace holds the smallest beta at which Xi_n(., beta) has only
real roots. There the approximant carries a real double root (t_n, beta_n):

    Xi_n(t_n, beta_n) = 0,   Xi_n'(t_n, beta_n) = 0.

Going from n to n+1 the first-order increments are recorded as a health
metric. The pair is then polished by Newton on the 2x2 system, eliminating t
exactly at every beta iterate: t is solved from Xi' = 0 on the current
approximant (free, no rebuild), after which beta moves by -Xi / dXi/dbeta.
At a solution of Xi' = 0 that is the Schur-complement form of the full
Newton step, so each rebuild buys one quadratically convergent beta update.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, List, Optional

import gmpy2
from gmpy2 import mpfr, mpz

from ._mp import DEFAULT_BITS, fmt, to_mpfr, working
from .afamily import AFunctionSpec, spec_from_record, spec_record
from .approximant import N_MIN, XiApproximant, build
from .coefficients import DEFAULT_TOL
from .pochhammer import eval_pair
from .rootfinder import BracketError, CertificationError, all_real, approx_all_real, onset_beta

CHECKPOINT_VERSION = 1


class NewtonError(RuntimeError):
    pass


class JumpSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class TraceConfig:
    bits: int = DEFAULT_BITS
    quad_tol: float = DEFAULT_TOL
    newton_tol: float = 1e-20
    cert_rel: float = 1e-8
    recheck_stride: int = 25
    n_cap: int = 2000
    search_periods: float = 1.0  # window = periods * 2 pi * max(1, beta)
    search_samples: int = 400
    onset_tol: float = 1e-12
    max_newton: int = 40
    walk_ratio: float = 1.03

    def __post_init__(self):
        if self.bits < 64:
            raise ValueError("need at least 64 bits")
        if self.recheck_stride < 1:
            raise ValueError("recheck_stride must be positive")


@dataclass
class TraceRow:
    n: int
    beta: object
    t: object
    jumped: bool = False
    res1: object = None  # |Xi_n(t_n, beta_n)|
    res2: object = None  # |Xi_n'(t_n, beta_n)|
    method: str = "newton"  # newton | jump | rescan | onset | error
    patch: bool = False  # beta decreased relative to the previous row
    pred_beta: object = None  # first-order prediction from the previous row
    pred_t: object = None
    signal: int = 0  # sign P_n^+(u_{n-1}) as seen when this row was made
    dbeta_sign: int = 0  # sign dXi_n/dbeta at the previous (t, beta)
    recheck: str = ""  # "", "ok", "warn"
    note: str = ""

    @property
    def u(self):
        return self.t / self.beta if self.beta else None

    @property
    def ok(self) -> bool:
        return self.method != "error"


@dataclass
class BetaTrace:
    spec: AFunctionSpec
    rows: List[TraceRow] = field(default_factory=list)
    precision_bits: int = DEFAULT_BITS
    recheck_stride: int = 25
    config: TraceConfig = field(default_factory=TraceConfig)

    @property
    def last(self) -> TraceRow:
        return self.rows[-1]

    def good_rows(self) -> List[TraceRow]:
        return [r for r in self.rows if r.ok]

    def row(self, n: int) -> TraceRow:
        for r in self.rows:
            if r.n == n and r.ok:
                return r
        raise KeyError(n)

    def arrays(self):
        """(n, beta, t) as float lists over certified rows."""
        g = self.good_rows()
        return [r.n for r in g], [float(r.beta) for r in g], [float(r.t) for r in g]

    def jump_ns(self) -> List[int]:
        return [r.n for r in self.good_rows() if r.jumped]

    # ---- persistence
    def header_hash(self) -> str:
        return _header_hash(self.spec, self.config)

    def to_record(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "hash": self.header_hash(),
            "spec": spec_record(self.spec),
            "config": asdict(self.config),
            "rows": [_row_record(r) for r in self.rows],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "BetaTrace":
        if rec.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {rec.get('version')}")
        spec = spec_from_record(rec["spec"])
        cfg = TraceConfig(**rec["config"])
        if _header_hash(spec, cfg) != rec["hash"]:
            raise ValueError("checkpoint header hash mismatch")
        with working(cfg.bits):
            rows = [_row_from_record(r) for r in rec["rows"]]
        return cls(spec, rows, cfg.bits, cfg.recheck_stride, cfg)

    def save(self, path: str) -> None:
        _atomic_write(path, json.dumps(self.to_record(), indent=1))

    @classmethod
    def load(cls, path: str) -> "BetaTrace":
        with open(path) as fh:
            return cls.from_record(json.load(fh))

    def csv_lines(self) -> List[str]:
        bits = self.precision_bits
        out = ["n,beta,t,u,jumped,res1,res2"]
        with working(bits):
            for r in self.good_rows():
                out.append(",".join([
                    str(r.n), fmt(r.beta, bits), fmt(r.t, bits), fmt(r.u, bits),
                    str(int(r.jumped)), fmt(r.res1, 64), fmt(r.res2, 64),
                ]))
        return out

    def to_csv(self, path: str) -> None:
        _atomic_write(path, "\n".join(self.csv_lines()) + "\n")


def _header_hash(spec: AFunctionSpec, cfg: TraceConfig) -> str:
    payload = json.dumps({"spec": spec_record(spec), "config": asdict(cfg)}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _enc(x):
    if x is None:
        return None
    man, exp = x.as_mantissa_exp()
    return [str(man), int(exp)]


def _dec(v):
    if v is None:
        return None
    man, exp = v
    return gmpy2.mul_2exp(mpfr(mpz(man), max(64, mpz(man).bit_length())), exp)


_MP_FIELDS = ("beta", "t", "res1", "res2", "pred_beta", "pred_t")


def _row_record(r: TraceRow) -> dict:
    d = asdict(r)
    for k in _MP_FIELDS:
        d[k] = _enc(getattr(r, k))
    return d


def _row_from_record(d: dict) -> TraceRow:
    d = dict(d)
    for k in _MP_FIELDS:
        d[k] = _dec(d[k])
    return TraceRow(**d)


def _atomic_write(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- Newton


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _extremum(approx: XiApproximant, t, iters: int = 100):
    """Newton on Xi' = 0 from t at fixed beta."""
    bits = approx.bits
    with working(bits):
        t = to_mpfr(t)
        eps = gmpy2.mul_2exp(mpfr(1), 12 - bits)
        for _ in range(iters):
            _, d1, d2 = approx.eval_all(t)
            if d2 == 0:
                raise NewtonError("flat second derivative")
            dt = d1 / d2
            cap = max(abs(t), mpfr(1)) / 4
            if abs(dt) > cap:
                dt = cap if dt > 0 else -cap
            t -= dt
            if abs(dt) <= eps * max(abs(t), mpfr(1)):
                break
        return abs(t)


@dataclass
class Polished:
    t: object
    beta: object
    approx: XiApproximant
    res1: object
    res2: object


def _build(spec, n, beta, cfg: TraceConfig) -> XiApproximant:
    return build(spec, n, beta, bits=cfg.bits, tol=cfg.quad_tol, derivative=True)


def polish(spec: AFunctionSpec, n: int, t, beta, cfg: TraceConfig,
           first: Optional[XiApproximant] = None) -> Polished:
    """Double root of Xi_n near (t, beta) to the configured residual."""
    with working(cfg.bits):
        t, beta = to_mpfr(t), to_mpfr(beta)
        approx = first if first is not None else _build(spec, n, beta, cfg)
        for _ in range(cfg.max_newton):
            t = _extremum(approx, t)
            f, d1, _ = approx.eval_all(t)
            scale = max(mpfr(1), abs(approx.eval(0)))
            tol = mpfr(cfg.newton_tol) * scale
            if abs(f) <= tol and abs(d1) <= tol:
                return Polished(t, beta, approx, abs(f), abs(d1))
            fb = approx.eval_dbeta(t)
            if fb == 0:
                raise NewtonError("dXi/dbeta vanished")
            db = -f / fb
            if abs(db) > beta / 2:
                raise NewtonError(f"beta step {float(db):.3g} too large at beta={float(beta):.6g}")
            beta += db
            approx = _build(spec, n, beta, cfg)
        raise NewtonError("no convergence")


def certify(spec: AFunctionSpec, n: int, p: Polished, cfg: TraceConfig) -> bool:
    """All real just above beta, and the double root opens into a complex pair below."""
    with working(cfg.bits):
        fb = p.approx.eval_dbeta(p.t)
        d2 = p.approx.eval_dtt(p.t)
        # Xi ~ fb db + d2 dt^2 / 2: real splitting for db > 0 needs fb*d2 < 0
        if not fb * d2 < 0:
            return False
        up = p.beta * (1 + mpfr(cfg.cert_rel))
        return all_real(spec, n, up, cfg.bits, cfg.quad_tol)


# ---------------------------------------------------------------- trace ops


def init_trace(spec: AFunctionSpec, n0: int, config: Optional[TraceConfig] = None) -> BetaTrace:
    cfg = config or TraceConfig()
    if n0 < N_MIN:
        raise ValueError(f"n0 must be >= {N_MIN}")
    lo, hi = mpfr("1e-3"), mpfr("1e3")
    last_err = None
    for _ in range(4):
        try:
            res = onset_beta(spec, n0, lo, hi, tol=cfg.onset_tol, bits=cfg.bits,
                             quad_tol=cfg.quad_tol)
            break
        except BracketError as exc:
            last_err = exc
            lo, hi = lo / 100, hi * 100
    else:
        raise BracketError(f"no onset found: {last_err}")
    p = polish(spec, n0, res.t, res.beta, cfg)
    if not certify(spec, n0, p, cfg):
        raise CertificationError("initial double root failed certification")
    with working(cfg.bits):
        sig = _sign(eval_pair(n0, p.t / p.beta, cfg.bits).plus)
    row = TraceRow(n0, p.beta, p.t, res1=p.res1, res2=p.res2, method="onset", signal=sig,
                   patch=res.non_monotone)
    return BetaTrace(spec, [row], cfg.bits, cfg.recheck_stride, cfg)


def _critical_points(approx: XiApproximant, lo, hi, samples: int):
    """Zeros of Xi' on (lo, hi] located by sampling then Newton."""
    with working(approx.bits):
        h = (hi - lo) / samples
        pts = [lo + h * i for i in range(samples + 1)]
        d = [approx.eval_dt(x) for x in pts]
        out = []
        for i in range(samples):
            if d[i] == 0 or _sign(d[i]) * _sign(d[i + 1]) < 0:
                a, b = pts[i], pts[i + 1]
                da = d[i]
                for _ in range(40):
                    m = (a + b) / 2
                    dm = approx.eval_dt(m)
                    if _sign(dm) == _sign(da):
                        a, da = m, dm
                    else:
                        b = m
                try:
                    out.append(_extremum(approx, (a + b) / 2))
                except NewtonError:
                    out.append((a + b) / 2)
        return out


def next_extremum(approx: XiApproximant, t_from, beta, cfg: TraceConfig):
    """First extremum of the approximant above t_from, widening the window up to 4x."""
    with working(cfg.bits):
        t_from = to_mpfr(t_from)
        width = cfg.search_periods * 2 * gmpy2.const_pi() * max(mpfr(1), to_mpfr(beta))
        gap = t_from * mpfr("1e-6") + mpfr("1e-12")
        for scale in (1, 2, 4):
            cps = [c for c in _critical_points(approx, t_from, t_from + scale * width,
                                               cfg.search_samples * scale)
                   if c > t_from + gap]
            if cps:
                return min(cps)
    raise JumpSearchError(f"no extremum above t={float(t_from):.6g}")


def skipped_extremum(approx: XiApproximant, t_old, t_new, samples: int = 200) -> bool:
    """True when approx has a critical point strictly between t_old and t_new."""
    with working(approx.bits):
        lo, hi = sorted((to_mpfr(t_old), to_mpfr(t_new)))
        margin = mpfr("1e-6") * hi
        if hi - lo <= 2 * margin:
            return False
        return any(lo + margin < c < hi - margin
                   for c in _critical_points(approx, lo, hi, samples))


def detect_jump(trace: BetaTrace, approx: Optional[XiApproximant] = None):
    """Next t-branch when sign P_{n+1}^+(u_n) flipped since the last accepted step, else None."""
    cfg = trace.config
    last = trace.last
    n1 = last.n + 1
    with working(cfg.bits):
        sig = _sign(eval_pair(n1, last.t / last.beta, cfg.bits).plus)
        if sig == last.signal or last.signal == 0:
            return None
        if approx is None:
            approx = _build(trace.spec, n1, last.beta, cfg)
        base = _extremum(approx, last.t)
        return next_extremum(approx, base, last.beta, cfg)


def _walk_bracket(spec, n, beta, cfg: TraceConfig, max_steps: int = 400):
    """Geometric walk from beta to a (complex, real) bracket at the real-regime edge."""
    r = mpfr(cfg.walk_ratio)
    pred = lambda b: all_real(spec, n, b, cfg.bits, cfg.quad_tol)  # noqa: E731
    b = beta
    if pred(b):
        for _ in range(max_steps):
            nb = b / r
            if not pred(nb):
                return nb, b
            b = nb
    else:
        for _ in range(max_steps):
            nb = b * r
            if pred(nb):
                return b, nb
            b = nb
    raise BracketError("walk did not reach the real-regime edge")


def rescan(spec: AFunctionSpec, n: int, beta_start, cfg: TraceConfig) -> Polished:
    lo, hi = _walk_bracket(spec, n, to_mpfr(beta_start), cfg)
    res = onset_beta(spec, n, lo, hi, tol=cfg.onset_tol, bits=cfg.bits,
                     quad_tol=cfg.quad_tol, grid=2)
    p = polish(spec, n, res.t, res.beta, cfg)
    if not certify(spec, n, p, cfg):
        raise CertificationError(f"re-scan double root at n={n} failed certification")
    return p


def step(trace: BetaTrace) -> BetaTrace:
    """Append row n+1."""
    cfg = trace.config
    spec = trace.spec
    last = trace.last
    if not last.ok:
        raise ValueError("trace ends in an error row")
    n1 = last.n + 1
    with working(cfg.bits):
        a0 = _build(spec, n1, last.beta, cfg)
        f, d1, d2 = a0.eval_all(last.t)
        fb = a0.eval_dbeta(last.t)
        fbt = a0.eval_dbeta_dt(last.t)
        dbeta = -f / fb
        dt = -(d1 + fbt * dbeta) / d2
        pred_b, pred_t = last.beta + dbeta, last.t + dt
        sig = _sign(eval_pair(n1, last.t / last.beta, cfg.bits).plus)
        base = _extremum(a0, last.t)  # tracked extremum at the old beta

        cands = []
        try:
            cont = polish(spec, n1, base, last.beta, cfg, first=a0)
            cands.append(("newton", cont))
        except NewtonError:
            cont = None
        flipped = last.signal != 0 and sig != last.signal
        if flipped or cont is None:
            try:
                tj = next_extremum(a0, base, last.beta, cfg)
                cands.append(("jump", polish(spec, n1, tj, last.beta, cfg, first=a0)))
            except (NewtonError, JumpSearchError):
                pass
        good = [(m, p) for m, p in cands if certify(spec, n1, p, cfg)]
        if good:
            # the real regime starts at the highest certified double root
            method, p = max(good, key=lambda mp: mp[1].beta)
        else:
            method, p = "rescan", rescan(spec, n1, cont.beta if cont else last.beta, cfg)

        jumped = skipped_extremum(p.approx, last.t, p.t)
        row = TraceRow(
            n1, p.beta, p.t, jumped=jumped, res1=p.res1, res2=p.res2, method=method,
            patch=p.beta < last.beta, pred_beta=pred_b, pred_t=pred_t, signal=sig,
            dbeta_sign=_sign(fb),
        )
    trace.rows.append(row)
    return trace


def recheck(trace: BetaTrace) -> str:
    """Minimality audit of the last row: 'ok', 'warn' (real below) or raises."""
    cfg = trace.config
    r = trace.last
    with working(cfg.bits):
        up = all_real(trace.spec, r.n, r.beta * (1 + mpfr("1e-3")), cfg.bits, cfg.quad_tol)
        down = all_real(trace.spec, r.n, r.beta * (1 - mpfr("1e-2")), cfg.bits, cfg.quad_tol)
    if not up:
        raise CertificationError(f"complex roots just above beta_{r.n}")
    return "warn" if down else "ok"


def run_trace(
    spec: AFunctionSpec,
    n0: int,
    n_max: int,
    checkpoint_every: int = 10,
    checkpoint: Optional[str] = None,
    config: Optional[TraceConfig] = None,
    progress: Optional[Callable[[TraceRow], None]] = None,
) -> BetaTrace:
    """Trace from n0 to n_max, resuming from ``checkpoint`` when it exists."""
    cfg = config or TraceConfig()
    if n_max > cfg.n_cap:
        raise ValueError(f"n_max {n_max} exceeds cap {cfg.n_cap}")
    if n_max < n0:
        raise ValueError("n_max must be >= n0")
    trace = None
    if checkpoint and os.path.exists(checkpoint):
        trace = BetaTrace.load(checkpoint)
        if trace.spec != spec or trace.config != cfg:
            raise ValueError("checkpoint was written for a different spec or precision")
        if trace.rows[0].n != n0:
            raise ValueError("checkpoint starts at a different n0")
    if trace is None:
        trace = init_trace(spec, n0, cfg)
        if progress:
            progress(trace.last)
        if checkpoint:
            trace.save(checkpoint)
    since = 0
    while trace.last.ok and trace.last.n < n_max:
        n_next = trace.last.n + 1
        err = None
        try:
            step(trace)
        except (NewtonError, CertificationError, BracketError, JumpSearchError) as exc:
            err = exc
        else:
            if trace.last.n % cfg.recheck_stride == 0:
                try:
                    trace.last.recheck = recheck(trace)
                except CertificationError as exc:
                    trace.rows.pop()  # the audited row is not trusted
                    err = exc
        if err is not None:
            with working(cfg.bits):
                trace.rows.append(TraceRow(n_next, mpfr(0), mpfr(0), method="error",
                                           note=f"{type(err).__name__}: {err}"))
        if progress:
            progress(trace.last)
        since += 1
        if checkpoint and (since >= checkpoint_every or not trace.last.ok or trace.last.n >= n_max):
            trace.save(checkpoint)
            since = 0
    return trace
