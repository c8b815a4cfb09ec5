"""Command-line driver.

Exit codes: 0 ok, 2 usage/config error, 3 negative predicate (complex roots),
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import gmpy2
from gmpy2 import mpfr, mpz

from . import __version__
from ._mp import digits_for, fmt, to_mpfr, working
from .afamily import AFunctionSpec, DomainError, parse_spec, spec_from_record, xi_exact
from .approximant import build
from .asymptotics import MODELS, fit
from .betatrace import BetaTrace, JumpSearchError, NewtonError, TraceConfig, run_trace
from .coefficients import coeff_vector, remainder
from .quadrature import QuadratureError
from .rootfinder import BracketError, CertificationError, classify

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE, EXIT_NUMERIC = 0, 2, 3, 4

_NUMERIC_ERRORS = (QuadratureError, CertificationError, BracketError, NewtonError,
                   JumpSearchError, ArithmeticError)

_SPEC_KEYS = {"variant", "vscale", "a", "w", "k", "theta_terms", "terms"}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    spec: AFunctionSpec
    precision_bits: int = 256
    quad_tol: float = 1e-30
    n0: Optional[int] = None
    n_max: Optional[int] = None
    checkpoint: Optional[str] = None
    format: str = "csv"
    extra: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.precision_bits < 64:
            raise UsageError("precision_bits must be >= 64")
        if self.n0 is not None and self.n0 < 4:
            raise UsageError("n0 must be >= 4")
        if self.n0 is not None and self.n_max is not None and self.n_max < self.n0:
            raise UsageError("n_max must be >= n0")
        if self.format not in ("csv", "json"):
            raise UsageError("format must be csv or json")
        if not self.quad_tol > 0:
            raise UsageError("tol must be positive")


def read_config_file(path: str) -> Dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _spec_arg(text: str) -> Dict[str, str]:
    """--spec accepts a config file path or an inline spec such as bessel(a=1)."""
    if os.path.isfile(text):
        return read_config_file(text)
    return {"spec": text}


def make_config(args: argparse.Namespace) -> RunConfig:
    raw: Dict[str, str] = {}
    if args.spec:
        raw.update(_spec_arg(args.spec))
    if "spec" in raw:
        spec = parse_spec(raw.pop("spec"))
    elif "variant" in raw:
        spec = spec_from_record({k: v for k, v in raw.items() if k in _SPEC_KEYS})
    else:
        raise UsageError("no spec given (use --spec)")
    for k in _SPEC_KEYS:
        raw.pop(k, None)
    bits = args.precision_bits or int(raw.pop("precision_bits", 256))
    tol = args.tol if args.tol is not None else float(raw.pop("quad_tol", raw.pop("tol", 1e-30)))
    n0 = getattr(args, "n0", None) or (int(raw["n0"]) if "n0" in raw else None)
    n_max = getattr(args, "n_max", None) or (int(raw["n_max"]) if "n_max" in raw else None)
    ckpt = getattr(args, "resume", None) or raw.get("checkpoint")
    fmt_ = args.format or raw.get("format", "csv")
    return RunConfig(spec, bits, tol, n0, n_max, ckpt, fmt_, raw)


# ---------------------------------------------------------------- output


def _enc_exact(x):
    man, exp = x.as_mantissa_exp()
    return [str(man), int(exp)]


def _dec_exact(v, bits):
    man, exp = mpz(v[0]), int(v[1])
    with working(max(bits, man.bit_length())):
        return gmpy2.mul_2exp(mpfr(man), exp)


def _is_mp(x) -> bool:
    return isinstance(x, type(mpfr(0)))


def render(columns: Sequence[str], rows: List[Sequence], meta: Dict[str, object],
           kind: str, bits: int) -> str:
    """CSV (``# key = value`` preamble, header row) or JSON with exact mpfr fields."""
    if kind == "json":
        jrows = []
        for r in rows:
            d = {}
            for c, v in zip(columns, r):
                if _is_mp(v):
                    d[c] = fmt(v, bits)
                    d[c + "_exact"] = _enc_exact(v)
                else:
                    d[c] = v
            jrows.append(d)
        meta = dict(meta, digits=digits_for(bits))
        return json.dumps({"meta": meta, "columns": list(columns), "rows": jrows}, indent=1) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k} = {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v, bits) if _is_mp(v) else v for v in r])
    return buf.getvalue()


def read_table(path: str, bits: int = 256):
    """Import a JSON export; mpfr columns come back bit-exact."""
    with open(path) as fh:
        doc = json.load(fh)
    cols = doc["columns"]
    out = []
    for d in doc["rows"]:
        out.append({c: (_dec_exact(d[c + "_exact"], bits) if c + "_exact" in d else d[c])
                    for c in cols})
    return doc["meta"], out


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _meta(cfg: RunConfig, **kw) -> Dict[str, object]:
    m = {"spec": cfg.spec.label, "precision_bits": cfg.precision_bits, "quad_tol": cfg.quad_tol}
    m.update(kw)
    return m


def _positive(text: str, name: str, bits: int):
    with working(bits):
        v = to_mpfr(text)
    if not v > 0:
        raise UsageError(f"{name} must be positive")
    return v


# ---------------------------------------------------------------- commands


def cmd_coeffs(cfg: RunConfig, n: int, beta: str, out: Optional[str] = None) -> int:
    b = _positive(beta, "beta", cfg.precision_bits)
    if n < 0:
        raise UsageError("n must be >= 0")
    cv = coeff_vector(cfg.spec, b, range(n + 1), cfg.precision_bits, cfg.quad_tol)
    worst = max(cv.achieved_tol) if cv.achieved_tol else 0.0
    rows = [(k, v, float(e)) for k, v, e in cv.as_rows()]
    meta = _meta(cfg, beta=beta, n=n, achieved_tol=float(worst))
    _emit(render(["k", "b_k", "tol"], rows, meta, cfg.format, cfg.precision_bits), out)
    return EXIT_OK


def cmd_roots(cfg: RunConfig, n: int, beta: str, out: Optional[str] = None) -> int:
    b = _positive(beta, "beta", cfg.precision_bits)
    approx = build(cfg.spec, n, b, bits=cfg.precision_bits, tol=cfg.quad_tol, derivative=False)
    prof = classify(approx.poly_u, cfg.precision_bits, check_alternating=False)
    worst = max(approx.coeffs.achieved_tol) if approx.coeffs.achieved_tol else 0.0
    meta = _meta(cfg, beta=beta, n=n, all_real=prof.all_real, achieved_tol=float(worst))
    rows = [(kind, re, im if _is_mp(im) else mpfr(im)) for kind, re, im in prof.export_rows()]
    _emit(render(["kind", "re_t", "im_t"], rows, meta, cfg.format, cfg.precision_bits), out)
    return EXIT_OK if prof.all_real else EXIT_NEGATIVE


def cmd_trace(cfg: RunConfig, out: Optional[str] = None, checkpoint_every: int = 5,
              quiet: bool = True) -> int:
    if cfg.n0 is None or cfg.n_max is None:
        raise UsageError("trace needs --n0 and --n-max")
    tcfg = TraceConfig(bits=cfg.precision_bits, quad_tol=cfg.quad_tol)
    ckpt = cfg.checkpoint or (out + ".ckpt.json" if out else None)

    def progress(r):
        if not quiet:
            print(f"n={r.n} beta={float(r.beta):.10g} t={float(r.t):.10g}"
                  f"{' jumped' if r.jumped else ''}{' ' + r.note if r.note else ''}",
                  file=sys.stderr)

    trace = run_trace(cfg.spec, cfg.n0, cfg.n_max, checkpoint_every, ckpt, tcfg, progress)
    good = trace.good_rows()
    worst1 = max((r.res1 for r in good), default=mpfr(0))
    worst2 = max((r.res2 for r in good), default=mpfr(0))
    meta = _meta(cfg, n0=cfg.n0, n_max=cfg.n_max, max_res1=float(worst1),
                 max_res2=float(worst2), jumps=" ".join(map(str, trace.jump_ns())))
    rows = [(r.n, r.beta, r.t, r.u, int(r.jumped), r.res1, r.res2) for r in good]
    cols = ["n", "beta", "t", "u", "jumped", "res1", "res2"]
    _emit(render(cols, rows, meta, cfg.format, cfg.precision_bits), out)
    if not trace.last.ok:
        print(f"trace stopped at n={trace.last.n}: {trace.last.note}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def load_trace_points(path: str):
    """(ns, betas) from a checkpoint, a JSON export or a CSV export."""
    if path.endswith(".json"):
        with open(path) as fh:
            doc = json.load(fh)
        if "version" in doc and "rows" in doc and "hash" in doc:
            tr = BetaTrace.from_record(doc)
            rows = tr.good_rows()
            return [r.n for r in rows], [float(r.beta) for r in rows], tr.spec
        return [int(r["n"]) for r in doc["rows"]], [float(r["beta"]) for r in doc["rows"]], None
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rd = csv.DictReader(lines)
    ns, bs = [], []
    for r in rd:
        ns.append(int(r["n"]))
        bs.append(float(r["beta"]))
    return ns, bs, None


def cmd_fit(cfg: Optional[RunConfig], trace_path: str, model: str,
            n_lo: Optional[int] = None, n_hi: Optional[int] = None,
            out: Optional[str] = None, kind: str = "csv") -> int:
    if model not in MODELS:
        raise UsageError(f"model must be one of {MODELS}")
    ns, bs, spec = load_trace_points(trace_path)
    a = None
    spec = spec or (cfg.spec if cfg else None)
    if spec is not None and spec.exp_type:
        a = float(spec.exp_type)
    rng = None
    if n_lo is not None or n_hi is not None:
        rng = (n_lo if n_lo is not None else min(ns), n_hi if n_hi is not None else max(ns))
    res = fit((ns, bs), model, rng, a=a)
    if kind == "json":
        text = json.dumps({"model": res.model, "params": res.params, "r2": res.r2,
                           "n_range": list(res.n_range), "npoints": res.npoints}, indent=1) + "\n"
    else:
        text = "\n".join(res.csv_lines()) + "\n"
    _emit(text, out)
    return EXIT_OK


def cmd_remainder(cfg: RunConfig, n: int, beta: str, t: str, out: Optional[str] = None) -> int:
    b = _positive(beta, "beta", cfg.precision_bits)
    with working(cfg.precision_bits):
        tv = to_mpfr(t)
    r = remainder(cfg.spec, n, b, tv, cfg.precision_bits, cfg.quad_tol)
    meta = _meta(cfg, n=n, beta=beta, t=t)
    _emit(render(["n", "beta", "t", "remainder"], [(n, b, tv, r)], meta, cfg.format,
                 cfg.precision_bits), out)
    return EXIT_OK


def cmd_xi(cfg: RunConfig, t: str, out: Optional[str] = None) -> int:
    with working(cfg.precision_bits):
        tv = to_mpfr(t)
    v = xi_exact(cfg.spec, tv, cfg.precision_bits)
    v = to_mpfr(v) if not _is_mp(v) else v
    meta = _meta(cfg, t=t)
    _emit(render(["t", "xi"], [(tv, v)], meta, cfg.format, cfg.precision_bits), out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="config file (key = value) or inline spec, e.g. 'bessel(a=1)'")
    common.add_argument("--precision-bits", type=int, default=None)
    common.add_argument("--tol", type=float, default=None, help="quadrature tolerance")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    p = argparse.ArgumentParser(prog="pochxi", description="Pochhammer expansions of Xi-type functions")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("coeffs", parents=[common], help="b_k(beta) for k = 0..n")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--beta", required=True)

    s = sub.add_parser("roots", parents=[common], help="root classification; exit 3 if complex")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--beta", required=True)

    s = sub.add_parser("trace", parents=[common], help="minimal beta-sequence with checkpoints")
    s.add_argument("--n0", type=int, default=None)
    s.add_argument("--n-max", type=int, default=None)
    s.add_argument("--resume", default=None, help="checkpoint file (created if missing)")
    s.add_argument("--checkpoint-every", type=int, default=5)
    s.add_argument("--verbose", action="store_true")

    s = sub.add_parser("fit", parents=[common], help="growth-law fit of a trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--model", default="log_power", choices=MODELS)
    s.add_argument("--n-lo", type=int, default=None)
    s.add_argument("--n-hi", type=int, default=None)

    s = sub.add_parser("remainder", parents=[common], help="Xi - Xi_n at (t, beta)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--beta", required=True)
    s.add_argument("--t", default="0")

    s = sub.add_parser("xi", parents=[common], help="reference Xi(t)")
    s.add_argument("--t", required=True)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        if args.command == "fit":
            cfg = make_config(args) if args.spec else None
            kind = args.format or (cfg.format if cfg else "csv")
            return cmd_fit(cfg, args.trace, args.model, args.n_lo, args.n_hi, args.out, kind)
        cfg = make_config(args)
        if args.command == "coeffs":
            return cmd_coeffs(cfg, args.n, args.beta, args.out)
        if args.command == "roots":
            return cmd_roots(cfg, args.n, args.beta, args.out)
        if args.command == "trace":
            return cmd_trace(cfg, args.out, args.checkpoint_every, quiet=not args.verbose)
        if args.command == "remainder":
            return cmd_remainder(cfg, args.n, args.beta, args.t, args.out)
        if args.command == "xi":
            return cmd_xi(cfg, args.t, args.out)
    except (UsageError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
