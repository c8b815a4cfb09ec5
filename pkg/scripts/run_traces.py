"""Generate the shipped beta-sequence traces under data/.

Each case checkpoints as it goes, so an interrupted run resumes where it
stopped. Usage: python3 scripts/run_traces.py [case ...]
"""
import argparse
import os
import sys
import time

from pochxi.afamily import parse_spec
from pochxi.betatrace import TraceConfig, run_trace

CASES = {
    "step_w1": ("step(w=1)", 4, 200),
    "bessel_a1": ("bessel(a=1)", 10, 200),
    "bessel_a0005": ("bessel(a=0.005)", 4, 170),
    "incgamma_a001": ("incgamma(a=0.01)", 4, 255),
    "incgamma_a1": ("incgamma(a=1)", 10, 200),
    "riemann": ("riemann", 10, 200),
    "tau_k5": ("tau(k=5)", 10, 200),
    "dirichlet5_k5": ("dirichlet5(k=5)", 10, 200),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("cases", nargs="*", default=list(CASES))
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    ap.add_argument("--bits", type=int, default=256)
    args = ap.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    cfg = TraceConfig(bits=args.bits)
    for name in args.cases:
        text, n0, n_max = CASES[name]
        ckpt = os.path.join(args.out, f"{name}.json")
        t0 = time.time()

        def progress(r):
            tag = "J" if r.jumped else " "
            print(f"{name} n={r.n:4d} beta={float(r.beta):.8f} t={float(r.t):.6f} {tag} "
                  f"{r.method} {r.note} {time.time() - t0:.0f}s", flush=True)

        try:
            trace = run_trace(parse_spec(text), n0, n_max, checkpoint_every=5,
                              checkpoint=ckpt, config=cfg, progress=progress)
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            print(f"{name}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        trace.to_csv(os.path.join(args.out, f"{name}.csv"))
        print(f"{name}: {len(trace.good_rows())} rows, jumps {trace.jump_ns()}, "
              f"{time.time() - t0:.0f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
