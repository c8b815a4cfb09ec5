"""Onset (beta*, t*) for a few weights at fixed n, printed as CSV.

Usage: python3 scripts/onset_table.py [--bits 256] [--grid 16]
"""
import argparse
import time

from pochxi.afamily import parse_spec
from pochxi.rootfinder import onset_beta

CASES = [
    ("step(w=1)", 4, 0.074),
    ("riemann", 10, 3.23),
    ("bessel(a=1)", 10, 2.12),
    ("bessel(a=0.005)", 4, 0.044),
    ("incgamma(a=0.01)", 4, 0.054),
    ("tau(k=5)", 10, 1.006),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bits", type=int, default=256)
    ap.add_argument("--grid", type=int, default=16)
    args = ap.parse_args(argv)
    print("spec,n,beta,t,non_monotone,seconds")
    for text, n, guess in CASES:
        t0 = time.time()
        # bracket a factor 3 either side of a rough guess; the grid scan handles the rest
        r = onset_beta(parse_spec(text), n, guess / 3, guess * 3, tol=1e-12, bits=args.bits,
                       grid=args.grid)
        print(f'"{text}",{n},{float(r.beta):.10f},{float(r.t):.10f},{r.non_monotone},'
              f"{time.time() - t0:.1f}", flush=True)


if __name__ == "__main__":
    main()
