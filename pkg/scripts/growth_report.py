"""Growth-law fits of the shipped traces, plus the jump predictor for the step weight.

Usage: python3 scripts/growth_report.py [--data DIR] [--n-lo 10] [--n-hi 200]
"""
import argparse
import os

from pochxi.asymptotics import MODELS, fit, growth_class, solve_u_equation
from pochxi.betatrace import BetaTrace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    ap.add_argument("--n-lo", type=int, default=10)
    ap.add_argument("--n-hi", type=int, default=200)
    args = ap.parse_args(argv)

    names = sorted(f[:-5] for f in os.listdir(args.data) if f.endswith(".json"))
    print("trace,rows,jumps,c,class," + ",".join(f"r2_{m}" for m in MODELS))
    for name in names:
        tr = BetaTrace.load(os.path.join(args.data, f"{name}.json"))
        rng = (args.n_lo, args.n_hi)
        fits = {m: fit(tr, m, rng) for m in MODELS}
        c = fits["log_power"].params["c"]
        jumps = " ".join(map(str, tr.jump_ns()))
        r2 = ",".join(f"{fits[m].r2:.7f}" for m in MODELS)
        print(f"{name},{len(tr.good_rows())},{jumps},{c:.4f},{growth_class(c)},{r2}")

    s = solve_u_equation(1.12)
    print(f"\nu* = {s.u_star:.5f}  n0 = {s.n0:.5f}  jump ratio = {s.jump_ratio:.5f}")
    print("predicted jump n:", " ".join(f"{x:.1f}" for x in s.jump_ns(6)))


if __name__ == "__main__":
    main()
