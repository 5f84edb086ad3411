"""Regenerate the spatial and temporal error tables as CSV files.

Usage: python3 scripts/reproduce_tables.py [--out results] [--quick]

--quick uses a coarser reference (r=3, N_x=200, N_t=500) and fewer levels.
"""

import argparse
import os
import time
from dataclasses import replace

from acmbp import experiments as ex

HORIZONS = (0.01, 0.05)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    nx, nt = (200, 500) if args.quick else (400, 1000)
    space_levels = (10, 20, 40, 80) if args.quick else ex.SPACE_LEVELS
    time_levels = (10, 20, 40, 80, 160) if args.quick else ex.TIME_LEVELS
    os.makedirs(args.out, exist_ok=True)

    for T in HORIZONS:
        t0 = time.perf_counter()
        ref3 = ex.make_reference(T, args.eps, os.path.join(args.out, f"ref_T{T}_r3.csv"), r=3, nx=nx, nt=nt)
        ref1 = ex.make_reference(T, args.eps, os.path.join(args.out, f"ref_T{T}_r1.csv"), r=1, nx=nx, nt=nt)
        print(f"T={T}: references ready in {time.perf_counter() - t0:.1f}s")
        base = ex.RunConfig(scheme="rk", tableau="gl3", T=T, eps=args.eps)

        for r in (1, 2, 3):
            path = os.path.join(args.out, f"space_T{T}_r{r}.csv")
            res = ex.convergence_sweep("space", replace(base, r=r), ref3, space_levels, path)
            print(f"  space r={r}: " + " ".join(f"{e:.2e}" for e in res.table.errors) + f"  rate {res.table.headline:.2f}")

        for kind, ref, r in (("rk", ref3, 3), ("sav", ref1, 1)):
            for name in ("gl1", "gl2", "gl3"):
                path = os.path.join(args.out, f"time_{kind}_T{T}_{name}.csv")
                cfg = replace(base, scheme=kind, tableau=name, r=r)
                res = ex.convergence_sweep("time", cfg, ref, time_levels, path)
                tab = res.table
                print(
                    f"  time {kind} {name}: " + " ".join(f"{e:.2e}" for e in tab.errors)
                    + f"  rate {tab.headline:.2f} (fit {tab.mean_rate(3):.2f})"
                )


if __name__ == "__main__":
    main()
