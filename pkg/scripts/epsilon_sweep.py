"""Penalized-HUM sweep over epsilon for several delay-coefficient profiles.

    python3 scripts/epsilon_sweep.py --N 100 --M 100 --out out/sweep.csv
"""
import argparse

import numpy as np

from degdelay.hum import epsilon_sweep
from degdelay.io import write_rows
from degdelay.model import Constant, DelayProblem, FlatDecay, Grid, Indicator, norm_h, power_law_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--N", type=int, default=100)
    ap.add_argument("--M", type=int, default=100)
    ap.add_argument("--h", type=float, default=0.25)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--epsilons", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()

    omega = (0.3, 0.8)
    base = power_law_problem(args.alpha, h=args.h, T=args.T, omega=omega)
    profiles = {"none": Constant(0.0), "omega": Indicator(Constant(1.0), *omega), "flat": FlatDecay(args.T),
                "const": Constant(1.0)}
    rows = []
    for name, c in profiles.items():
        p = DelayProblem(base.a, Constant(0.0), c, args.h, args.T, omega)
        g = Grid.for_problem(p, args.N, args.M)
        y0 = np.sin(np.pi * g.x)
        for r in epsilon_sweep(p, g, y0, epsilons=args.epsilons):
            row = [name, r.epsilon, r.terminal_norm / norm_h(y0, g), r.ratio, r.cg_iterations]
            rows.append(row)
            print(f"{name:6s} eps={r.epsilon:.0e}  |y(T)|/|y0|={row[2]:.3e}  |u|/|data|={r.ratio:.3e}  "
                  f"cg={r.cg_iterations}")
    if args.out:
        write_rows(args.out, ["profile", "epsilon", "terminal_ratio", "control_ratio", "cg_iterations"], rows)


if __name__ == "__main__":
    main()
