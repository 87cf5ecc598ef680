"""Grid refinement study: heat-oracle error and null-control residual versus (N, M).

    python3 scripts/refinement.py --levels 4
"""
import argparse

import numpy as np

from degdelay.hum import synthesize_null_control
from degdelay.model import Grid, norm_h, power_law_problem
from degdelay.verify import heat_error


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--N0", type=int, default=25)
    ap.add_argument("--epsilon", type=float, default=1e-6)
    args = ap.parse_args()

    print("heat oracle, M refined 4x per 2x in N:")
    prev = None
    for k in range(args.levels):
        N = args.N0 * 2 ** k
        M = 10 * N * 2 ** k
        e = heat_error(N, M)
        rate = "" if prev is None else f"  reduction={prev / e:.2f}"
        print(f"  N={N:4d} M={M:6d} error={e:.3e}{rate}")
        prev = e

    print("null control, alpha=0.5, omega=(0.3,0.8):")
    p = power_law_problem(0.5, h=0.25, T=0.5, omega=(0.3, 0.8))
    for k in range(args.levels):
        N = args.N0 * 2 ** k
        g = Grid.for_problem(p, N, N)
        y0 = np.sin(np.pi * g.x)
        r = synthesize_null_control(p, g, y0, epsilon=args.epsilon)
        print(f"  N=M={N:4d} |y(T)|/|y0|={r.terminal_norm / norm_h(y0, g):.3e} |u|/|data|={r.ratio:.3e} "
              f"cg={r.cg_iterations}")


if __name__ == "__main__":
    main()
