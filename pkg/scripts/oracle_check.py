"""Compare every ESR click-pattern probability between the Gaussian engine and the Fock oracle.

Usage: python3 scripts/oracle_check.py [--draws 10] [--seed 0] [--mu-max 0.05]
"""

import argparse
import sys
import time

import numpy as np

from esr_diqkd.crosscheck import esr_difference, random_esr_case


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--draws", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mu-max", type=float, default=0.05)
    parser.add_argument("--tol", type=float, default=1e-6)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    t0 = time.perf_counter()
    for k in range(args.draws):
        case = random_esr_case(rng, args.mu_max)
        diff = esr_difference(*case)
        worst = max(worst, diff)
        print(f"draw {k}: max |gaussian - fock| = {diff:.3e}")
    print(f"worst {worst:.3e} over {args.draws} draws in {time.perf_counter() - t0:.1f} s (tolerance {args.tol:g})")
    return 0 if worst < args.tol else 1


if __name__ == "__main__":
    sys.exit(main())
