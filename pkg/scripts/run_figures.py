"""Run the shipped sweep configurations and write one CSV per figure.

Usage: python3 scripts/run_figures.py [config ...] [--outdir results] [--threads N]
Without arguments every configs/*.ini is run.
"""

import argparse
import sys
from pathlib import Path

from esr_diqkd.cli import main as simulate

ROOT = Path(__file__).resolve().parents[1]


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("configs", nargs="*", type=Path)
    parser.add_argument("--outdir", type=Path, default=ROOT / "results")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    configs = args.configs or sorted((ROOT / "configs").glob("*.ini"))
    worst = 0
    for cfg in configs:
        out = args.outdir / f"{cfg.stem}.csv"
        print(f"== {cfg.name} -> {out}", file=sys.stderr, flush=True)
        code = simulate([str(cfg), "--output", str(out), "--threads", str(args.threads)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run())
