"""Learning-rate and unit-count sweeps through the CLI driver.

    python scripts/sweeps.py --out results/sweeps --steps 3000
"""

import argparse
from pathlib import Path

from cognn.cli import build_settings, cmd_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results/sweeps")
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--runs", type=int, default=1)
    args = ap.parse_args()

    settings = build_settings({"max_steps": str(args.steps), "runs": str(args.runs), "snapshot_every": "0"})
    for which in ("eta", "num_copus"):
        cmd_sweep(settings, Path(args.out), which)


if __name__ == "__main__":
    main()
