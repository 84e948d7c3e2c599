"""AUC of learned collaborative weights against the active spring graph, per segment.

    python scripts/graph_recovery.py --runs 2 --steps 3000
"""

import argparse
from dataclasses import replace

import numpy as np

from cognn.protocols import RecoveryProtocol, run_recovery


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--runs", type=int, default=2)
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--eta", type=float, default=None)
    ap.add_argument("--loss-scale", type=float, default=None)
    ap.add_argument("--copus", type=int, default=None)
    args = ap.parse_args()

    proto = RecoveryProtocol(runs=args.runs, steps=args.steps)
    eng = proto.engine
    for key, val in (("eta", args.eta), ("loss_scale", args.loss_scale), ("num_copus", args.copus)):
        if val is not None:
            eng = replace(eng, **{key: val})
    scores = run_recovery(replace(proto, engine=eng))
    print("per-segment AUC:", " ".join(f"{s:.3f}" for s in scores))
    print(f"mean {np.mean(scores):.3f} over {len(scores)} segments")


if __name__ == "__main__":
    main()
