"""Learned vs frozen graph and K=1 vs K=2 on seeded spring runs.

    python scripts/ablation.py --runs 10 --steps 3000 --out results/ablation.csv
"""

import argparse
import time
from dataclasses import replace

from cognn.dataio import write_rows
from cognn.protocols import AblationProtocol, run_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--eta", type=float, default=None)
    ap.add_argument("--loss-scale", type=float, default=None)
    ap.add_argument("--ar-order", type=int, default=None)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    proto = AblationProtocol(runs=args.runs, steps=args.steps)
    overrides = {k: v for k, v in (("eta", args.eta), ("loss_scale", args.loss_scale), ("ar_order", args.ar_order)) if v is not None}
    if overrides:
        proto = replace(proto, engine=replace(proto.engine, **overrides))

    t0 = time.perf_counter()
    res = run_ablation(proto, progress=lambda r, name, v: print(f"run {r} {name:11s} mse@{proto.horizon} {v:.4f}", flush=True))
    means = {k: float(v.mean()) for k, v in res.items()}
    gain = 1.0 - means["learned_k2"] / means["frozen_k2"]
    print(f"means: {means}")
    print(f"learned vs frozen improvement: {100 * gain:.2f}%   K2 <= K1: {means['learned_k2'] <= means['learned_k1']}")
    print(f"elapsed {time.perf_counter() - t0:.0f}s")
    if args.out:
        rows = [(r, name, float(v[r])) for name, v in res.items() for r in range(len(v))]
        write_rows(args.out, ("run", "variant", f"mse_h{proto.horizon}"), rows)


if __name__ == "__main__":
    main()
