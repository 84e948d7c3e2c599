"""Static regret and its closed-form bound along one stream.

    python scripts/regret_curve.py --agents 5 --eta 0.1 --steps 4500 --out results/regret.csv
"""

import argparse

from cognn.core import EngineConfig
from cognn.dataio import write_rows
from cognn.experiment import regret_curve, run_online, simulate_table
from cognn.simulator import SimSchedule


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--agents", type=int, default=5)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--steps", type=int, default=4500)
    ap.add_argument("--loss-scale", type=float, default=1e-3)
    ap.add_argument("--every", type=int, default=100)
    ap.add_argument("--run", type=int, default=0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    table, _ = simulate_table(SimSchedule(n=args.agents), args.run, 0)
    cfg = EngineConfig(num_agents=args.agents, eta=args.eta, num_copus=1, loss_scale=args.loss_scale, init_scale=0.0)
    res = run_online(cfg, table, max_steps=args.steps, normalize="global", normalize_scale=0.2,
                     snapshot_every=0, regret_every=args.every)
    curve = regret_curve(res)
    for t, r, b in curve:
        print(f"T={t:5d}  mean regret {r: .5f}  bound {b:.4f}")
    if args.out:
        write_rows(args.out, ("T", "mean_regret", "bound"), curve)


if __name__ == "__main__":
    main()
