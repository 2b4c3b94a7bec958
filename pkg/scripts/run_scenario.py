"""Run a scenario in both transmit modes and print bytes, merge error and retrieval."""

import argparse
from dataclasses import replace

from cograph.codec import Codec
from cograph.metrics import format_table
from cograph.sim.scenario import ScenarioConfig, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="two_robot_apartment.json")
    ap.add_argument("--codec", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pose-noise", type=float, default=0.0)
    args = ap.parse_args()

    cfg = replace(ScenarioConfig.load(args.scenario), seed=args.seed, pose_noise=args.pose_noise)
    codec = Codec.load(args.codec)
    rows, totals = [], {}
    for mode, dim in (("compressed", 3), ("raw-512", 512)):
        res = run_scenario(replace(cfg, transmit_mode=mode), codec)
        m = res.metrics
        totals[mode] = res.stats.total
        print(f"{mode:>10}: R_obj {m.r_obj:.2f}  R@1 {m.r_at_1:.2f}  R@5 {m.r_at_5:.2f}  "
              f"nodes {m.nodes}  merges {sum(e.success for e in res.events)}/{len(res.events)}")
        rows.append({"scene": cfg.name, "dimension": dim,
                     "pose": "GT" if cfg.pose_noise == 0 else f"noise{cfg.pose_noise:g}",
                     "t_error": m.t_error, "bytes": res.stats.total})
    print()
    print(format_table(rows), end="")
    print(f"byte reduction: {100 * (1 - totals['compressed'] / totals['raw-512']):.2f}%")


if __name__ == "__main__":
    main()
