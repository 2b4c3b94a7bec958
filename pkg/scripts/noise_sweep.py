"""Merge error and bytes against odometry noise, averaged over seeds, for both feature widths."""

import argparse
import json
from dataclasses import replace

import numpy as np

from cograph.codec import Codec
from cograph.metrics import format_table
from cograph.sim.scenario import ScenarioConfig, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="two_robot_apartment.json")
    ap.add_argument("--codec", required=True)
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.02, 0.05, 0.1])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--json", help="also write the raw results here")
    args = ap.parse_args()

    base = ScenarioConfig.load(args.scenario)
    codec = Codec.load(args.codec)
    rows, raw = [], []
    for mode, dim in (("compressed", 3), ("raw-512", 512)):
        for sigma in args.noise:
            errs, sizes, fails = [], [], 0
            for seed in range(args.seeds):
                cfg = replace(base, transmit_mode=mode, pose_noise=sigma, seed=seed)
                res = run_scenario(cfg, codec)
                sizes.append(res.stats.total)
                if res.metrics.t_error is None:
                    fails += 1
                else:
                    errs.append(res.metrics.t_error)
                raw.append({"mode": mode, "pose_noise": sigma, "seed": seed,
                            "t_error": res.metrics.t_error, "bytes": res.stats.total,
                            "R_obj": res.metrics.r_obj, "R@1": res.metrics.r_at_1})
            rows.append({"scene": base.name, "dimension": dim,
                         "pose": "GT" if sigma == 0 else f"noise{sigma:g}",
                         "t_error": float(np.mean(errs)) if errs else None,
                         "bytes": float(np.mean(sizes))})
            if fails:
                print(f"{mode} sigma={sigma:g}: no merge in {fails}/{args.seeds} seeds")
    print(format_table(rows), end="")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(raw, fh, indent=2)


if __name__ == "__main__":
    main()
