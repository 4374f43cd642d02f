"""Wiping-task robustness sweeps: for each contact uncertainty (table
height, friction, stiffness) train all three parametrizations with only
that variable randomized, then tabulate mean final scores and contact
quality diagnostics of the best policies.

    python3 scripts/run_wiper_robustness.py --out runs/wiper
"""

import argparse
import os
import sys

for _v in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_v, "1")

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np  # noqa: E402

from impedrl import harness  # noqa: E402
from impedrl.persistence import ExperimentSpec  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/wiper")
    ap.add_argument("--kp", type=float, default=5.0)
    ap.add_argument("--seeds", type=int, default=6)
    ap.add_argument("--episodes", type=int, default=800)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    base = ExperimentSpec(
        env="wiper", parametrization="fixed_pd", kp=args.kp,
        seeds=tuple(range(args.seeds)), episodes=args.episodes,
        out_dir=args.out)
    grid = harness.robustness_sweep(base, workers=args.workers)

    for variable in harness.ROBUSTNESS_VARIABLES:
        print(f"--- {variable} randomized ---")
        for param in ("torque", "fixed_pd", "variable_pd"):
            s = grid[(variable, param)]
            print(f"  {param:12s}: final "
                  f"{float(np.nanmean(s.final_scores)):8.1f} "
                  f"+- {float(np.nanstd(s.final_scores)):.1f}")
    harness.plot_robustness(grid, os.path.join(args.out, "robustness.svg"))

    print("--- contact diagnostics (best height-sweep policies) ---")
    for param in ("torque", "fixed_pd", "variable_pd"):
        s = grid[("height", param)]
        diag = harness.evaluate_policy(
            s.best_checkpoint(), s.spec, n_episodes=5, seed=999,
            out_dir=os.path.join(args.out, f"diag_{param}"))
        print(f"  {param:12s}: contact-loss {diag.contact_loss_count:6.1f}, "
              f"force diff std {diag.force_diff_std:.3f}")


if __name__ == "__main__":
    main()
