"""Hopper parametrization comparison: torque vs fixed-gain PD (at a chosen
kp) vs variable-gain PD, all under mid-episode ground-height randomization.

    python3 scripts/run_hopper_comparison.py --kp 5 --out runs/hopper_cmp
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
    ap.add_argument("--out", default="runs/hopper_cmp")
    ap.add_argument("--kp", type=float, default=5.0,
                    help="fixed-gain value (use the gain-sweep winner)")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--episodes", type=int, default=600)
    ap.add_argument("--tracking-k", type=float, default=0.0)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    summaries = []
    for param in ("torque", "fixed_pd", "variable_pd"):
        spec = ExperimentSpec(
            env="hopper", parametrization=param,
            kp=args.kp if param == "fixed_pd" else None,
            tracking_k=args.tracking_k,
            seeds=tuple(range(args.seeds)), episodes=args.episodes,
            uncertainty={"ground_height_active": True},
            out_dir=args.out, name=f"hopper_{param}")
        summaries.append(harness.run_experiment(spec, workers=args.workers))

    threshold = harness.convergence_threshold(summaries)
    for s in summaries:
        mean = float(np.nanmean(s.final_scores))
        conv = s.converged_fraction(threshold)
        print(f"{s.spec.parametrization:12s}: final {mean:8.1f}, "
              f"converged {conv:.2f}")
    harness.report(summaries, os.path.join(args.out, "report"))


if __name__ == "__main__":
    main()
