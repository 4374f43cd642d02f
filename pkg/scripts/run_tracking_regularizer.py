"""Effect of the command-consistency (trajectory-tracking) penalty on
hopper policies: trains fixed- and variable-gain policies with and without
the penalty, then compares the per-step |q_des - q_next| of the best
policies and their scores.

    python3 scripts/run_tracking_regularizer.py --out runs/tracking
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
    ap.add_argument("--out", default="runs/tracking")
    ap.add_argument("--kp", type=float, default=5.0)
    ap.add_argument("--tracking-k", type=float, default=1.0)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--episodes", type=int, default=600)
    ap.add_argument("--eval-episodes", type=int, default=5)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    results = {}
    for param in ("fixed_pd", "variable_pd"):
        for k in (0.0, args.tracking_k):
            spec = ExperimentSpec(
                env="hopper", parametrization=param,
                kp=args.kp if param == "fixed_pd" else None,
                tracking_k=k, seeds=tuple(range(args.seeds)),
                episodes=args.episodes,
                uncertainty={"ground_height_active": True},
                out_dir=args.out, name=f"hopper_{param}_k{k:g}")
            summary = harness.run_experiment(spec, workers=args.workers)
            diag = harness.evaluate_policy(
                summary.best_checkpoint(), spec, args.eval_episodes, seed=777,
                out_dir=os.path.join(args.out, f"eval_{param}_k{k:g}"))
            results[(param, k)] = (summary, diag)
            print(f"{param} k={k:g}: score {diag.scores.mean():8.1f}, "
                  f"tracking error {diag.tracking_error:.4f}")

    for param in ("fixed_pd", "variable_pd"):
        base = results[(param, 0.0)][1]
        reg = results[(param, args.tracking_k)][1]
        ratio = reg.tracking_error / base.tracking_error
        print(f"{param}: tracking-error ratio (k>0 / k=0) = {ratio:.3f}")


if __name__ == "__main__":
    main()
