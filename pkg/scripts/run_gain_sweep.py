"""Fixed-gain sweep on the hopper: trains fixed_pd policies over a range of
kp values with mid-episode ground-height randomization, then reports the
score-vs-gain curve.  The best value feeds the parametrization comparison.

    python3 scripts/run_gain_sweep.py --out runs/gain_sweep
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
    ap.add_argument("--out", default="runs/gain_sweep")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--episodes", type=int, default=600)
    ap.add_argument("--kp-values", default="1,3,5,8,10")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    base = ExperimentSpec(
        env="hopper", parametrization="fixed_pd", kp=5.0,
        seeds=tuple(range(args.seeds)), episodes=args.episodes,
        uncertainty={"ground_height_active": True}, out_dir=args.out)
    values = [float(v) for v in args.kp_values.split(",")]
    summaries = harness.gain_sweep(base, values, workers=args.workers)
    best = max(summaries, key=lambda s: np.nanmean(s.final_scores))
    for s in summaries:
        mean = float(np.nanmean(s.final_scores))
        std = float(np.nanstd(s.final_scores))
        print(f"kp={s.spec.kp:5.1f}: final {mean:8.1f} +- {std:.1f}")
    print(f"best kp: {best.spec.kp:g}")
    harness.report(summaries, os.path.join(args.out, "report"))


if __name__ == "__main__":
    main()
