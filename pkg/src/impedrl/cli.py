"""Command-line front end: train / sweep / eval / report.

A ``--config`` file, when given, is loaded as the experiment spec and takes
precedence over the corresponding flags.  All units are SI.  With
``--strict`` the exit code is nonzero if any seed failed.
"""

import os

# Single-threaded BLAS before numpy loads: seed-level parallelism plus
# reproducible artifacts.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import sys  # noqa: E402

import numpy as np  # noqa: E402

from . import harness  # noqa: E402
from .persistence import ExperimentSpec, load_config  # noqa: E402


def _parse_seeds(text):
    return tuple(int(s) for s in text.split(",") if s.strip())


def _spec_from_args(args) -> ExperimentSpec:
    if args.config:
        return load_config(args.config)
    kwargs = dict(
        env=args.env,
        parametrization=args.parametrization,
        tracking_k=args.tracking_k,
        seeds=_parse_seeds(args.seeds),
        out_dir=args.out,
    )
    if args.kp is not None:
        kwargs["kp"] = args.kp
    if getattr(args, "episodes", None) is not None and args.command != "eval":
        kwargs["episodes"] = args.episodes
    if args.name:
        kwargs["name"] = args.name
    if args.randomize:
        kwargs["uncertainty"] = harness.uncertainty_for_variable(
            args.env, args.randomize)
    return ExperimentSpec(**kwargs)


def _add_spec_flags(p, training=True):
    p.add_argument("--config", help="experiment spec file (overrides flags)")
    p.add_argument("--env", choices=("hopper", "wiper", "reach"),
                   default="hopper")
    p.add_argument("--parametrization",
                   choices=("torque", "fixed_pd", "variable_pd"),
                   default="variable_pd")
    p.add_argument("--kp", type=float, default=None,
                   help="fixed-gain stiffness (fixed_pd only)")
    p.add_argument("--tracking-k", type=float, default=0.0,
                   help="trajectory-tracking penalty weight (0 disables)")
    p.add_argument("--seeds", default="0,1,2,3")
    if training:
        p.add_argument("--episodes", type=int, default=None,
                       help="training episodes per seed")
    p.add_argument("--out", default="runs")
    p.add_argument("--name", default="")
    p.add_argument("--randomize",
                   choices=("height", "friction", "stiffness"), default=None,
                   help="enable uncertainty on one contact variable")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--strict", action="store_true")


def _exit_code(summaries, strict) -> int:
    failed = sum(int(s.failed.sum()) for s in summaries)
    if failed:
        print(f"{failed} seed(s) failed")
        if strict:
            return 1
    return 0


def cmd_train(args) -> int:
    spec = _spec_from_args(args)
    summary = harness.run_experiment(spec, workers=args.workers)
    mean = float(np.nanmean(summary.final_scores))
    print(f"{summary.name or spec.env}: mean final score {mean:.2f} over "
          f"{len(spec.seeds)} seed(s)")
    return _exit_code([summary], args.strict)


def cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    if args.variable == "kp":
        values = [float(v) for v in args.kp_values.split(",")]
        base = spec if spec.parametrization == "fixed_pd" else \
            ExperimentSpec(**{**_spec_dict(spec),
                              "parametrization": "fixed_pd", "kp": values[0]})
        summaries = harness.gain_sweep(base, values, workers=args.workers)
        for s in summaries:
            print(f"kp={s.spec.kp:g}: mean final "
                  f"{float(np.nanmean(s.final_scores)):.2f}")
        return _exit_code(summaries, args.strict)
    grid = harness.robustness_sweep(spec, variables=(args.variable,),
                                    workers=args.workers)
    for (variable, param), s in sorted(grid.items()):
        print(f"{variable}/{param}: mean final "
              f"{float(np.nanmean(s.final_scores)):.2f}")
    if spec.out_dir:
        harness.plot_robustness(
            grid, os.path.join(spec.out_dir, "robustness.svg"))
    return _exit_code(list(grid.values()), args.strict)


def _spec_dict(spec):
    import dataclasses
    d = dataclasses.asdict(spec)
    d.pop("kp", None)
    return d


def cmd_eval(args) -> int:
    spec = _spec_from_args(args)
    diag = harness.evaluate_policy(args.checkpoint, spec, args.episodes,
                                   seed=args.seed, out_dir=args.out)
    print(f"score: {diag.scores.mean():.2f} +- {diag.scores.std():.2f}")
    track = ("n/a" if not np.isfinite(diag.tracking_error)
             else f"{diag.tracking_error:.4f}")
    print(f"tracking error: {track}")
    if np.isfinite(diag.contact_loss_count):
        print(f"contact-loss steps: {diag.contact_loss_count:.1f}")
    print(f"peak force: {diag.peak_force:.1f} N")
    print(f"force first-difference std: {diag.force_diff_std:.3f} N")
    return 0


def cmd_report(args) -> int:
    import glob
    summaries = []
    for root in args.inputs:
        for spec_path in sorted(glob.glob(os.path.join(root, "*", "spec.yaml"))):
            summaries.append(harness.load_summary(os.path.dirname(spec_path)))
    if not summaries:
        print("no experiment directories found", file=sys.stderr)
        return 1
    path = harness.report(summaries, args.out)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="impedrl",
        description="Contact-rich RL action-space comparison workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one experiment")
    _add_spec_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="gain or robustness sweep")
    _add_spec_flags(p_sweep)
    p_sweep.add_argument("--variable", required=True,
                         choices=("kp", "height", "friction", "stiffness"))
    p_sweep.add_argument("--kp-values", default="1,3,5,8,10")
    p_sweep.set_defaults(func=cmd_sweep)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_spec_flags(p_eval, training=False)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=5,
                        help="number of noise-free evaluation episodes")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_eval)

    p_report = sub.add_parser("report", help="aggregate run directories")
    p_report.add_argument("--in", dest="inputs", nargs="+", required=True)
    p_report.add_argument("--out", default="report")
    p_report.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
