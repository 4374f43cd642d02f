"""Experiment orchestration: multi-seed training runs, gain and robustness
sweeps, policy evaluation diagnostics, and comparison reports.

Every artifact (CSV, checkpoint) is a deterministic function of the
experiment spec and its seeds: reruns produce byte-identical files, and
aggregation never depends on seed order or worker scheduling.  Seeds train
in parallel worker processes; each owns its private env and trainer.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import os
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from .controllers import PARAMETRIZATIONS, TORQUE
from .ddpg import DdpgTrainer
from .envs import (ENV_IDS, HopperEnv, HopperEnvConfig, PointReachEnv,
                   UncertaintySpec, WiperEnv, WiperEnvConfig)
from .mlp import Mlp
from .persistence import (CheckpointHeader, ExperimentSpec, check_compatible,
                          dump_config, header_for, load_checkpoint,
                          load_config, read_csv, save_checkpoint, write_csv)
from .rewards import (CircleTrajectory, HopperRewardConfig,
                      TrackingPenaltyConfig, WiperRewardConfig)

# Azimuth spread of the per-seed wiping circles (golden-angle spacing keeps
# any two seeds' trajectories distinct).
_GOLDEN = 2.399963229728653

# Fraction of the best cross-parametrization score a seed must reach to
# count as converged.
CONVERGENCE_FRACTION = 0.6

ROBUSTNESS_VARIABLES = ("height", "friction", "stiffness")


def _check_keys(mapping, cls, where):
    known = {f.name for f in fields(cls)}
    for key in mapping:
        if key not in known:
            raise ValueError(f"unknown key '{where}.{key}'")


def build_env(spec: ExperimentSpec, seed: int):
    """Environment for one seeded run of an experiment."""
    uncertainty = spec.make_uncertainty()
    tracking = TrackingPenaltyConfig(k=spec.tracking_k,
                                     enabled=spec.tracking_k > 0.0)
    if spec.env == "hopper":
        _check_keys(spec.env_config, HopperEnvConfig, "env_config")
        _check_keys(spec.reward, HopperRewardConfig, "reward")
        cfg = HopperEnvConfig(**spec.env_config)
        if spec.kp is not None:
            cfg.kp_fixed = spec.kp
        return HopperEnv(spec.parametrization, config=cfg,
                         reward=HopperRewardConfig(**spec.reward),
                         uncertainty=uncertainty, tracking=tracking)
    if spec.env == "wiper":
        _check_keys(spec.env_config, WiperEnvConfig, "env_config")
        _check_keys(spec.reward, WiperRewardConfig, "reward")
        cfg = WiperEnvConfig(**spec.env_config)
        if spec.kp is not None:
            cfg.kp_fixed = spec.kp
        trajectory = CircleTrajectory()
        if spec.vary_trajectory:
            azimuth = ((seed * _GOLDEN) % 3.0) - 1.5
            reach = math.hypot(*trajectory.center)
            trajectory = replace(trajectory,
                                 center=(reach * math.cos(azimuth),
                                         reach * math.sin(azimuth)))
        return WiperEnv(spec.parametrization, config=cfg,
                        reward=WiperRewardConfig(**spec.reward),
                        uncertainty=uncertainty, tracking=tracking,
                        trajectory=trajectory)
    return PointReachEnv(spec.parametrization)


def _train_one(args):
    spec, seed = args
    env = build_env(spec, seed)
    trainer = DdpgTrainer(env, spec.make_trainer_config(), seed)
    result = trainer.train()
    return seed, result


@dataclass
class RunSummary:
    """Aggregated outcome of one experiment (all seeds)."""

    spec: ExperimentSpec
    seeds: tuple
    train_curves: np.ndarray     # (n_seeds, episodes), nan-padded on abort
    eval_curves: np.ndarray      # carried-forward eval scores
    final_scores: np.ndarray     # per-seed mean eval over the last 10%
    best_scores: np.ndarray      # per-seed best eval seen during training
    failed: np.ndarray           # per-seed abort flag
    best_checkpoints: tuple      # per-seed checkpoint paths ('' if unsaved)

    @property
    def name(self) -> str:
        return self.spec.name

    def mean_curve(self):
        return np.nanmean(self.train_curves, axis=0)

    def std_curve(self):
        return np.nanstd(self.train_curves, axis=0)

    def converged_fraction(self, threshold: float) -> float:
        ok = ~self.failed & (self.final_scores > threshold)
        return float(ok.sum()) / len(self.seeds)

    def best_seed(self) -> int:
        scores = np.where(self.failed, -np.inf, self.best_scores)
        return int(self.seeds[int(np.argmax(scores))])

    def best_checkpoint(self) -> str:
        scores = np.where(self.failed, -np.inf, self.best_scores)
        return self.best_checkpoints[int(np.argmax(scores))]


def convergence_threshold(summaries) -> float:
    """60% of the best score observed across all compared experiments."""
    best = max(float(np.nanmax(s.best_scores)) for s in summaries)
    return CONVERGENCE_FRACTION * best


def _final_score(eval_curve) -> float:
    n = len(eval_curve)
    tail = eval_curve[int(math.floor(n * 0.9)):]
    tail = tail[np.isfinite(tail)]
    return float(tail.mean()) if len(tail) else math.nan


def run_experiment(spec: ExperimentSpec, workers: int = None) -> RunSummary:
    """Train every seed of the spec, write artifacts, return the summary.

    A failing seed is recorded (nan-padded curve, failed flag), never fatal
    for the experiment.  Artifacts are byte-reproducible from (spec, seeds).
    """
    out = _out_dir(spec)
    jobs = [(spec, seed) for seed in spec.seeds]
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with mp.get_context("fork").Pool(workers) as pool:
            outcomes = dict(pool.map(_train_one, jobs))
    else:
        outcomes = dict(map(_train_one, jobs))

    results = [outcomes[seed] for seed in spec.seeds]
    episodes = max(len(r.train_scores) for r in results)
    n = len(spec.seeds)
    train = np.full((n, episodes), np.nan)
    evals = np.full((n, episodes), np.nan)
    finals = np.full(n, np.nan)
    bests = np.full(n, np.nan)
    failed = np.zeros(n, dtype=bool)
    ckpts = []
    for i, (seed, res) in enumerate(zip(spec.seeds, results)):
        train[i, :len(res.train_scores)] = res.train_scores
        evals[i, :len(res.eval_scores)] = res.eval_scores
        failed[i] = res.failed
        bests[i] = res.best_eval if math.isfinite(res.best_eval) else np.nan
        finals[i] = _final_score(res.eval_scores) if not res.failed else np.nan
        path = ""
        if out:
            path = os.path.join(out, f"seed_{seed}_best.ckpt")
            env = build_env(spec, seed)
            trainer_cfg = spec.make_trainer_config()
            header = _checkpoint_header(env, res, trainer_cfg, seed)
            save_checkpoint(path, res.best_actor_flat, header)
            write_csv(os.path.join(out, f"seed_{seed}_curve.csv"),
                      ["episode", "score", "eval_score"],
                      [[ep, res.train_scores[ep], res.eval_scores[ep]]
                       for ep in range(len(res.train_scores))])
        ckpts.append(path)

    summary = RunSummary(spec=spec, seeds=spec.seeds, train_curves=train,
                         eval_curves=evals, final_scores=finals,
                         best_scores=bests, failed=failed,
                         best_checkpoints=tuple(ckpts))
    if out:
        # The on-disk spec records the experiment, not its own location.
        dump_config(replace(spec, out_dir=""), os.path.join(out, "spec.yaml"))
        write_csv(os.path.join(out, "summary.csv"),
                  ["seed", "final_score", "best_score", "failed",
                   "aborted_at"],
                  [[seed, finals[i], bests[i], bool(failed[i]),
                    results[i].aborted_at]
                   for i, seed in enumerate(spec.seeds)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mean, std = summary.mean_curve(), summary.std_curve()
            emean = np.nanmean(evals, axis=0)
            estd = np.nanstd(evals, axis=0)
        write_csv(os.path.join(out, "curves.csv"),
                  ["episode", "mean_score", "std_score", "mean_eval",
                   "std_eval"],
                  [[ep, mean[ep], std[ep], emean[ep], estd[ep]]
                   for ep in range(episodes)])
    return summary


def _checkpoint_header(env, result, trainer_cfg, seed) -> CheckpointHeader:
    # Rebuild the actor architecture the trainer used for this env.
    sizes = (env.obs_dim, *trainer_cfg.hidden, env.action_dim)
    actor = Mlp(sizes, "tanh", "tanh",
                dtype=np.float32 if trainer_cfg.dtype == "float32"
                else np.float64)
    actor.set_flat(result.best_actor_flat)
    return header_for(env, actor, seed)


def _out_dir(spec: ExperimentSpec) -> str:
    if not spec.out_dir:
        return ""
    name = spec.name or f"{spec.env}_{spec.parametrization}"
    out = os.path.join(spec.out_dir, name)
    os.makedirs(out, exist_ok=True)
    return out


def load_summary(run_dir) -> RunSummary:
    """Rebuild a RunSummary from the artifacts run_experiment wrote."""
    spec = load_config(os.path.join(run_dir, "spec.yaml"))
    _, rows = read_csv(os.path.join(run_dir, "summary.csv"))
    seeds = tuple(int(r[0]) for r in rows)
    finals = np.array([float(r[1]) for r in rows])
    bests = np.array([float(r[2]) for r in rows])
    failed = np.array([r[3] == "True" for r in rows])
    curves, evals = [], []
    for seed in seeds:
        _, crows = read_csv(os.path.join(run_dir, f"seed_{seed}_curve.csv"))
        curves.append([float(r[1]) for r in crows])
        evals.append([float(r[2]) for r in crows])
    ckpts = tuple(os.path.join(run_dir, f"seed_{s}_best.ckpt") for s in seeds)
    return RunSummary(
        spec=spec, seeds=seeds, train_curves=np.array(curves),
        eval_curves=np.array(evals), final_scores=finals, best_scores=bests,
        failed=failed, best_checkpoints=ckpts)


def run_or_load(spec: ExperimentSpec, workers: int = None) -> RunSummary:
    """Reuse a finished run directory when its stored spec matches."""
    out = _out_dir(spec)
    marker = os.path.join(out, "summary.csv") if out else ""
    if marker and os.path.exists(marker):
        cached = load_summary(out)
        if replace(cached.spec, out_dir="") == replace(spec, out_dir=""):
            return cached
    return run_experiment(spec, workers)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def gain_sweep(base: ExperimentSpec, kp_values, workers=None):
    """Fixed-gain experiments over a list of kp values (one summary each)."""
    summaries = []
    for kp in kp_values:
        spec = replace(base, parametrization="fixed_pd", kp=float(kp),
                       name=f"{base.env}_fixed_pd_kp{kp:g}")
        summaries.append(run_experiment(spec, workers))
    if base.out_dir:
        write_csv(os.path.join(base.out_dir, "gain_sweep.csv"),
                  ["kp", "mean_final", "std_final", "n_failed"],
                  [[s.spec.kp, float(np.nanmean(s.final_scores)),
                    float(np.nanstd(s.final_scores)), int(s.failed.sum())]
                   for s in summaries])
    return summaries


_VARIABLE_FLAGS = {
    "height": ("table_height_active", "ground_height_active"),
    "friction": ("friction_active",),
    "stiffness": ("stiffness_active",),
}


def uncertainty_for_variable(env_id: str, variable: str) -> dict:
    """Uncertainty overrides randomizing exactly one declared variable."""
    if variable not in _VARIABLE_FLAGS:
        raise ValueError(f"unknown robustness variable '{variable}'")
    if env_id == "hopper":
        if variable != "height":
            raise ValueError("hopper robustness only sweeps ground height")
        return {"ground_height_active": True}
    flag = _VARIABLE_FLAGS[variable][0]
    return {flag: True}


def robustness_sweep(base: ExperimentSpec, variables=ROBUSTNESS_VARIABLES,
                     parametrizations=PARAMETRIZATIONS, workers=None):
    """One experiment per (uncertainty variable, parametrization).

    Each experiment randomizes exactly the declared variable; everything
    else stays at its midpoint default.  Returns {(variable, param):
    RunSummary} and writes the comparison grid.
    """
    grid = {}
    for variable in variables:
        unc = uncertainty_for_variable(base.env, variable)
        for param in parametrizations:
            spec = replace(
                base, parametrization=param, uncertainty=unc,
                kp=base.kp if param == "fixed_pd" else None,
                name=f"{base.env}_{variable}_{param}")
            grid[(variable, param)] = run_experiment(spec, workers)
    if base.out_dir:
        rows = []
        for (variable, param), s in sorted(grid.items()):
            rows.append([variable, param, float(np.nanmean(s.final_scores)),
                         float(np.nanstd(s.final_scores)),
                         int(s.failed.sum())])
        write_csv(os.path.join(base.out_dir, "robustness_grid.csv"),
                  ["variable", "parametrization", "mean_final", "std_final",
                   "n_failed"], rows)
    return grid


# ---------------------------------------------------------------------------
# Evaluation diagnostics
# ---------------------------------------------------------------------------


@dataclass
class EvalDiagnostics:
    checkpoint: str
    scores: np.ndarray
    episode_seeds: tuple
    tracking_error: float        # mean |q_des - q_next|, nan for torque
    contact_loss_count: float    # mean steps without required contact
    peak_force: float
    force_diff_std: float        # high-frequency content of the force trace
    trace_paths: tuple


def _contact_loss(fn_trace) -> int:
    """Steps without tool contact once contact has first been made; a trace
    with no contact at all counts every step as lost."""
    fn = np.asarray(fn_trace)
    touched = np.nonzero(fn > 0.0)[0]
    if len(touched) == 0:
        return len(fn)
    after = fn[touched[0]:]
    return int((after <= 0.0).sum())


def evaluate_policy(checkpoint_path, spec: ExperimentSpec, n_episodes: int,
                    seed: int, out_dir: str = "") -> EvalDiagnostics:
    """Noise-free rollouts of a saved policy with trace capture.

    Episode seeds derive from ``seed``; replaying any logged episode seed
    reproduces its logged score exactly.
    """
    actor, header = load_checkpoint(checkpoint_path)
    env = build_env(spec, seed)
    check_compatible(header, env)
    scales = np.asarray(header.obs_scales)
    rng = np.random.default_rng(seed)
    scores, seeds, traces = [], [], []
    track_sum, track_n = 0.0, 0
    losses, peaks, fstds = [], [], []
    for k in range(n_episodes):
        ep_seed = int(rng.integers(0, 2 ** 62))
        score, rows, fn_trace, tr_sum, tr_n, peak = _rollout(
            env, actor, scales, ep_seed)
        scores.append(score)
        seeds.append(ep_seed)
        track_sum += tr_sum
        track_n += tr_n
        losses.append(_contact_loss(fn_trace) if env.env_id == "wiper"
                      else math.nan)
        peaks.append(peak)
        dfn = np.diff(fn_trace)
        fstds.append(float(dfn.std()) if len(dfn) else 0.0)
        if out_dir and env.env_id in ("hopper", "wiper"):
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, f"trace_ep{k}.csv")
            write_csv(path, _trace_header(env), rows)
            traces.append(path)
    tracking = track_sum / track_n if track_n else math.nan
    return EvalDiagnostics(
        checkpoint=str(checkpoint_path),
        scores=np.array(scores),
        episode_seeds=tuple(seeds),
        tracking_error=tracking,
        contact_loss_count=float(np.nanmean(losses)),
        peak_force=float(np.max(peaks)),
        force_diff_std=float(np.mean(fstds)),
        trace_paths=tuple(traces),
    )


def rollout_score(env, actor, obs_scales, ep_seed: int) -> float:
    """Deterministic noise-free episode score (for replay checks)."""
    return _rollout(env, actor, np.asarray(obs_scales), ep_seed)[0]


def _trace_header(env):
    n = len(env.state.q)
    cols = ["t"]
    cols += [f"q{i}" for i in range(n)]
    cols += [f"qdot{i}" for i in range(n)]
    cols += [f"tau{i}" for i in range(env.codec.n_joints)]
    cols += [f"q_des{i}" for i in range(env.codec.n_joints)]
    cols += [f"kp{i}" for i in range(env.codec.n_joints)]
    cols += ["fn", "ft"]
    cols += list(_reward_names(env))
    return cols


def _reward_names(env):
    from .envs import HOPPER_TERMS, WIPER_TERMS
    if env.env_id == "hopper":
        return HOPPER_TERMS + ("divergence_penalty",)
    return WIPER_TERMS + ("divergence_penalty",)


def _rollout(env, actor, scales, ep_seed):
    obs = env.reset(ep_seed)
    score = 0.0
    rows = []
    fn_trace = []
    track_sum, track_n = 0.0, 0
    peak = 0.0
    nj = env.codec.n_joints
    done = False
    while not done:
        raw = actor.forward(obs / scales)
        obs, rb, done, info = env.step_raw(raw, want_info=True)
        score += rb.total
        if info is None or info.get("diverged"):
            break
        if "q" not in info:  # fixture env: score only, no trace
            continue
        fn = info.get("fn", 0.0)
        fn_trace.append(fn)
        peak = max(peak, info.get("peak_force", fn))
        if info.get("q_des") is not None:
            nq = len(info["q_des"])
            err = info["q_des"] - info["q"][-nq:]
            track_sum += float(np.linalg.norm(err))
            track_n += 1
        q_des = info.get("q_des")
        kp = info.get("kp")
        row = ([info["t"] * env.cfg.control_dt]
               + list(info["q"]) + list(info["qdot"]) + list(info["tau"])
               + (list(q_des) if q_des is not None else [math.nan] * nj)
               + (list(kp) if kp is not None else [math.nan] * nj)
               + [fn, info.get("ft", 0.0)]
               + [rb.terms[name] for name in _reward_names(env)])
        rows.append(row)
    return score, rows, fn_trace, track_sum, track_n, peak


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def report(summaries, out_dir):
    """Comparison artifacts for a set of experiments: CSV tables plus static
    SVG plots (mean +- std learning curves, per-seed final score scatter)."""
    if not summaries:
        raise ValueError("report needs at least one summary")
    os.makedirs(out_dir, exist_ok=True)
    threshold = convergence_threshold(summaries)
    rows = []
    for s in summaries:
        rows.append([s.name, s.spec.parametrization,
                     float(np.nanmean(s.final_scores)),
                     float(np.nanstd(s.final_scores)),
                     float(np.nanmax(s.best_scores)),
                     s.converged_fraction(threshold),
                     int(s.failed.sum()), threshold])
    write_csv(os.path.join(out_dir, "comparison.csv"),
              ["experiment", "parametrization", "mean_final", "std_final",
               "best", "converged_fraction", "n_failed", "threshold"], rows)

    scatter_rows = []
    for s in summaries:
        for seed, score in zip(s.seeds, s.final_scores):
            scatter_rows.append([s.name, seed, score])
    write_csv(os.path.join(out_dir, "final_scores.csv"),
              ["experiment", "seed", "final_score"], scatter_rows)

    curve_rows = []
    for s in summaries:
        mean, std = s.mean_curve(), s.std_curve()
        for ep in range(len(mean)):
            curve_rows.append([s.name, ep, mean[ep], std[ep]])
    write_csv(os.path.join(out_dir, "learning_curves.csv"),
              ["experiment", "episode", "mean_score", "std_score"],
              curve_rows)
    _plot_curves(summaries, os.path.join(out_dir, "learning_curves.svg"))
    _plot_scatter(summaries, os.path.join(out_dir, "final_scores.svg"))
    return os.path.join(out_dir, "comparison.csv")


def _mpl():
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "impedrl"
    import matplotlib.pyplot as plt
    return plt


def _plot_curves(summaries, path):
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(7, 4))
    for s in summaries:
        mean, std = s.mean_curve(), s.std_curve()
        eps = np.arange(len(mean))
        ax.plot(eps, mean, label=s.name)
        ax.fill_between(eps, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel("episode")
    ax.set_ylabel("score")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _plot_scatter(summaries, path):
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, s in enumerate(summaries):
        xs = np.full(len(s.seeds), i)
        ax.scatter(xs, s.final_scores, s=14)
    ax.set_xticks(range(len(summaries)))
    ax.set_xticklabels([s.name for s in summaries], rotation=30, ha="right",
                       fontsize=7)
    ax.set_ylabel("final score")
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def plot_robustness(grid, path):
    """Bar chart of mean final scores per (variable, parametrization)."""
    plt = _mpl()
    variables = sorted({v for v, _ in grid})
    params = sorted({p for _, p in grid})
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(params)
    for j, param in enumerate(params):
        xs = np.arange(len(variables)) + j * width
        ys = [float(np.nanmean(grid[(v, param)].final_scores))
              for v in variables]
        ax.bar(xs, ys, width=width, label=param)
    ax.set_xticks(np.arange(len(variables)) + 0.4 - width / 2)
    ax.set_xticklabels(variables)
    ax.set_ylabel("mean final score")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
