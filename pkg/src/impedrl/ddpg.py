"""Off-policy actor-critic trainer: deterministic actor, learned critic,
uniform replay, slowly tracking target networks, additive exploration noise.

The trainer is deliberately plain: nothing here exploits a particular
algorithmic detail, so swapping the update rules for another off-policy
learner would not disturb the rest of the workbench.  A run is fully
determined by (env, config, seed); training is single threaded and
bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mlp import Adam, Mlp, Sgd, soft_update


@dataclass
class TrainerConfig:
    gamma: float = 0.99
    polyak: float = 0.005
    actor_lr: float = 5e-4
    critic_lr: float = 1e-3
    batch_size: int = 128
    buffer_capacity: int = 200_000
    warmup_steps: int = 1000
    updates_per_step: float = 1.0
    noise_scale: float = 0.3
    noise_final: float = 0.05
    noise_type: str = "gaussian"  # or "ou"
    ou_theta: float = 0.15
    episodes: int = 600
    eval_every: int = 10
    eval_episodes: int = 2
    hidden: tuple = (64, 64)
    optimizer: str = "adam"
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not 0.0 < self.polyak <= 1.0:
            raise ValueError("polyak must be in (0, 1]")
        for name in ("actor_lr", "critic_lr"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("batch_size", "buffer_capacity", "episodes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_type not in ("gaussian", "ou"):
            raise ValueError("noise_type must be 'gaussian' or 'ou'")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")


@dataclass
class Transition:
    """One replay record; the action is the raw pre-codec vector."""

    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform batch sampling
    (without replacement within a batch)."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int,
                 dtype=np.float64):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.act = np.zeros((capacity, act_dim), dtype=dtype)
        self.rew = np.zeros(capacity, dtype=dtype)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.done = np.zeros(capacity, dtype=dtype)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def add(self, tr: Transition):
        if not math.isfinite(tr.reward):
            raise ValueError("non-finite reward")
        i = self._head
        self.obs[i] = tr.obs
        self.act[i] = tr.action
        self.rew[i] = tr.reward
        self.next_obs[i] = tr.next_obs
        self.done[i] = 1.0 if tr.terminal else 0.0
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng, batch_size: int):
        if self.size < batch_size:
            raise ValueError("not enough transitions to sample a batch")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.done[idx])


@dataclass
class TrainResult:
    seed: int
    train_scores: np.ndarray
    eval_scores: np.ndarray       # last seen eval score, carried forward
    best_eval: float
    best_actor_flat: np.ndarray
    final_actor_flat: np.ndarray
    failed: bool = False
    aborted_at: int = -1          # episode index of the abort, -1 if none
    env_steps: int = 0


class DdpgTrainer:
    """One training run on one environment instance."""

    def __init__(self, env, cfg: TrainerConfig, seed: int):
        self.env = env
        self.cfg = cfg
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        obs_dim = env.obs_dim
        act_dim = env.action_dim
        dtype = np.float32 if cfg.dtype == "float32" else np.float64
        sizes = (obs_dim, *cfg.hidden, act_dim)
        self.actor = Mlp(sizes, "tanh", "tanh", rng=self.rng, dtype=dtype)
        csizes = (obs_dim + act_dim, *cfg.hidden, 1)
        self.critic = Mlp(csizes, "tanh", "identity", rng=self.rng,
                          dtype=dtype)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        opt = Adam if cfg.optimizer == "adam" else Sgd
        self.opt_actor = opt(self.actor, cfg.actor_lr)
        self.opt_critic = opt(self.critic, cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, obs_dim, act_dim,
                                   dtype=dtype)
        self.obs_scales = np.asarray(env.obs_scales, dtype=dtype)
        self.env_steps = 0
        self._ou_state = np.zeros(act_dim)

    # -- policy ------------------------------------------------------------

    def greedy_action(self, obs):
        return self.actor.forward(np.asarray(obs) / self.env.obs_scales)

    def _noisy_action(self, obs_n, sigma):
        a = self.actor.forward(obs_n)
        if sigma > 0.0:
            if self.cfg.noise_type == "gaussian":
                a = a + sigma * self.rng.standard_normal(a.shape)
            else:
                self._ou_state += (-self.cfg.ou_theta * self._ou_state
                                   + sigma * self.rng.standard_normal(a.shape))
                a = a + self._ou_state
        return np.clip(a, -1.0, 1.0)

    # -- updates -----------------------------------------------------------

    def td_targets(self, rew, next_obs_n, done):
        """Bootstrap targets: y = r + gamma * (1 - terminal) * Q'(s', mu'(s'));
        terminal transitions use y = r exactly.  Observations arrive already
        normalized (the buffer stores them that way)."""
        a_next = self.actor_target.forward(next_obs_n)
        q_next = self.critic_target.forward(
            np.concatenate([next_obs_n, a_next], axis=1))[:, 0]
        return rew + self.cfg.gamma * (1.0 - done) * q_next

    def critic_update(self, batch) -> float:
        obs_n, act, rew, next_obs_n, done = batch
        y = self.td_targets(rew, next_obs_n, done)
        q = self.critic.forward(np.concatenate([obs_n, act], axis=1))[:, 0]
        err = q - y
        n = len(err)
        self.critic.backward((2.0 * err / n).reshape(-1, 1))
        self.opt_critic.step(self.critic)
        return float(np.mean(err * err))

    def actor_update(self, batch) -> float:
        obs_n = batch[0]
        a = self.actor.forward(obs_n)
        x = np.concatenate([obs_n, a], axis=1)
        q = self.critic.forward(x)
        n = len(q)
        # Ascend mean Q through the critic; critic parameters stay put.
        gin = self.critic.backward(np.full_like(q, -1.0 / n),
                                   need_param_grads=False)
        self.actor.backward(gin[:, obs_n.shape[1]:])
        self.opt_actor.step(self.actor)
        return float(np.mean(q))

    def soft_updates(self):
        soft_update(self.actor_target, self.actor, self.cfg.polyak)
        soft_update(self.critic_target, self.critic, self.cfg.polyak)

    def _one_update(self) -> bool:
        batch = self.buffer.sample(self.rng, self.cfg.batch_size)
        loss = self.critic_update(batch)
        obj = self.actor_update(batch)
        self.soft_updates()
        return math.isfinite(loss) and math.isfinite(obj)

    # -- episodes ----------------------------------------------------------

    def _episode_seed(self) -> int:
        return int(self.rng.integers(0, 2 ** 62))

    def run_episode(self, sigma, learn=True):
        """One episode; returns (score, healthy)."""
        env = self.env
        cfg = self.cfg
        obs_n = env.reset(self._episode_seed()) / self.obs_scales
        score = 0.0
        debt = 0.0
        for _ in range(env.horizon_steps):
            if learn and self.env_steps < cfg.warmup_steps:
                act = self.rng.uniform(-1.0, 1.0, env.action_dim)
            else:
                act = self._noisy_action(obs_n, sigma)
            next_obs, rb, done, _ = env.step_raw(act)
            next_n = next_obs / self.obs_scales
            reward = rb.total
            if learn:
                # The buffer holds normalized observations.
                self.buffer.add(Transition(obs_n, act, reward, next_n, done))
                self.env_steps += 1
                if (self.buffer.size >= max(cfg.batch_size, cfg.warmup_steps)
                        and cfg.updates_per_step > 0.0):
                    debt += cfg.updates_per_step
                    while debt >= 1.0:
                        if not self._one_update():
                            return score, False
                        debt -= 1.0
            score += reward
            obs_n = next_n
            if done:
                break
        return score, True

    def evaluate(self, n_episodes: int) -> float:
        scores = [self.run_episode(0.0, learn=False)[0]
                  for _ in range(n_episodes)]
        return float(np.mean(scores))

    def train(self) -> TrainResult:
        cfg = self.cfg
        episodes = cfg.episodes
        train_scores = np.full(episodes, np.nan)
        eval_scores = np.full(episodes, np.nan)
        best_eval = -math.inf
        best_flat = self.actor.get_flat()
        last_eval = math.nan
        failed = False
        aborted_at = -1
        for ep in range(episodes):
            frac = ep / max(1, episodes - 1)
            sigma = cfg.noise_scale + (cfg.noise_final - cfg.noise_scale) * frac
            self._ou_state[:] = 0.0
            score, healthy = self.run_episode(sigma, learn=True)
            train_scores[ep] = score
            if not healthy:
                failed = True
                aborted_at = ep
                break
            if (ep + 1) % cfg.eval_every == 0 or ep == episodes - 1:
                last_eval = self.evaluate(cfg.eval_episodes)
                if last_eval > best_eval:
                    best_eval = last_eval
                    best_flat = self.actor.get_flat()
            eval_scores[ep] = last_eval
        return TrainResult(
            seed=self.seed,
            train_scores=train_scores,
            eval_scores=eval_scores,
            best_eval=best_eval,
            best_actor_flat=best_flat,
            final_actor_flat=self.actor.get_flat(),
            failed=failed,
            aborted_at=aborted_at,
            env_steps=self.env_steps,
        )
