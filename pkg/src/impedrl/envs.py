"""Episodic tasks: HopperHop, TableWipe, and a 1-DoF reach fixture.

Each environment owns one simulator instance and a seeded RNG, exposes
``reset(seed) -> observation`` and ``step(command)`` /
``step_raw(raw_action)``, and returns a named reward breakdown per control
step.  A control step runs ``substeps`` physics steps with the command held
fixed; PD torques are recomputed each physics step against the evolving
joint state, so the feedback loops close at physics rate.

Observations are raw physical values; ``obs_scales`` gives the fixed
normalization the learner divides by before feeding its networks.  The
hopper observation carries no contact information at all; the wiper sees
the force magnitude at the tool tip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from .controllers import (FIXED_PD, TORQUE, VARIABLE_PD, ActionCodec,
                          ControlCommand, GainSchedule, scalar_torque_law)
from .rewards import (CircleTrajectory, HopperRewardConfig, RewardBreakdown,
                      TrackingPenaltyConfig, WiperRewardConfig,
                      failure_breakdown, hopper_reward, wiper_reward)
from .robots import (hopper_ground, hopper_model, planar_arm_model,
                     stretched_height, wiper_table)

HOPPER_TERMS = ("height", "impact_penalty", "torque_smoothness",
                "tracking_penalty")
WIPER_TERMS = ("circle_distance", "tangential_velocity", "orientation",
               "contact_and_force", "bad_contact_penalty", "tracking_penalty")


@dataclass
class UncertaintySpec:
    """Ranges for the randomized contact properties, with active flags.

    Inactive variables stay at the midpoint of their range.
    """

    ground_height_range: tuple = (-0.05, 0.05)
    ground_height_active: bool = False
    table_height_range: tuple = (0.8, 1.0)
    table_height_active: bool = False
    friction_range: tuple = (0.0, 1.0)
    friction_active: bool = False
    stiffness_range: tuple = (50.0, 500.0)
    stiffness_active: bool = False

    def __post_init__(self):
        for name in ("ground_height_range", "table_height_range",
                     "friction_range", "stiffness_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lo > hi")

    def draw(self, rng, name):
        lo, hi = getattr(self, f"{name}_range")
        if getattr(self, f"{name}_active"):
            return float(rng.uniform(lo, hi))
        return 0.5 * (lo + hi)


def _midrange(spec, name):
    lo, hi = getattr(spec, f"{name}_range")
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Hopper
# ---------------------------------------------------------------------------


@dataclass
class HopperEnvConfig:
    control_dt: float = 0.01
    substeps: int = 10
    horizon: float = 4.0
    kp_fixed: float = 5.0
    # Near-critical damping for these link inertias; the 0.4 global default
    # is several times overdamped here and makes dynamic hopping infeasible.
    kd_ratio: float = 0.1
    kp_min: float = 0.05
    kp_max: float = 10.0
    init_noise: float = 0.05
    # Ground resampling: once per flight phase, applied only when the foot
    # is safely above any reachable ground level.
    resample_in_flight: bool = True
    resample_interval: float = 0.0  # seconds, 0 disables fixed-interval mode
    ground_clearance: float = 0.005


class HopperEnv:
    env_id = "hopper"

    def __init__(self, parametrization: str, config: HopperEnvConfig = None,
                 reward: HopperRewardConfig = None,
                 uncertainty: UncertaintySpec = None,
                 tracking: TrackingPenaltyConfig = None):
        self.cfg = config or HopperEnvConfig()
        self.reward_cfg = reward or HopperRewardConfig()
        self.uncertainty = uncertainty or UncertaintySpec()
        self.tracking = tracking or TrackingPenaltyConfig()
        self.model = hopper_model()
        self.parametrization = parametrization
        self.gains = GainSchedule(
            kp_fixed=np.full(2, self.cfg.kp_fixed),
            kd_ratio=self.cfg.kd_ratio,
            kp_min=self.cfg.kp_min, kp_max=self.cfg.kp_max)
        lims = np.array(self.model.joint_position_limits[1:])
        self.codec = ActionCodec(parametrization, lims[:, 0], lims[:, 1],
                                 np.array(self.model.torque_limits), self.gains)
        self.obs_dim = 6
        self.obs_scales = np.array([0.4, 1.5, 1.0, 1.5, 10.0, 15.0])
        self.horizon_steps = int(round(self.cfg.horizon / self.cfg.control_dt))
        self.physics_dt = self.cfg.control_dt / self.cfg.substeps
        self._stretch = stretched_height(self.model)
        self._limits = np.array(self.model.torque_limits)
        self._rng = None
        self._state = None

    @property
    def action_dim(self) -> int:
        return self.codec.dim

    @property
    def state(self) -> dyn.EnvState:
        return self._state

    @property
    def ground_height(self) -> float:
        return self._ground.surface_height

    def _observe(self):
        q, qd = self._state.q, self._state.qdot
        return np.array([q[0], qd[0], q[1], q[2], qd[1], qd[2]])

    def reset(self, seed: int):
        self._rng = np.random.default_rng(seed)
        height = self.uncertainty.draw(self._rng, "ground_height")
        self._ground = hopper_ground(height)
        self.draws = [("ground_height", height)]
        noise = self._rng.uniform(-self.cfg.init_noise, self.cfg.init_noise, 2)
        q1, q2 = float(noise[0]), -0.1 + float(noise[1])
        L1, L2 = self.model.link_lengths[1], self.model.link_lengths[2]
        z0 = height + L1 * math.cos(q1) + L2 * math.cos(q1 + q2)
        self._state = dyn.EnvState(np.array([z0, q1, q2]), np.zeros(3))
        self._t = 0
        self._prev_tau = np.zeros(2)
        self._was_airborne = False
        self._resampled_this_flight = False
        self._since_resample = 0.0
        return self._observe()

    def _maybe_resample_ground(self, foot_z):
        if not self.uncertainty.ground_height_active:
            return
        lo, hi = self.uncertainty.ground_height_range
        clear = foot_z > hi + self.cfg.ground_clearance
        due = (self.cfg.resample_in_flight
               and not self._resampled_this_flight)
        if self.cfg.resample_interval > 0.0 and \
                self._since_resample >= self.cfg.resample_interval:
            due = True
        if due and clear:
            height = self.uncertainty.draw(self._rng, "ground_height")
            self._ground = hopper_ground(height)
            self.draws.append(("ground_height", height))
            self._resampled_this_flight = True
            self._since_resample = 0.0

    def step_raw(self, raw, want_info=False):
        return self.step(self.codec.decode(raw), want_info)

    def step(self, cmd: ControlCommand, want_info=False):
        substeps = self.cfg.substeps
        peak = 0.0
        t1_sum = t2_sum = 0.0
        state = self._state
        diverged = False
        law = scalar_torque_law(cmd, self.gains, self._limits)
        try:
            for _ in range(substeps):
                q, qd = state.q, state.qdot
                t1, t2 = law((q[1], q[2]), (qd[1], qd[2]))
                t1_sum += t1
                t2_sum += t2
                state = dyn.step(self.model, state, (0.0, t1, t2),
                                 self._ground, self.physics_dt)
                for c in state.contacts:
                    f = math.hypot(c.normal_force, c.tangential_force)
                    if f > peak:
                        peak = f
        except dyn.SimulationDivergedError:
            diverged = True
        self._t += 1
        if diverged:
            breakdown = failure_breakdown(HOPPER_TERMS,
                                          self.reward_cfg.failure_penalty)
            obs = np.zeros(self.obs_dim)
            return obs, breakdown, True, {"diverged": True, "t": self._t}

        self._state = state
        tau_mean = np.array([t1_sum, t2_sum]) / substeps
        self._since_resample += self.cfg.control_dt
        in_contact = len(state.contacts) > 0
        if in_contact:
            self._resampled_this_flight = False
        else:
            foot_z = dyn.forward_kinematics(self.model, state.q)[1][2]
            self._maybe_resample_ground(foot_z)
        q_des = cmd.q_des if cmd.kind != TORQUE else None
        threshold = self._stretch + self.reward_cfg.bonus_margin
        breakdown = hopper_reward(self.reward_cfg,
                                  state.q[0] - self._ground.surface_height,
                                  peak, tau_mean, self._prev_tau, threshold,
                                  self.tracking, q_des, state.q[1:])
        self._prev_tau = tau_mean
        done = self._t >= self.horizon_steps
        obs = self._observe()
        info = None
        if want_info:
            fn = ft = 0.0
            for c in state.contacts:
                fn, ft = c.normal_force, c.tangential_force
            info = {
                "t": self._t, "q": state.q.copy(), "qdot": state.qdot.copy(),
                "tau": tau_mean, "q_des": None if q_des is None else q_des.copy(),
                "kp": None if cmd.kind != VARIABLE_PD else cmd.kp.copy(),
                "fn": fn, "ft": ft, "peak_force": peak,
                "ground_height": self._ground.surface_height,
                "in_contact": in_contact, "draws": list(self.draws),
            }
        return obs, breakdown, done, info


# ---------------------------------------------------------------------------
# Wiper
# ---------------------------------------------------------------------------


@dataclass
class WiperEnvConfig:
    control_dt: float = 0.01
    substeps: int = 10
    horizon: float = 8.0
    kp_fixed: float = 5.0
    kd_ratio: float = 1.2
    kp_min: float = 0.05
    kp_max: float = 10.0
    init_yaw_range: tuple = (-0.9, 0.9)
    init_elbow_range: tuple = (-1.2, 1.2)
    init_wrist_range: tuple = (0.0, 0.1)


class WiperEnv:
    env_id = "wiper"

    def __init__(self, parametrization: str, config: WiperEnvConfig = None,
                 reward: WiperRewardConfig = None,
                 uncertainty: UncertaintySpec = None,
                 tracking: TrackingPenaltyConfig = None,
                 trajectory: CircleTrajectory = None):
        self.cfg = config or WiperEnvConfig()
        self.reward_cfg = reward or WiperRewardConfig()
        self.uncertainty = uncertainty or UncertaintySpec()
        self.tracking = tracking or TrackingPenaltyConfig()
        self.trajectory = trajectory or CircleTrajectory()
        self.model = planar_arm_model()
        self.parametrization = parametrization
        self.gains = GainSchedule(
            kp_fixed=np.full(3, self.cfg.kp_fixed),
            kd_ratio=self.cfg.kd_ratio,
            kp_min=self.cfg.kp_min, kp_max=self.cfg.kp_max)
        lims = np.array(self.model.joint_position_limits)
        self.codec = ActionCodec(parametrization, lims[:, 0], lims[:, 1],
                                 np.array(self.model.torque_limits), self.gains)
        self.obs_dim = 7
        self.obs_scales = np.array([math.pi, math.pi, 1.0, 4.0, 4.0, 4.0, 10.0])
        self.horizon_steps = int(round(self.cfg.horizon / self.cfg.control_dt))
        self.physics_dt = self.cfg.control_dt / self.cfg.substeps
        self._limits = np.array(self.model.torque_limits)
        self._kin = self.model.kinematics
        self._ee_probe = self._kin.probes[0]
        self._rng = None
        self._state = None

    @property
    def action_dim(self) -> int:
        return self.codec.dim

    @property
    def state(self) -> dyn.EnvState:
        return self._state

    @property
    def table(self) -> dyn.ContactParams:
        return self._table

    def reset(self, seed: int):
        self._rng = np.random.default_rng(seed)
        height = self.uncertainty.draw(self._rng, "table_height")
        stiffness = self.uncertainty.draw(self._rng, "stiffness")
        friction = self.uncertainty.draw(self._rng, "friction")
        self._table = wiper_table(height, stiffness, friction)
        self.draws = [("table_height", height), ("stiffness", stiffness),
                      ("friction", friction)]
        q = np.array([
            self._rng.uniform(*self.cfg.init_yaw_range),
            self._rng.uniform(*self.cfg.init_elbow_range),
            self._rng.uniform(*self.cfg.init_wrist_range),
        ])
        self._state = dyn.EnvState(q, np.zeros(3))
        self._t = 0
        return self._observe()

    def _ee_force(self, contacts):
        fn = ft = 0.0
        bad = 0.0
        for c in contacts:
            if c.endeffector:
                fn, ft = c.normal_force, c.tangential_force
            else:
                bad += c.normal_force
        return fn, ft, bad

    def _observe(self):
        q, qd = self._state.q, self._state.qdot
        fn, ft, _ = self._ee_force(self._state.contacts)
        fmag = math.hypot(fn, ft)
        return np.array([q[0], q[1], q[2], qd[0], qd[1], qd[2], fmag])

    def step_raw(self, raw, want_info=False):
        return self.step(self.codec.decode(raw), want_info)

    def step(self, cmd: ControlCommand, want_info=False):
        state = self._state
        t1_sum = t2_sum = t3_sum = 0.0
        diverged = False
        law = scalar_torque_law(cmd, self.gains, self._limits)
        grav_sg = self._kin.Sg * self.model.gravity
        try:
            for _ in range(self.cfg.substeps):
                q, qd = state.q, state.qdot
                t1, t2, t3 = law(q, qd)
                t1_sum += t1
                t2_sum += t2
                t3_sum += t3
                # Feedforward gravity compensation on the wrist, applied
                # outside the policy's control law.
                ff = grav_sg * math.cos(q[2])
                state = dyn.step(self.model, state, (t1, t2, t3 - ff),
                                 self._table, self.physics_dt)
        except dyn.SimulationDivergedError:
            diverged = True
        self._t += 1
        if diverged:
            breakdown = failure_breakdown(WIPER_TERMS,
                                          self.reward_cfg.failure_penalty)
            return (np.zeros(self.obs_dim), breakdown, True,
                    {"diverged": True, "t": self._t})

        self._state = state
        tau_mean = np.array([t1_sum, t2_sum, t3_sum]) / self.cfg.substeps
        pos, jac = self._kin.probe_scalar(state.q, self._ee_probe)
        qd = state.qdot
        vx = jac[0][0] * qd[0] + jac[0][1] * qd[1] + jac[0][2] * qd[2]
        vy = jac[1][0] * qd[0] + jac[1][1] * qd[1] + jac[1][2] * qd[2]
        fn, ft, bad = self._ee_force(state.contacts)
        q_des = cmd.q_des if cmd.kind != TORQUE else None
        breakdown = wiper_reward(self.reward_cfg, self.trajectory,
                                 (pos[0], pos[1]), (vx, vy), state.q[2],
                                 fn, bad, self.tracking, q_des, state.q)
        done = self._t >= self.horizon_steps
        obs = self._observe()
        info = None
        if want_info:
            info = {
                "t": self._t, "q": state.q.copy(), "qdot": state.qdot.copy(),
                "tau": tau_mean, "q_des": None if q_des is None else q_des.copy(),
                "kp": None if cmd.kind != VARIABLE_PD else cmd.kp.copy(),
                "fn": fn, "ft": ft, "bad_contact": bad,
                "ee_xy": (pos[0], pos[1]), "ee_v": (vx, vy),
                "table_height": self._table.surface_height,
                "draws": list(self.draws),
            }
        return obs, breakdown, done, info


# ---------------------------------------------------------------------------
# 1-DoF reach fixture
# ---------------------------------------------------------------------------


class PointReachEnv:
    """Sanity task: drive a damped point mass to the origin and hold it.

    Reward per step is exp(-(x / 0.4)^2), so the per-episode maximum is the
    horizon and a near-optimal controller is easy to write analytically.
    """

    env_id = "reach"

    def __init__(self, parametrization: str = TORQUE):
        if parametrization != TORQUE:
            raise ValueError("reach fixture uses the torque parametrization")
        self.parametrization = TORQUE
        self.gains = GainSchedule(kp_fixed=np.array([1.0]))
        self.codec = ActionCodec(TORQUE, np.array([-2.0]), np.array([2.0]),
                                 np.array([2.0]), self.gains)
        self.obs_dim = 2
        self.obs_scales = np.array([1.0, 2.0])
        self.horizon_steps = 60
        self.mass = 1.0
        self.damping = 0.8
        self.dt = 0.05
        self.tracking = TrackingPenaltyConfig()

    @property
    def action_dim(self) -> int:
        return 1

    def reset(self, seed: int):
        self._rng = np.random.default_rng(seed)
        self._x = float(self._rng.uniform(-1.0, 1.0))
        self._v = 0.0
        self._t = 0
        return np.array([self._x, self._v])

    def step_raw(self, raw, want_info=False):
        return self.step(self.codec.decode(raw), want_info)

    def step(self, cmd: ControlCommand, want_info=False):
        force = float(np.clip(cmd.tau_cmd[0], -2.0, 2.0))
        self._v += self.dt * (force - self.damping * self._v) / self.mass
        self._x += self.dt * self._v
        self._t += 1
        r = math.exp(-(self._x / 0.4) ** 2)
        breakdown = RewardBreakdown({"reach": r, "divergence_penalty": 0.0})
        done = self._t >= self.horizon_steps
        info = {"t": self._t} if want_info else None
        return np.array([self._x, self._v]), breakdown, done, info


# ---------------------------------------------------------------------------
# Factory
# ---------------------------------------------------------------------------

ENV_IDS = ("hopper", "wiper", "reach")


def make_env(env_id: str, parametrization: str, **kwargs):
    if env_id == "hopper":
        return HopperEnv(parametrization, **kwargs)
    if env_id == "wiper":
        return WiperEnv(parametrization, **kwargs)
    if env_id == "reach":
        return PointReachEnv(parametrization)
    raise ValueError(f"unknown env '{env_id}'")
