"""The three action-space parametrizations and their torque laws.

A policy emits a raw vector in [-1, 1]^d; the :class:`ActionCodec` turns it
into a :class:`ControlCommand`, and :func:`compute_torque` turns the command
plus the current joint state into motor torques:

* ``torque``       tau = tau_cmd                                  (d = n)
* ``fixed_pd``     tau = kp_fixed (q_des - q) - kd qdot           (d = n)
* ``variable_pd``  tau = kp (q_des - q) - kd(kp) qdot             (d = 2n)

Damping always follows stiffness through ``kd = kd_ratio * sqrt(kp)``, one
shared rule applied per joint, so a single policy output modulates both.
All functions are pure and stateless: the same (command, q, qdot) always
yields the same torque, with no notion of time.

A fourth variant with a free feedforward torque on top of the PD terms is
deliberately not offered: once feedforward and feedback paths are both
unconstrained, the same torque can be realized by many term combinations
and the learned outputs lose their intended physical meaning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TORQUE = "torque"
FIXED_PD = "fixed_pd"
VARIABLE_PD = "variable_pd"
PARAMETRIZATIONS = (TORQUE, FIXED_PD, VARIABLE_PD)


@dataclass
class ControlCommand:
    """Tagged union over the three parametrizations.

    Exactly the fields of the active variant are populated: ``tau_cmd`` for
    torque control, ``q_des`` for fixed-gain PD, ``q_des`` and ``kp`` for
    variable-gain PD.
    """

    kind: str
    tau_cmd: np.ndarray = None
    q_des: np.ndarray = None
    kp: np.ndarray = None

    def __post_init__(self):
        if self.kind not in PARAMETRIZATIONS:
            raise ValueError(f"unknown parametrization '{self.kind}'")
        want_tau = self.kind == TORQUE
        want_kp = self.kind == VARIABLE_PD
        if (self.tau_cmd is not None) != want_tau:
            raise ValueError("tau_cmd populated iff kind is torque")
        if (self.q_des is not None) == want_tau:
            raise ValueError("q_des populated iff kind is a PD variant")
        if (self.kp is not None) != want_kp:
            raise ValueError("kp populated iff kind is variable_pd")
        for arr in (self.tau_cmd, self.q_des, self.kp):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ValueError("command values must be finite")
        if self.kp is not None and np.any(self.kp < 0.0):
            raise ValueError("kp must be non-negative")


@dataclass
class GainSchedule:
    """Fixed gains plus the stiffness-to-damping rule and variable bounds."""

    kp_fixed: np.ndarray
    kd_ratio: float = 0.4
    kp_min: float = 0.05
    kp_max: float = 10.0

    def __post_init__(self):
        self.kp_fixed = np.asarray(self.kp_fixed, dtype=float)
        if np.any(self.kp_fixed < 0.0):
            raise ValueError("kp_fixed must be non-negative")
        if not 0.0 < self.kp_min <= self.kp_max:
            raise ValueError("need 0 < kp_min <= kp_max")
        if not self.kd_ratio > 0.0:
            raise ValueError("kd_ratio must be > 0")


def kd_from_kp(kp, kd_ratio):
    """Damping derived from stiffness: kd = kd_ratio * sqrt(kp)."""
    kp = np.asarray(kp, dtype=float)
    if np.any(kp < 0.0):
        raise ValueError("kp must be non-negative")
    return kd_ratio * np.sqrt(kp)


def compute_torque(cmd: ControlCommand, gains: GainSchedule, q, qdot,
                   torque_limits):
    """Torque for one control instant, clamped elementwise to the limits."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    limits = np.asarray(torque_limits, dtype=float)
    if cmd.kind == TORQUE:
        if cmd.tau_cmd.shape != q.shape:
            raise ValueError("command dimension mismatch")
        tau = cmd.tau_cmd
    else:
        if cmd.q_des.shape != q.shape:
            raise ValueError("command dimension mismatch")
        kp = gains.kp_fixed if cmd.kind == FIXED_PD else cmd.kp
        kd = kd_from_kp(kp, gains.kd_ratio)
        tau = kp * (cmd.q_des - q) - kd * qdot
    return np.clip(tau, -limits, limits)


def scalar_torque_law(cmd: ControlCommand, gains: GainSchedule, torque_limits):
    """Precompile the torque law for one command as a scalar-tuple function.

    The physics loop holds the command fixed for several substeps, so gains,
    targets and limits are extracted once; the returned function maps joint
    position/velocity tuples to a torque list.  Matches
    :func:`compute_torque` exactly.
    """
    lims = tuple(float(t) for t in torque_limits)
    n = len(lims)
    if cmd.kind == TORQUE:
        tau = tuple(min(max(float(t), -l), l)
                    for t, l in zip(cmd.tau_cmd, lims))
        return lambda q, qd: tau
    q_des = tuple(float(v) for v in cmd.q_des)
    kp_arr = gains.kp_fixed if cmd.kind == FIXED_PD else cmd.kp
    kp = tuple(float(v) for v in kp_arr)
    kd = tuple(gains.kd_ratio * math.sqrt(v) for v in kp)

    def law(q, qd):
        out = []
        for i in range(n):
            t = kp[i] * (q_des[i] - q[i]) - kd[i] * qd[i]
            if t > lims[i]:
                t = lims[i]
            elif t < -lims[i]:
                t = -lims[i]
            out.append(t)
        return out

    return law


class ActionCodec:
    """Affine map between raw policy outputs in [-1, 1]^d and commands.

    Torque maps to +-torque_limit, desired positions to the joint range and
    kp to [kp_min, kp_max]; decode(encode(cmd)) is the identity for commands
    within those bounds.
    """

    def __init__(self, kind: str, joint_low, joint_high, torque_limits,
                 gains: GainSchedule):
        if kind not in PARAMETRIZATIONS:
            raise ValueError(f"unknown parametrization '{kind}'")
        self.kind = kind
        self.joint_low = np.asarray(joint_low, dtype=float)
        self.joint_high = np.asarray(joint_high, dtype=float)
        self.torque_limits = np.asarray(torque_limits, dtype=float)
        self.gains = gains
        self.n_joints = len(self.torque_limits)
        self._q_mid = 0.5 * (self.joint_low + self.joint_high)
        self._q_half = 0.5 * (self.joint_high - self.joint_low)
        self._kp_mid = 0.5 * (gains.kp_min + gains.kp_max)
        self._kp_half = 0.5 * (gains.kp_max - gains.kp_min)

    @property
    def dim(self) -> int:
        return self.n_joints * (2 if self.kind == VARIABLE_PD else 1)

    def decode(self, raw) -> ControlCommand:
        raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
        if raw.shape != (self.dim,):
            raise ValueError(
                f"raw action must have dimension {self.dim}, got {raw.shape}")
        n = self.n_joints
        if self.kind == TORQUE:
            return ControlCommand(TORQUE, tau_cmd=raw * self.torque_limits)
        if self.kind == FIXED_PD:
            return ControlCommand(FIXED_PD,
                                  q_des=self._q_mid + raw * self._q_half)
        return ControlCommand(
            VARIABLE_PD,
            q_des=self._q_mid + raw[:n] * self._q_half,
            kp=self._kp_mid + raw[n:] * self._kp_half,
        )

    def encode(self, cmd: ControlCommand):
        if cmd.kind != self.kind:
            raise ValueError("command kind does not match codec")
        if self.kind == TORQUE:
            return cmd.tau_cmd / self.torque_limits
        q_raw = (cmd.q_des - self._q_mid) / self._q_half
        if self.kind == FIXED_PD:
            return q_raw
        kp_raw = (cmd.kp - self._kp_mid) / max(self._kp_half, 1e-12)
        return np.concatenate([q_raw, kp_raw])
