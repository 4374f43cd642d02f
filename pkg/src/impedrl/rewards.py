"""Reward decompositions for the hopping and table-wiping tasks.

Every step reward is returned as a named breakdown whose terms sum exactly
to the total.  Bonus terms are always >= 0, penalty terms always <= 0, and
no term reads the clock, so policies stay time-invariant.

All weights live in the two config dataclasses below.  They are chosen so
each active term lands at order ~1 per control step; none of them is a
calibrated physical quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RewardBreakdown:
    """Named scalar reward terms; the total is their exact sum."""

    terms: dict

    @property
    def total(self) -> float:
        return sum(self.terms.values())


@dataclass
class TrackingPenaltyConfig:
    """Weight of the command-consistency penalty -k * |q_des - q_next|^2."""

    k: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        if self.k < 0.0:
            raise ValueError("tracking penalty weight k must be >= 0")


def tracking_penalty(cfg: TrackingPenaltyConfig, q_des, q_next) -> float:
    """Penalty on commanded positions the closed loop did not reach.

    Zero when disabled or when the parametrization has no desired position
    (q_des is None); zero too when the command was reached exactly.
    """
    if not cfg.enabled or cfg.k == 0.0 or q_des is None:
        return 0.0
    err = np.asarray(q_des, dtype=float) - np.asarray(q_next, dtype=float)
    return -cfg.k * float(err @ err)


# ---------------------------------------------------------------------------
# Hopper
# ---------------------------------------------------------------------------


@dataclass
class HopperRewardConfig:
    height_weight: float = 2.0
    height_bonus: float = 1.5
    bonus_margin: float = 0.01       # above the stretched standing height
    force_threshold: float = 60.0    # N, impacts below this are free
    force_weight: float = 5e-4
    force_excess_cap: float = 140.0  # N, penalty saturates beyond this excess
    smoothness_weight: float = 0.01
    failure_penalty: float = -50.0


def hopper_reward(cfg: HopperRewardConfig, base_height, peak_force, tau,
                  prev_tau, bonus_threshold, tracking_cfg, q_des,
                  q_next) -> RewardBreakdown:
    """Per-step hopper reward.

    ``base_height`` is measured above the current ground level, so randomly
    raised ground neither pays nor costs by itself.  ``bonus_threshold`` is
    the height unreachable without leaving the ground (stretched leg +
    margin): holding still never earns the bonus, flight does.
    """
    height = cfg.height_weight * base_height
    if base_height > bonus_threshold:
        height += cfg.height_bonus
    excess = min(max(0.0, peak_force - cfg.force_threshold),
                 cfg.force_excess_cap)
    impact = -cfg.force_weight * excess * excess
    dtau = np.asarray(tau) - np.asarray(prev_tau)
    smooth = -cfg.smoothness_weight * float(dtau @ dtau)
    return RewardBreakdown({
        "height": height,
        "impact_penalty": impact,
        "torque_smoothness": smooth,
        "tracking_penalty": tracking_penalty(tracking_cfg, q_des, q_next),
        "divergence_penalty": 0.0,
    })


# ---------------------------------------------------------------------------
# Wiper
# ---------------------------------------------------------------------------


@dataclass
class CircleTrajectory:
    """Horizontal circle to wipe: geometry, speed, and pressing force."""

    center: tuple = (0.55, 0.0)
    radius: float = 0.12
    angular_speed: float = 0.8      # rad/s, positive = counter-clockwise
    desired_force: float = 4.0      # N, normal into the table

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be > 0")
        if self.desired_force < 0.0:
            raise ValueError("desired_force must be >= 0")


def closest_point_on_circle(p, center, radius, counter_clockwise=True):
    """Closest circle point to p plus the travel direction there.

    The tie at the exact centre is broken by the angle-zero point.  The
    tangent is the unit travel direction for the given rotation sense.
    """
    if radius <= 0.0:
        raise ValueError("radius must be > 0")
    dx = p[0] - center[0]
    dy = p[1] - center[1]
    d = math.hypot(dx, dy)
    if d < 1e-12:
        dx, dy, d = 1.0, 0.0, 1.0
    nx, ny = dx / d, dy / d
    point = np.array([center[0] + radius * nx, center[1] + radius * ny])
    if counter_clockwise:
        tangent = np.array([-ny, nx])
    else:
        tangent = np.array([ny, -nx])
    return point, tangent


@dataclass
class WiperRewardConfig:
    distance_weight: float = 1.0
    velocity_weight: float = 1.0
    orientation_weight: float = 0.3
    contact_bonus: float = 0.5
    force_bonus: float = 0.5
    force_sigma: float = 2.0         # N, width of the force-matching bonus
    bad_contact_weight: float = 1.0
    failure_penalty: float = -50.0


# Wrist angle at which the tool is aligned with the table normal.
TOOL_ALIGNED_PITCH = math.pi / 2


def wiper_reward(cfg: WiperRewardConfig, traj: CircleTrajectory, ee_xy, ee_vxy,
                 wrist_pitch, ee_normal_force, bad_contact_force,
                 tracking_cfg, q_des, q_next) -> RewardBreakdown:
    """Per-step wiping reward: five task terms plus the tracking penalty.

    The tangential-velocity target is the constant-angular-rate velocity at
    the closest circle point, so no term depends on elapsed time.
    """
    point, tangent = closest_point_on_circle(
        ee_xy, traj.center, traj.radius, traj.angular_speed >= 0.0)
    dist = abs(math.hypot(ee_xy[0] - traj.center[0], ee_xy[1] - traj.center[1])
               - traj.radius)
    v_des = tangent * abs(traj.angular_speed) * traj.radius
    dv = np.asarray(ee_vxy, dtype=float) - v_des
    orientation = -cfg.orientation_weight * (wrist_pitch - TOOL_ALIGNED_PITCH) ** 2
    if ee_normal_force > 0.0:
        ferr = (ee_normal_force - traj.desired_force) / cfg.force_sigma
        contact = cfg.contact_bonus + cfg.force_bonus * math.exp(-ferr * ferr)
    else:
        contact = 0.0
    return RewardBreakdown({
        "circle_distance": -cfg.distance_weight * dist,
        "tangential_velocity": -cfg.velocity_weight * float(np.hypot(dv[0], dv[1])),
        "orientation": orientation,
        "contact_and_force": contact,
        "bad_contact_penalty": -cfg.bad_contact_weight * bad_contact_force,
        "tracking_penalty": tracking_penalty(tracking_cfg, q_des, q_next),
        "divergence_penalty": 0.0,
    })


def failure_breakdown(term_names, penalty) -> RewardBreakdown:
    """Breakdown for a diverged step: all task terms zero, one penalty."""
    terms = {name: 0.0 for name in term_names}
    terms["divergence_penalty"] = penalty
    return RewardBreakdown(terms)
