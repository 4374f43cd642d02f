"""Robot presets.

All numbers are SI.  The hopper matches a small open-source single leg:
0.32 m fully stretched (two 0.16 m segments), the base guided on a vertical
rail.  Masses, inertias and torque limits are plausible assumptions for that
class of hardware, not measured values.  The arm is a desk-scale planar
3R chain working over a table; see :mod:`impedrl.dynamics` for its geometry.
"""

from __future__ import annotations

import math

from .dynamics import PRISMATIC, REVOLUTE, ContactParams, RobotModel


def hopper_model() -> RobotModel:
    """Vertical-rail hopper: prismatic base plus hip and knee joints."""
    return RobotModel(
        preset="hopper",
        joint_kinds=(PRISMATIC, REVOLUTE, REVOLUTE),
        link_lengths=(0.10, 0.16, 0.16),
        link_masses=(1.2, 0.16, 0.12),
        link_com_offsets=(0.05, 0.08, 0.08),
        link_inertias=(1e-3, 3.4e-4, 2.6e-4),
        joint_position_limits=((0.0, 1.5), (-0.35, 1.30), (-2.50, 0.10)),
        actuated=(False, True, True),
        torque_limits=(2.5, 2.5),
        gravity=9.81,
        base_fixed=False,
        joint_damping=(0.0, 0.01, 0.01),
        limit_stiffness=80.0,
        limit_damping=2.0,
    )


def planar_arm_model() -> RobotModel:
    """Fixed-base 3R arm over a table; wrist presses the tool downward."""
    return RobotModel(
        preset="planar_arm",
        joint_kinds=(REVOLUTE, REVOLUTE, REVOLUTE),
        link_lengths=(0.40, 0.35, 0.40),
        link_masses=(2.0, 1.5, 0.5),
        link_com_offsets=(0.20, 0.175, 0.20),
        link_inertias=(0.0267, 0.0153, 0.0067),
        joint_position_limits=((-2.9, 2.9), (-2.6, 2.6), (0.0, 2.0)),
        actuated=(True, True, True),
        torque_limits=(30.0, 20.0, 10.0),
        gravity=9.81,
        base_fixed=True,
        base_height=1.05,
        joint_damping=(0.2, 0.15, 0.05),
        limit_stiffness=100.0,
        limit_damping=5.0,
    )


def hopper_ground(height: float = 0.0) -> ContactParams:
    """Ground plane for the hopper; stiff enough to feel solid underfoot."""
    stiffness = 1.5e4
    total_mass = 1.48
    return ContactParams(
        surface_height=height,
        normal_stiffness=stiffness,
        normal_damping=math.sqrt(stiffness * total_mass),
        coulomb_friction=0.8,
        regularization_velocity=0.01,
    )


def wiper_table(height: float = 0.9, stiffness: float = 275.0,
                friction: float = 0.5) -> ContactParams:
    """Table plane for the arm.  Damping tracks the sampled stiffness so the
    soft-surface sweep stays well behaved."""
    tool_apparent_mass = 0.3
    return ContactParams(
        surface_height=height,
        normal_stiffness=stiffness,
        normal_damping=math.sqrt(stiffness * tool_apparent_mass),
        coulomb_friction=friction,
        regularization_velocity=0.01,
    )


def stretched_height(model: RobotModel) -> float:
    """Base height above the foot with the hopper leg fully stretched."""
    return model.link_lengths[1] + model.link_lengths[2]
