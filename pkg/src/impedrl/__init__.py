"""Desk-scale workbench for comparing action-space parametrizations
(direct torque, fixed-gain PD, variable-gain PD) on contact-rich
reinforcement-learning tasks."""

from .controllers import (FIXED_PD, PARAMETRIZATIONS, TORQUE, VARIABLE_PD,
                          ActionCodec, ControlCommand, GainSchedule,
                          compute_torque, kd_from_kp)
from .ddpg import DdpgTrainer, ReplayBuffer, TrainerConfig, Transition
from .dynamics import (ContactParams, ContactPoint, EnvState, RobotModel,
                       SimulationDivergedError, contact_force,
                       forward_kinematics, inverse_dynamics, mass_matrix,
                       step, total_energy)
from .envs import (HopperEnv, PointReachEnv, UncertaintySpec, WiperEnv,
                   make_env)
from .harness import (RunSummary, evaluate_policy, gain_sweep, report,
                      robustness_sweep, run_experiment)
from .mlp import Adam, Mlp, soft_update
from .persistence import (CheckpointHeader, ExperimentSpec, dump_config,
                          load_checkpoint, load_config, save_checkpoint)
from .rewards import (CircleTrajectory, RewardBreakdown,
                      TrackingPenaltyConfig, closest_point_on_circle)
from .robots import hopper_model, planar_arm_model

__version__ = "0.1.0"
