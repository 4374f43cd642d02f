"""Deterministic serialization shared by all modules.

* Checkpoints: binary, magic string + version + JSON header + little-endian
  parameter payload (see FORMATS.md for the byte layout).  A reloaded policy
  reproduces the saved one bit for bit.
* Configs: YAML with strict schemas -- unknown keys are rejected by name,
  out-of-range values raise naming the offending field.
* Analysis artifacts: CSV with stable column order and repr-exact floats, so
  identical runs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .controllers import PARAMETRIZATIONS
from .ddpg import TrainerConfig
from .envs import ENV_IDS, UncertaintySpec
from .mlp import Mlp

MAGIC = b"IMPEDRL\x00"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, corrupted or incompatible checkpoint file."""


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class CheckpointHeader:
    """Everything needed to rebuild the policy and decode its actions."""

    env_id: str
    parametrization: str
    layer_sizes: tuple
    hidden_activation: str
    output_activation: str
    dtype: str
    obs_scales: tuple
    joint_low: tuple
    joint_high: tuple
    torque_limits: tuple
    kp_min: float
    kp_max: float
    kd_ratio: float
    kp_fixed: tuple
    seed: int

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CheckpointHeader":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise CheckpointError(
                f"unknown checkpoint header key '{sorted(unknown)[0]}'")
        missing = known - set(data)
        if missing:
            raise CheckpointError(
                f"missing checkpoint header key '{sorted(missing)[0]}'")
        for name in ("layer_sizes", "obs_scales", "joint_low", "joint_high",
                     "torque_limits", "kp_fixed"):
            data[name] = tuple(data[name])
        return cls(**data)


def header_for(env, actor: Mlp, seed: int) -> CheckpointHeader:
    codec = env.codec
    return CheckpointHeader(
        env_id=env.env_id,
        parametrization=env.parametrization,
        layer_sizes=actor.layer_sizes,
        hidden_activation=actor.hidden_activation,
        output_activation=actor.output_activation,
        dtype=actor.dtype.name,
        obs_scales=tuple(float(v) for v in env.obs_scales),
        joint_low=tuple(float(v) for v in codec.joint_low),
        joint_high=tuple(float(v) for v in codec.joint_high),
        torque_limits=tuple(float(v) for v in codec.torque_limits),
        kp_min=float(codec.gains.kp_min),
        kp_max=float(codec.gains.kp_max),
        kd_ratio=float(codec.gains.kd_ratio),
        kp_fixed=tuple(float(v) for v in codec.gains.kp_fixed),
        seed=int(seed),
    )


def save_checkpoint(path, actor_flat, header: CheckpointHeader):
    """Write magic, version, header length+JSON, then '<f4'/'<f8' params."""
    params = np.asarray(actor_flat)
    dt = "<f4" if header.dtype == "float32" else "<f8"
    payload = params.astype(dt).tobytes()
    head = header.to_json().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(struct.pack("<Q", params.size))
        fh.write(payload)


def load_checkpoint(path):
    """Read a checkpoint; returns (actor, header).

    The rebuilt actor's outputs match the saved policy to the last bit.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError("unrecognized format (bad magic)")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, off)
    off += 4
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    try:
        header = CheckpointHeader.from_json(blob[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupted checkpoint header: {exc}") from exc
    off += hlen
    (n_params,) = struct.unpack_from("<Q", blob, off)
    off += 8
    dt = np.dtype("<f4" if header.dtype == "float32" else "<f8")
    expected = n_params * dt.itemsize
    if len(blob) - off != expected:
        raise CheckpointError("truncated checkpoint payload")
    flat = np.frombuffer(blob[off:], dtype=dt).astype(header.dtype)
    actor = Mlp(header.layer_sizes, header.hidden_activation,
                header.output_activation, dtype=header.dtype)
    actor.set_flat(flat)
    return actor, header


def check_compatible(header: CheckpointHeader, env):
    if header.env_id != env.env_id:
        raise CheckpointError(
            f"checkpoint is for env '{header.env_id}', not '{env.env_id}'")
    if header.parametrization != env.parametrization:
        raise CheckpointError(
            f"checkpoint parametrization '{header.parametrization}' does not "
            f"match env '{env.parametrization}'")


# ---------------------------------------------------------------------------
# Robot presets
# ---------------------------------------------------------------------------


def dump_robot(model, path):
    """Robot description as a flat key-value file, SI units throughout."""
    from .dynamics import RobotModel
    data = {}
    for f in fields(RobotModel):
        value = getattr(model, f.name)
        if isinstance(value, tuple):
            value = [list(v) if isinstance(v, tuple) else v for v in value]
        data[f.name] = value
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=True)


def load_robot(path):
    from .dynamics import RobotModel
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: robot config must be a mapping")
    _check_keys(data, RobotModel, "robot")
    for key, value in data.items():
        if isinstance(value, list):
            data[key] = tuple(tuple(v) if isinstance(v, list) else v
                              for v in value)
    try:
        return RobotModel(**data)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


def dump_trajectory(path, times, qs, qdots, taus, fns, fts):
    """Simulator trace CSV: t, q..., qdot..., tau..., fn, ft."""
    qs = np.asarray(qs)
    n = qs.shape[1]
    taus = np.asarray(taus)
    header = (["t"] + [f"q{i}" for i in range(n)]
              + [f"qdot{i}" for i in range(n)]
              + [f"tau{i}" for i in range(taus.shape[1])] + ["fn", "ft"])
    rows = [[times[k], *qs[k], *np.asarray(qdots)[k], *taus[k],
             fns[k], fts[k]] for k in range(len(times))]
    write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    """Everything that determines one experiment (a set of seeded runs)."""

    env: str
    parametrization: str
    name: str = ""
    kp: float = None              # fixed-gain value, fixed_pd only
    tracking_k: float = 0.0       # 0 disables the tracking penalty
    seeds: tuple = (0, 1, 2, 3)
    episodes: int = None          # None -> TrainerConfig default
    uncertainty: dict = field(default_factory=dict)
    trainer: dict = field(default_factory=dict)
    env_config: dict = field(default_factory=dict)
    reward: dict = field(default_factory=dict)
    vary_trajectory: bool = True  # wiper: rotate the circle per seed
    out_dir: str = ""

    def __post_init__(self):
        if self.env not in ENV_IDS:
            raise ValueError(f"env must be one of {ENV_IDS}, got '{self.env}'")
        if self.parametrization not in PARAMETRIZATIONS:
            raise ValueError(
                f"parametrization must be one of {PARAMETRIZATIONS}")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.kp is not None and self.parametrization != "fixed_pd":
            raise ValueError("kp only applies to the fixed_pd parametrization")
        if self.episodes is not None and self.episodes <= 0:
            raise ValueError("episodes must be positive")
        for name in ("uncertainty", "trainer", "env_config", "reward"):
            setattr(self, name, _normalize(getattr(self, name)))
        # Validate override keys/values early so config errors are precise.
        self.make_uncertainty()
        self.make_trainer_config()

    def make_uncertainty(self) -> UncertaintySpec:
        _check_keys(self.uncertainty, UncertaintySpec, "uncertainty")
        return UncertaintySpec(**self.uncertainty)

    def make_trainer_config(self) -> TrainerConfig:
        _check_keys(self.trainer, TrainerConfig, "trainer")
        cfg = TrainerConfig(**self.trainer)
        if self.episodes is not None:
            cfg.episodes = self.episodes
        return cfg


def _normalize(mapping):
    """Sequence values arrive as lists from YAML; configs use tuples."""
    return {k: tuple(v) if isinstance(v, list) else v
            for k, v in mapping.items()}


def _check_keys(mapping, cls, where):
    known = {f.name for f in fields(cls)}
    for key in mapping:
        if key not in known:
            raise ValueError(f"unknown key '{where}.{key}'")


def dump_config(spec: ExperimentSpec, path):
    data = dataclasses.asdict(spec)
    data["seeds"] = list(spec.seeds)
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=True)


def load_config(path) -> ExperimentSpec:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    _check_keys(data, ExperimentSpec, "config")
    try:
        return ExperimentSpec(**data)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    """Plain CSV with LF line endings and repr-exact float formatting."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:] if ln]
