import numpy as np
import pytest

from impedrl import persistence as ps
from impedrl.ddpg import DdpgTrainer, TrainerConfig
from impedrl.envs import HopperEnv, WiperEnv
from impedrl.mlp import Mlp


def make_policy(env, seed=0):
    cfg = TrainerConfig(episodes=1, warmup_steps=128, batch_size=64,
                        hidden=(24, 24))
    trainer = DdpgTrainer(env, cfg, seed)
    return trainer.actor


def test_checkpoint_round_trip_bit_exact(tmp_path, rng):
    env = HopperEnv("variable_pd")
    actor = make_policy(env)
    header = ps.header_for(env, actor, seed=7)
    path = tmp_path / "policy.ckpt"
    ps.save_checkpoint(path, actor.get_flat(), header)
    loaded, h2 = ps.load_checkpoint(path)
    assert h2 == header
    for _ in range(1000):
        obs = rng.uniform(-2, 2, env.obs_dim)
        a = actor.forward(obs / env.obs_scales)
        b = loaded.forward(obs / env.obs_scales)
        assert np.array_equal(a, b)


def test_checkpoint_env_mismatch(tmp_path):
    wiper = WiperEnv("variable_pd")
    actor = make_policy(wiper)
    path = tmp_path / "w.ckpt"
    ps.save_checkpoint(path, actor.get_flat(), ps.header_for(wiper, actor, 0))
    _, header = ps.load_checkpoint(path)
    with pytest.raises(ps.CheckpointError, match="env"):
        ps.check_compatible(header, HopperEnv("variable_pd"))
    with pytest.raises(ps.CheckpointError, match="parametrization"):
        ps.check_compatible(header, WiperEnv("torque"))


def test_checkpoint_corrupted_magic(tmp_path):
    env = HopperEnv("torque")
    actor = make_policy(env)
    path = tmp_path / "p.ckpt"
    ps.save_checkpoint(path, actor.get_flat(), ps.header_for(env, actor, 0))
    blob = bytearray(path.read_bytes())
    blob[0] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ps.CheckpointError, match="unrecognized format"):
        ps.load_checkpoint(path)


def test_checkpoint_truncated_payload(tmp_path):
    env = HopperEnv("torque")
    actor = make_policy(env)
    path = tmp_path / "p.ckpt"
    ps.save_checkpoint(path, actor.get_flat(), ps.header_for(env, actor, 0))
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])
    with pytest.raises(ps.CheckpointError, match="truncated"):
        ps.load_checkpoint(path)


def test_checkpoint_is_deterministic(tmp_path):
    env = HopperEnv("fixed_pd")
    actor = make_policy(env)
    header = ps.header_for(env, actor, 3)
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    ps.save_checkpoint(a, actor.get_flat(), header)
    ps.save_checkpoint(b, actor.get_flat(), header)
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# Experiment configs
# ---------------------------------------------------------------------------


def test_config_round_trip(tmp_path):
    spec = ps.ExperimentSpec(
        env="hopper", parametrization="fixed_pd", kp=5.0, tracking_k=0.5,
        seeds=(0, 1, 2), episodes=50,
        uncertainty={"ground_height_active": True},
        trainer={"gamma": 0.98, "hidden": (32, 32)},
        name="demo")
    path = tmp_path / "spec.yaml"
    ps.dump_config(spec, path)
    loaded = ps.load_config(path)
    assert loaded == spec


def test_config_rejects_bad_gamma(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(
        "env: hopper\nparametrization: torque\ntrainer:\n  gamma: 1.5\n")
    with pytest.raises(ValueError, match="gamma"):
        ps.load_config(path)


def test_config_rejects_inverted_range(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("env: wiper\nparametrization: torque\n"
                    "uncertainty:\n  friction_range: [0.7, 0.2]\n")
    with pytest.raises(ValueError, match="friction_range: lo > hi"):
        ps.load_config(path)


def test_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("env: hopper\nparametrization: torque\nfrobnicate: 3\n")
    with pytest.raises(ValueError, match="frobnicate"):
        ps.load_config(path)
    path.write_text("env: hopper\nparametrization: torque\n"
                    "trainer:\n  learning_rate_wrong: 1\n")
    with pytest.raises(ValueError, match="trainer.learning_rate_wrong"):
        ps.load_config(path)


def test_config_rejects_kp_for_non_fixed(tmp_path):
    with pytest.raises(ValueError, match="kp"):
        ps.ExperimentSpec(env="hopper", parametrization="torque", kp=3.0)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def test_csv_round_trip_exact_floats(tmp_path):
    path = tmp_path / "t.csv"
    values = [0.1, 1.0 / 3.0, -2.5e-17, float(np.float32(3.3))]
    ps.write_csv(path, ["a", "b", "c", "d"], [values])
    header, rows = ps.read_csv(path)
    assert header == ["a", "b", "c", "d"]
    assert [float(v) for v in rows[0]] == values


def test_csv_deterministic_bytes(tmp_path):
    rows = [[1, 0.12345678901234567, "x"], [2, float("nan"), "y"]]
    p1, p2 = tmp_path / "1.csv", tmp_path / "2.csv"
    ps.write_csv(p1, ["i", "v", "s"], rows)
    ps.write_csv(p2, ["i", "v", "s"], rows)
    assert p1.read_bytes() == p2.read_bytes()
