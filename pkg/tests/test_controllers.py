import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impedrl.controllers import (FIXED_PD, TORQUE, VARIABLE_PD, ActionCodec,
                                 ControlCommand, GainSchedule, compute_torque,
                                 kd_from_kp)

LIMITS = np.array([2.5, 2.5])
JLOW = np.array([-0.35, -2.5])
JHIGH = np.array([1.3, 0.1])


def make_gains(kp=5.0, ratio=0.4):
    return GainSchedule(kp_fixed=np.full(2, kp), kd_ratio=ratio)


def make_codec(kind, gains=None):
    return ActionCodec(kind, JLOW, JHIGH, LIMITS, gains or make_gains())


# ---------------------------------------------------------------------------
# kd_from_kp
# ---------------------------------------------------------------------------


def test_kd_from_kp_zero():
    assert kd_from_kp(0.0, 0.7) == 0.0


def test_kd_from_kp_values():
    assert kd_from_kp(4.0, 0.5) == pytest.approx(1.0)
    assert kd_from_kp(9.0, 1.0) == pytest.approx(3.0)


def test_kd_from_kp_rejects_negative():
    with pytest.raises(ValueError):
        kd_from_kp(-1.0, 0.5)


@given(st.floats(0.0, 100.0), st.floats(0.0, 100.0))
@settings(max_examples=50, deadline=None)
def test_kd_from_kp_monotone(kp_a, kp_b):
    lo, hi = sorted((kp_a, kp_b))
    assert kd_from_kp(lo, 0.4) <= kd_from_kp(hi, 0.4)


# ---------------------------------------------------------------------------
# compute_torque
# ---------------------------------------------------------------------------


def test_fixed_pd_zero_error_zero_torque():
    q = np.array([0.3, -0.8])
    cmd = ControlCommand(FIXED_PD, q_des=q.copy())
    tau = compute_torque(cmd, make_gains(), q, np.zeros(2), LIMITS)
    assert np.allclose(tau, 0.0)


def test_fixed_pd_arithmetic():
    gains = GainSchedule(kp_fixed=np.array([5.0]), kd_ratio=0.4)
    cmd = ControlCommand(FIXED_PD, q_des=np.array([0.1]))
    tau = compute_torque(cmd, gains, np.zeros(1), np.zeros(1), np.array([10.0]))
    assert tau[0] == pytest.approx(0.5)


def test_torque_passthrough_and_clamp():
    cmd = ControlCommand(TORQUE, tau_cmd=np.array([1.0, -9.0]))
    tau = compute_torque(cmd, make_gains(), np.zeros(2), np.zeros(2), LIMITS)
    assert tau == pytest.approx([1.0, -2.5])


def test_variable_matches_fixed_when_frozen(rng):
    # Freezing the variable gains at the fixed value reduces the variable
    # law to the fixed law exactly.
    gains = make_gains(kp=5.0, ratio=0.4)
    worst = 0.0
    for _ in range(1000):
        q = rng.uniform(-2.0, 2.0, 2)
        qd = rng.uniform(-10.0, 10.0, 2)
        q_des = rng.uniform(-2.0, 2.0, 2)
        t_fixed = compute_torque(ControlCommand(FIXED_PD, q_des=q_des),
                                 gains, q, qd, LIMITS)
        t_var = compute_torque(
            ControlCommand(VARIABLE_PD, q_des=q_des, kp=gains.kp_fixed.copy()),
            gains, q, qd, LIMITS)
        worst = max(worst, np.max(np.abs(t_fixed - t_var)))
    assert worst <= 1e-12


def test_torque_always_within_limits(rng):
    gains = make_gains(kp=10.0)
    for kind in (TORQUE, FIXED_PD, VARIABLE_PD):
        codec = make_codec(kind, gains)
        for _ in range(200):
            raw = rng.uniform(-1.5, 1.5, codec.dim)
            cmd = codec.decode(raw)
            tau = compute_torque(cmd, gains, rng.uniform(-3, 3, 2),
                                 rng.uniform(-20, 20, 2), LIMITS)
            assert np.all(np.abs(tau) <= LIMITS + 1e-12)


def test_compute_torque_stateless():
    gains = make_gains()
    cmd = ControlCommand(VARIABLE_PD, q_des=np.array([0.5, -1.0]),
                         kp=np.array([2.0, 7.0]))
    q = np.array([0.2, -0.4])
    qd = np.array([1.0, -3.0])
    a = compute_torque(cmd, gains, q, qd, LIMITS)
    b = compute_torque(cmd, gains, q, qd, LIMITS)
    assert np.array_equal(a, b)


def test_dimension_mismatch_raises():
    cmd = ControlCommand(FIXED_PD, q_des=np.zeros(3))
    with pytest.raises(ValueError):
        compute_torque(cmd, make_gains(), np.zeros(2), np.zeros(2), LIMITS)


# ---------------------------------------------------------------------------
# Command validation
# ---------------------------------------------------------------------------


def test_command_exactly_one_variant():
    with pytest.raises(ValueError):
        ControlCommand(TORQUE, tau_cmd=np.zeros(2), q_des=np.zeros(2))
    with pytest.raises(ValueError):
        ControlCommand(FIXED_PD, q_des=np.zeros(2), kp=np.ones(2))
    with pytest.raises(ValueError):
        ControlCommand(VARIABLE_PD, q_des=np.zeros(2))
    with pytest.raises(ValueError):
        ControlCommand(FIXED_PD, q_des=np.array([np.nan, 0.0]))
    with pytest.raises(ValueError):
        ControlCommand(VARIABLE_PD, q_des=np.zeros(2), kp=np.array([-1.0, 1.0]))


# ---------------------------------------------------------------------------
# Action codec
# ---------------------------------------------------------------------------


def test_decode_midpoint_variable():
    codec = make_codec(VARIABLE_PD)
    cmd = codec.decode(np.zeros(4))
    assert cmd.q_des == pytest.approx(0.5 * (JLOW + JHIGH))
    assert cmd.kp == pytest.approx(
        np.full(2, 0.5 * (codec.gains.kp_min + codec.gains.kp_max)))


def test_decode_torque_endpoint():
    codec = make_codec(TORQUE)
    cmd = codec.decode(np.array([1.0, -1.0]))
    assert cmd.tau_cmd == pytest.approx([2.5, -2.5])


def test_decode_clamps_out_of_range():
    codec = make_codec(TORQUE)
    cmd = codec.decode(np.array([3.0, -3.0]))
    assert cmd.tau_cmd == pytest.approx([2.5, -2.5])


def test_wrong_dimension_raises():
    codec = make_codec(VARIABLE_PD)
    with pytest.raises(ValueError):
        codec.decode(np.zeros(2))


def test_round_trip_all_kinds(rng):
    for kind in (TORQUE, FIXED_PD, VARIABLE_PD):
        codec = make_codec(kind)
        for _ in range(1000):
            raw = rng.uniform(-1.0, 1.0, codec.dim)
            rt = codec.encode(codec.decode(raw))
            assert np.max(np.abs(rt - raw)) <= 1e-12


@given(st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4))
@settings(max_examples=100, deadline=None)
def test_round_trip_property(raw):
    codec = make_codec(VARIABLE_PD)
    raw = np.array(raw)
    assert np.allclose(codec.encode(codec.decode(raw)), raw, atol=1e-12)
