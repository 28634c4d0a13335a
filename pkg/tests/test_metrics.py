"""Metrics tests: reward fixtures, Cost of Transport, residuals."""

import numpy as np
import pytest

from gaitkit.errors import ConfigError
from gaitkit.metrics import (
    GRAVITY,
    MetricsRecord,
    cost_of_transport,
    episode_metrics,
    joint_acc_residuals,
    mechanical_power,
    reward_step,
)
from gaitkit.trajlog import ROW_WIDTH, TrajectoryLog, _SLICES


def synthetic_log(duration=5.0, dt=0.01, vx=1.0, power_per_joint=None):
    """Constant-velocity log with hand-set per-joint torque * velocity."""
    n = int(round(duration / dt)) + 1
    data = np.zeros((n, ROW_WIDTH))
    t = np.arange(n) * dt
    data[:, _SLICES["t"]] = t[:, None]
    data[:, _SLICES["base_pos"]][:, 0] = vx * t
    data[:, _SLICES["v_b"]][:, 0] = vx
    data[:, _SLICES["base_quat"]][:, 0] = 1.0
    if power_per_joint is not None:
        data[:, _SLICES["tau"]] = power_per_joint
        data[:, _SLICES["qd"]] = 1.0  # |tau * qd| = power_per_joint per joint
    return TrajectoryLog(data, {"log_dt": dt}, ["trot"])


class TestRewardFixtures:
    def test_perfect_tracking(self):
        # v_x = v*, all other velocities zero, zero power -> 3 * 0.01 * 1
        r = reward_step(1.0, [1.0, 0, 0], [0, 0, 0], np.zeros(12), np.zeros(12))
        assert r == pytest.approx(0.03, abs=1e-12)

    def test_half_mps_error(self):
        # tracking kernel e^{-0.25/0.25} = e^-1
        r = reward_step(1.0, [0.5, 0, 0], [0, 0, 0], np.zeros(12), np.zeros(12))
        assert r == pytest.approx(0.03 * np.exp(-1.0), abs=1e-12)
        assert r == pytest.approx(0.011036, abs=1e-6)

    def test_angular_velocity_penalty(self):
        r = reward_step(1.0, [1.0, 0, 0], [1.0, 0, 0], np.zeros(12), np.zeros(12))
        assert r == pytest.approx(0.03 - 0.1 * 0.01 * 1.0, abs=1e-12)
        assert r == pytest.approx(0.029, abs=1e-12)

    def test_lateral_velocity_penalty(self):
        r = reward_step(1.0, [1.0, 0.3, 0.4], [0, 0, 0], np.zeros(12), np.zeros(12))
        assert r == pytest.approx(0.03 - 2 * 0.01 * 0.25, abs=1e-12)

    def test_power_uses_dot_product(self):
        tau = np.ones(12)
        qd = np.ones(12)
        r = reward_step(1.0, [1.0, 0, 0], [0, 0, 0], tau, qd)
        assert r == pytest.approx(0.03 - 0.001 * 0.01 * 12.0, abs=1e-12)

    def test_upper_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            r = reward_step(
                rng.uniform(-3, 3),
                rng.uniform(-3, 3, 3),
                rng.uniform(-5, 5, 3),
                rng.uniform(-20, 20, 12),
                rng.uniform(-10, 10, 12),
            )
            assert r <= 0.03 + 1e-15


class TestCostOfTransport:
    def test_direct_substitution(self):
        # 50 W total, 12 kg, 1 m/s, 5 s -> 250 / (12 * 9.81 * 5)
        log = synthetic_log(power_per_joint=50.0 / 12.0)
        cot = cost_of_transport(log, mass=12.0)
        assert cot == pytest.approx(250.0 / (12 * GRAVITY * 5.0), rel=1e-3)
        assert cot == pytest.approx(0.4247, abs=2e-3)

    def test_zero_torque(self):
        log = synthetic_log(power_per_joint=0.0)
        assert cost_of_transport(log, mass=12.0) == pytest.approx(0.0, abs=1e-15)

    def test_double_velocity_halves_cot(self):
        slow = cost_of_transport(synthetic_log(vx=1.0, power_per_joint=4.0), 12.0)
        fast = cost_of_transport(synthetic_log(vx=2.0, power_per_joint=4.0), 12.0)
        assert fast == pytest.approx(slow / 2.0, rel=1e-9)

    def test_zero_displacement_flagged(self):
        log = synthetic_log(vx=0.0, power_per_joint=1.0)
        assert np.isnan(cost_of_transport(log, mass=12.0))
        rec = episode_metrics(log, mass=12.0)
        assert rec.fault == "zero-displacement"
        assert not rec.is_valid()

    def test_mechanical_power_abs_per_joint(self):
        tau = np.array([1.0, -2.0, 3.0])
        qd = np.array([-1.0, 1.0, 2.0])
        assert mechanical_power(tau, qd) == pytest.approx(1 + 2 + 6)


class TestResiduals:
    def test_two_gaits(self):
        res = joint_acc_residuals([("trot", 1.0, 10.0), ("pace", 1.0, 14.0)])
        assert res[1.0]["trot"] == pytest.approx(-2.0)
        assert res[1.0]["pace"] == pytest.approx(2.0)

    def test_sum_zero_per_velocity(self):
        rng = np.random.default_rng(2)
        records = [
            (g, v, float(rng.uniform(5, 20)))
            for v in (0.5, 1.0, 1.5)
            for g in ("trot", "pace", "walk", "bound")
        ]
        res = joint_acc_residuals(records)
        for v, by_gait in res.items():
            assert sum(by_gait.values()) == pytest.approx(0.0, abs=1e-9)

    def test_identical_gaits_zero(self):
        res = joint_acc_residuals([("a", 1.0, 7.0), ("b", 1.0, 7.0), ("c", 1.0, 7.0)])
        assert all(abs(r) < 1e-12 for r in res[1.0].values())

    def test_single_gait_bin_errors(self):
        with pytest.raises(ConfigError):
            joint_acc_residuals([("trot", 1.0, 10.0)])

    def test_accepts_metrics_records(self):
        rec = MetricsRecord(0.5, 0.1, 12.0, 1.0, 30.0, 5.0)
        res = joint_acc_residuals([("trot", 1.0, rec), ("pace", 1.0, 16.0)])
        assert res[1.0]["trot"] == pytest.approx(-2.0)


class TestMeanAngularVelocity:
    def test_abs_sum_definition(self):
        log = synthetic_log()
        log.data[:, _SLICES["omega_b"]] = np.array([0.1, -0.2, 0.3])
        rec = episode_metrics(log, mass=12.0)
        assert rec.mean_ang_vel == pytest.approx(0.6, abs=1e-12)
