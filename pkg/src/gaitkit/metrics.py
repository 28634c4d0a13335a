"""Gait quality metrics: Cost of Transport, base stability, joint smoothness.

Cost of Transport uses mechanical joint power summed as sum_j |tau_j * qd_j|
(no regeneration credit), normalized by weight times forward distance. The
per-step reward mirrors the training objective: forward-velocity tracking
through a squared-exponential kernel minus lateral/vertical velocity, body
angular velocity, and power penalties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .trajlog import TrajectoryLog

GRAVITY = 9.81

REWARD_DT = 0.01
TRACKING_WEIGHT = 3.0
LATERAL_WEIGHT = 2.0
ANGULAR_WEIGHT = 0.1
POWER_WEIGHT = 0.001
KERNEL_SCALE = 0.25


@dataclass
class MetricsRecord:
    """Per-episode summary. `fault` marks episodes whose numbers should not be
    compared (falls, divergence, zero displacement)."""

    cot: float
    mean_ang_vel: float
    mean_joint_acc: float
    mean_vx: float
    mean_power: float
    distance: float
    duration: float = 0.0
    fault: str = ""

    def is_valid(self) -> bool:
        return self.fault == "" and math.isfinite(self.cot)

    def as_dict(self) -> dict:
        return {
            "cot": self.cot,
            "mean_ang_vel": self.mean_ang_vel,
            "mean_joint_acc": self.mean_joint_acc,
            "mean_vx": self.mean_vx,
            "mean_power": self.mean_power,
            "distance": self.distance,
            "duration": self.duration,
            "fault": self.fault,
        }


def velocity_kernel(x) -> float:
    """exp(-||x||^2 / 0.25), the tracking kernel of the reward."""
    x = np.asarray(x, dtype=float)
    return float(np.exp(-np.dot(np.ravel(x), np.ravel(x)) / KERNEL_SCALE))


def reward_step(v_cmd, v_b, omega_b, tau, qd, dt: float = REWARD_DT) -> float:
    """One control step of the training reward (weights scale with dt)."""
    v_b = np.asarray(v_b, dtype=float)
    omega_b = np.asarray(omega_b, dtype=float)
    tracking = velocity_kernel(v_cmd - v_b[0])
    lateral = float(v_b[1] ** 2 + v_b[2] ** 2)
    angular = float(np.dot(omega_b, omega_b))
    power = abs(float(np.dot(np.ravel(tau), np.ravel(qd))))
    return dt * (
        TRACKING_WEIGHT * tracking
        - LATERAL_WEIGHT * lateral
        - ANGULAR_WEIGHT * angular
        - POWER_WEIGHT * power
    )


def mechanical_power(tau, qd) -> np.ndarray:
    """Per-sample sum_j |tau_j * qd_j| (W)."""
    return np.abs(np.asarray(tau, dtype=float) * np.asarray(qd, dtype=float)).sum(
        axis=-1
    )


def cost_of_transport(log: TrajectoryLog, mass: float) -> float:
    """COT = sum_t sum_j |tau_j qd_j| dt / (m g d); nan if the log goes nowhere."""
    if len(log) < 2:
        return float("nan")
    power = mechanical_power(log["tau"], log["qd"])
    energy = float(power[:-1].sum() * log.dt)  # left Riemann over the log span
    distance = float(log.column("base_pos")[-1, 0] - log.column("base_pos")[0, 0])
    if distance <= 1e-6:
        return float("nan")
    return energy / (mass * GRAVITY * distance)


def mean_joint_acceleration(log: TrajectoryLog) -> float:
    """Mean |qdd| over joints and time, by central differences of logged qd."""
    qd = log["qd"]
    if qd.shape[0] < 3:
        return 0.0
    qdd = (qd[2:] - qd[:-2]) / (2.0 * log.dt)
    return float(np.abs(qdd).mean())


def episode_metrics(log: TrajectoryLog, mass: float, fault: bool = False) -> MetricsRecord:
    """Summarize one trajectory log into a MetricsRecord."""
    duration = log.duration()
    v_b = log["v_b"]
    omega = log["omega_b"]
    power = mechanical_power(log["tau"], log["qd"])
    distance = (
        float(log.column("base_pos")[-1, 0] - log.column("base_pos")[0, 0])
        if len(log)
        else 0.0
    )
    cot = cost_of_transport(log, mass)
    fault_reason = "fault" if fault else ""
    if not math.isfinite(cot):
        fault_reason = fault_reason or "zero-displacement"
        cot = float("nan")
    return MetricsRecord(
        cot=cot,
        mean_ang_vel=float(np.abs(omega).sum(axis=1).mean()) if len(log) else 0.0,
        mean_joint_acc=mean_joint_acceleration(log),
        mean_vx=float(v_b[:, 0].mean()) if len(log) else 0.0,
        mean_power=float(power.mean()) if len(log) else 0.0,
        distance=distance,
        duration=duration,
        fault=fault_reason,
    )


def joint_acc_residuals(records) -> dict:
    """Per-gait joint-acceleration residuals against the cross-gait mean.

    `records` is an iterable of (gait_name, velocity, mean_joint_acc | record).
    Returns {velocity: {gait: residual}}; residuals at each velocity sum to 0.
    Raises if any velocity bin holds fewer than 2 gaits.
    """
    bins: dict = {}
    for gait, velocity, value in records:
        if isinstance(value, MetricsRecord):
            value = value.mean_joint_acc
        bins.setdefault(float(velocity), {})[gait] = float(value)
    out = {}
    for velocity, by_gait in sorted(bins.items()):
        if len(by_gait) < 2:
            raise ConfigError(
                f"velocity bin {velocity} has a single gait; residuals undefined"
            )
        mean = sum(by_gait.values()) / len(by_gait)
        out[velocity] = {g: v - mean for g, v in sorted(by_gait.items())}
    return out
