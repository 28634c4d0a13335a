"""Robot description: hip layout, link lengths, masses, and joint limits.

The shipped defaults describe a ~12 kg quadruped with 0.213 m thigh/calf
links; everything is plain config data and can be loaded from a YAML robot
file, so the toolkit stays robot-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .cpg import LEG_NAMES, NUM_LEGS
from .errors import ConfigError, SchemaVersionError
from .kinematics import fk_arrays, ik_arrays, jacobian_arrays

ROBOT_FILE_SCHEMA = "gaitkit-robot/1"

# Leg order FR, FL, HR, HL; side +1 = left.
LEG_SIDES = np.array([-1.0, 1.0, -1.0, 1.0])


def _default_hips() -> np.ndarray:
    return np.array(
        [
            [0.1881, -0.04675, 0.0],
            [0.1881, 0.04675, 0.0],
            [-0.1881, -0.04675, 0.0],
            [-0.1881, 0.04675, 0.0],
        ]
    )


def _default_joint_limits() -> np.ndarray:
    # rows: (abduction, thigh, calf), columns: (lower, upper); calf <= 0
    return np.array([[-0.863, 0.863], [-0.686, 3.5], [-2.818, 0.0]])


@dataclass
class RobotModel:
    name: str = "go1-class"
    l_abd: float = 0.08
    l_thigh: float = 0.213
    l_calf: float = 0.213
    hip_positions: np.ndarray = field(default_factory=_default_hips)
    mass: float = 12.0
    body_inertia: np.ndarray = field(
        default_factory=lambda: np.array([0.085, 0.35, 0.40])
    )
    joint_limits: np.ndarray = field(default_factory=_default_joint_limits)
    torque_limit: float = 23.7
    velocity_limit: float = 30.0
    reflected_inertia: float = 0.045
    thigh_ground_margin: float = 0.0

    def __post_init__(self):
        self.hip_positions = np.asarray(self.hip_positions, dtype=float)
        self.body_inertia = np.asarray(self.body_inertia, dtype=float)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)
        if self.hip_positions.shape != (NUM_LEGS, 3):
            raise ConfigError("hip_positions must be (4, 3)")
        if min(self.l_abd, self.l_thigh, self.l_calf) <= 0:
            raise ConfigError("link lengths must be > 0")
        if self.mass <= 0:
            raise ConfigError("mass must be > 0")
        self.side_l_abd = LEG_SIDES * self.l_abd

    # -- whole-robot kinematics (vectorized over the 4 legs) ------------------

    def fk_all(self, q: np.ndarray) -> np.ndarray:
        """Foot positions in each hip frame; q shape (..., 4, 3)."""
        return fk_arrays(q, self.side_l_abd, self.l_thigh, self.l_calf)

    def ik_all(self, targets: np.ndarray):
        """Joint angles (and clamp flags) for hip-frame targets (..., 4, 3)."""
        return ik_arrays(targets, self.side_l_abd, self.l_thigh, self.l_calf)

    def jacobians(self, q: np.ndarray) -> np.ndarray:
        return jacobian_arrays(q, self.side_l_abd, self.l_thigh, self.l_calf)

    def foot_body_positions(self, q: np.ndarray) -> np.ndarray:
        """Foot positions in the body frame (hips are unrotated)."""
        return self.hip_positions + self.fk_all(q)

    def knee_body_positions(self, q: np.ndarray) -> np.ndarray:
        """Knee (calf joint) positions in the body frame, for thigh-contact checks."""
        q = np.asarray(q, dtype=float)
        q1, q2 = q[..., 0], q[..., 1]
        x = self.l_thigh * np.sin(q2)
        z_pl = -self.l_thigh * np.cos(q2)
        y = self.side_l_abd * np.cos(q1) - z_pl * np.sin(q1)
        z = self.side_l_abd * np.sin(q1) + z_pl * np.cos(q1)
        return self.hip_positions + np.stack([x, y, z], axis=-1)

    def nominal_y(self) -> np.ndarray:
        """Nominal lateral foot position in each hip frame (stance width)."""
        return self.side_l_abd.copy()

    def clamp_joints(self, q: np.ndarray) -> np.ndarray:
        lo = self.joint_limits[:, 0]
        hi = self.joint_limits[:, 1]
        return np.clip(q, lo, hi)

    def nominal_stance_q(self, h: float, x_off: float = 0.0) -> np.ndarray:
        """Joint angles putting every foot at (x_off, nominal y, -h)."""
        targets = np.stack(
            [
                np.full(NUM_LEGS, x_off),
                self.nominal_y(),
                np.full(NUM_LEGS, -h),
            ],
            axis=-1,
        )
        q, clamped = self.ik_all(targets)
        if np.any(clamped):
            raise ConfigError(f"nominal stance at h={h} is outside the workspace")
        return q

    def max_reach(self) -> float:
        return self.l_thigh + self.l_calf

    def as_dict(self) -> dict:
        return {
            "schema": ROBOT_FILE_SCHEMA,
            "name": self.name,
            "leg_order": list(LEG_NAMES),
            "links": {
                "l_abd": self.l_abd,
                "l_thigh": self.l_thigh,
                "l_calf": self.l_calf,
            },
            "hip_positions": [[float(v) for v in row] for row in self.hip_positions],
            "mass": self.mass,
            "body_inertia": [float(v) for v in self.body_inertia],
            "joint_limits": [[float(v) for v in row] for row in self.joint_limits],
            "torque_limit": self.torque_limit,
            "velocity_limit": self.velocity_limit,
            "reflected_inertia": self.reflected_inertia,
        }

    def to_yaml(self, path) -> None:
        with open(path, "w") as f:
            yaml.safe_dump(self.as_dict(), f, sort_keys=False)

    @classmethod
    def from_yaml(cls, path) -> "RobotModel":
        with open(path) as f:
            doc = yaml.safe_load(f)
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: not a robot file")
        if doc.get("schema") != ROBOT_FILE_SCHEMA:
            raise SchemaVersionError(
                f"{path}: unsupported robot schema {doc.get('schema')!r}"
            )
        links = doc.get("links", {})
        return cls(
            name=doc.get("name", "unnamed"),
            l_abd=float(links.get("l_abd", 0.08)),
            l_thigh=float(links.get("l_thigh", 0.213)),
            l_calf=float(links.get("l_calf", 0.213)),
            hip_positions=np.asarray(doc["hip_positions"], dtype=float),
            mass=float(doc["mass"]),
            body_inertia=np.asarray(
                doc.get("body_inertia", [0.085, 0.35, 0.40]), dtype=float
            ),
            joint_limits=np.asarray(doc["joint_limits"], dtype=float),
            torque_limit=float(doc.get("torque_limit", 23.7)),
            velocity_limit=float(doc.get("velocity_limit", 30.0)),
            reflected_inertia=float(doc.get("reflected_inertia", 0.045)),
        )
