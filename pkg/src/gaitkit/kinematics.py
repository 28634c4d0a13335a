"""Analytic kinematics for a 3-DOF quadruped leg (abduction, thigh, calf).

Hip frame: x forward, y left, z up, origin at the abduction joint. The
abduction joint rolls about x; thigh and calf pitch about the (rotated) y
axis. The knee-backward branch (q_calf <= 0) is used throughout.

Joint sign conventions: positive q_thigh swings the foot forward; q_calf is
the knee flexion (0 = fully extended). With all angles zero the foot sits at
(0, side * l_abd, -(l_thigh + l_calf)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class LegGeometry:
    """Link lengths of one leg; side = +1 for left legs, -1 for right legs."""

    l_abd: float = 0.08
    l_thigh: float = 0.213
    l_calf: float = 0.213
    side: int = 1

    def __post_init__(self):
        if min(self.l_abd, self.l_thigh, self.l_calf) <= 0:
            raise ConfigError("leg link lengths must be > 0")
        if self.side not in (-1, 1):
            raise ConfigError("side must be +1 (left) or -1 (right)")


def fk_arrays(q, side_l_abd, l_thigh, l_calf):
    """Forward kinematics on raw arrays.

    q has shape (..., 3) = (q_abd, q_thigh, q_calf); side_l_abd is the signed
    lateral offset (side * l_abd), broadcastable over the leading dims.
    Returns foot positions (..., 3) in the hip frame.
    """
    q = np.asarray(q, dtype=float)
    q1 = q[..., 0]
    q2 = q[..., 1]
    q23 = q2 + q[..., 2]
    x = l_thigh * np.sin(q2) + l_calf * np.sin(q23)
    z_pl = -(l_thigh * np.cos(q2) + l_calf * np.cos(q23))
    c1 = np.cos(q1)
    s1 = np.sin(q1)
    y = side_l_abd * c1 - z_pl * s1
    z = side_l_abd * s1 + z_pl * c1
    return np.stack([x, y, z], axis=-1)


def ik_arrays(target, side_l_abd, l_thigh, l_calf):
    """Inverse kinematics on raw arrays; knee-backward branch.

    Returns (q, clamped) where q has shape (..., 3) and clamped flags targets
    that had to be projected onto the workspace boundary.
    """
    target = np.asarray(target, dtype=float)
    px, py, pz = target[..., 0], target[..., 1], target[..., 2]
    side_l_abd = np.broadcast_to(np.asarray(side_l_abd, dtype=float), px.shape)
    l_abd = np.abs(side_l_abd)

    rho_sq = py * py + pz * pz
    clamped = rho_sq < l_abd * l_abd * (1.0 - 1e-12)
    rho_sq = np.maximum(rho_sq, l_abd * l_abd)
    z_pl = -np.sqrt(rho_sq - l_abd * l_abd)
    # rotate (py, pz) back onto (side*l_abd, z_pl) about the x axis
    q1 = np.arctan2(pz, py) - np.arctan2(z_pl, side_l_abd)
    q1 = np.pi - np.mod(np.pi - q1, 2.0 * np.pi)

    d_sq = px * px + z_pl * z_pl
    cos_knee = (d_sq - l_thigh**2 - l_calf**2) / (2.0 * l_thigh * l_calf)
    clamped = clamped | (cos_knee > 1.0 + 1e-12) | (cos_knee < -1.0 - 1e-12)
    cos_knee = np.clip(cos_knee, -1.0, 1.0)
    q3 = -np.arccos(cos_knee)
    q2 = np.arctan2(px, -z_pl) - np.arctan2(
        l_calf * np.sin(q3), l_thigh + l_calf * np.cos(q3)
    )
    return np.stack([q1, q2, q3], axis=-1), clamped


def jacobian_arrays(q, side_l_abd, l_thigh, l_calf):
    """Analytic Jacobian d(foot position)/dq, shape (..., 3, 3)."""
    q = np.asarray(q, dtype=float)
    q1 = q[..., 0]
    q2 = q[..., 1]
    q23 = q2 + q[..., 2]
    s1, c1 = np.sin(q1), np.cos(q1)
    x_pl = l_thigh * np.sin(q2) + l_calf * np.sin(q23)
    z_pl = -(l_thigh * np.cos(q2) + l_calf * np.cos(q23))
    dx_dq2 = -z_pl
    dx_dq3 = l_calf * np.cos(q23)
    dz_pl_dq2 = x_pl
    dz_pl_dq3 = l_calf * np.sin(q23)

    zeros = np.zeros_like(q1)
    row_x = np.stack([zeros, dx_dq2, dx_dq3], axis=-1)
    row_y = np.stack(
        [-side_l_abd * s1 - z_pl * c1, -s1 * dz_pl_dq2, -s1 * dz_pl_dq3], axis=-1
    )
    row_z = np.stack(
        [side_l_abd * c1 - z_pl * s1, c1 * dz_pl_dq2, c1 * dz_pl_dq3], axis=-1
    )
    return np.stack([row_x, row_y, row_z], axis=-2)


def fk(q, geom: LegGeometry) -> np.ndarray:
    """Foot position in the hip frame for joint angles q = (q_abd, q_thigh, q_calf)."""
    return fk_arrays(q, geom.side * geom.l_abd, geom.l_thigh, geom.l_calf)


def ik(target, geom: LegGeometry):
    """Joint angles for a hip-frame foot target; returns (q, clamped_flag)."""
    q, clamped = ik_arrays(target, geom.side * geom.l_abd, geom.l_thigh, geom.l_calf)
    return q, clamped


def jacobian(q, geom: LegGeometry) -> np.ndarray:
    return jacobian_arrays(q, geom.side * geom.l_abd, geom.l_thigh, geom.l_calf)
