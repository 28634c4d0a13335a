"""Pattern formation: oscillator states to desired foot positions in hip frames.

Per leg, amplitude sets the step length around the configured foot offset and
phase sets where the foot is along the step: the sin(theta) > 0 half-cycle is
swing (foot lifted by up to the ground clearance), the other half is stance
(foot pressed down by up to the ground penetration). The y coordinate is held
at the leg's nominal lateral stance width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpg import NUM_LEGS, OscillatorNetworkState
from .errors import ConfigError

H_RANGE = (0.18, 0.35)
GC_RANGE = (0.02, 0.12)
GP_RANGE = (0.0, 0.015)
XOFF_RANGE = (-0.08, 0.03)


@dataclass
class StyleParams:
    """Locomotion style: body height, swing clearance, stance penetration,
    foot offset from the hip, and max step length (all meters)."""

    h: float = 0.30
    g_c: float = 0.05
    g_p: float = 0.01
    x_off: float = 0.0
    d_step: float = 0.2

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = (
            ("h", self.h, H_RANGE),
            ("g_c", self.g_c, GC_RANGE),
            ("g_p", self.g_p, GP_RANGE),
            ("x_off", self.x_off, XOFF_RANGE),
        )
        for name, value, (lo, hi) in checks:
            if not (np.isfinite(value) and lo <= value <= hi):
                raise ConfigError(f"style {name}={value} outside [{lo}, {hi}]")
        if not (np.isfinite(self.d_step) and self.d_step > 0):
            raise ConfigError(f"style d_step={self.d_step} must be > 0")

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "g_c": self.g_c,
            "g_p": self.g_p,
            "x_off": self.x_off,
            "d_step": self.d_step,
        }


def foot_targets_from_arrays(theta, r, style: StyleParams, y_nominal=None):
    """Foot targets (..., 4, 3) in hip frames from raw phase/amplitude arrays.

    x = x_off - d_step * (r - 1) * cos(theta)
    z = -h + g_c * sin(theta) during swing (sin > 0), else -h + g_p * sin(theta)
    """
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(r, dtype=float)
    sin_t = np.sin(theta)
    x = style.x_off - style.d_step * (r - 1.0) * np.cos(theta)
    z = -style.h + np.where(swing_flags(theta), style.g_c, style.g_p) * sin_t
    if y_nominal is None:
        y = np.zeros_like(x)
    else:
        y = np.broadcast_to(np.asarray(y_nominal, dtype=float), x.shape)
    return np.stack([x, y, z], axis=-1)


def map_to_foot_targets(
    state: OscillatorNetworkState, style: StyleParams, y_nominal=None
) -> np.ndarray:
    """Map the oscillator network state to per-leg foot targets (hip frames)."""
    return foot_targets_from_arrays(state.theta, state.r, style, y_nominal)


def swing_flags(theta) -> np.ndarray:
    """True where a leg is in swing (sin(theta) > 0); sin(theta) = 0 is stance.

    Evaluated on the wrapped phase so that theta = pi (touch-down) lands
    exactly on the stance side despite floating-point sin(pi) != 0.
    """
    wrapped = np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi)
    return (wrapped > 0.0) & (wrapped < np.pi)


def swing_flag(state: OscillatorNetworkState, leg: int) -> bool:
    return bool(swing_flags(state.theta[..., leg]))


def z_bounds(style: StyleParams) -> tuple[float, float]:
    """Reachable z interval [-h - g_p, -h + g_c] for any phase/amplitude."""
    return (-style.h - style.g_p, -style.h + style.g_c)
