"""Pattern-formation tests: foot target mapping and swing/stance split."""

import numpy as np
import pytest

from gaitkit.cpg import OscillatorNetworkState
from gaitkit.errors import ConfigError
from gaitkit.pattern import (
    StyleParams,
    foot_targets_from_arrays,
    map_to_foot_targets,
    swing_flag,
    swing_flags,
    z_bounds,
)


def state_with(theta, r):
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(r, dtype=float)
    return OscillatorNetworkState(
        r=r, r_dot=np.zeros_like(r), theta=theta, theta_dot=np.zeros_like(theta)
    )


STYLE = StyleParams(h=0.3, g_c=0.05, g_p=0.01, x_off=0.0, d_step=0.1)


class TestFootTargets:
    def test_swing_apex(self):
        s = state_with(np.full(4, np.pi / 2), np.full(4, 1.5))
        t = map_to_foot_targets(s, STYLE)
        assert np.allclose(t[:, 0], 0.0, atol=1e-12)
        assert np.allclose(t[:, 2], -0.25)

    def test_max_penetration(self):
        s = state_with(np.full(4, 3 * np.pi / 2), np.full(4, 1.5))
        t = map_to_foot_targets(s, STYLE)
        assert np.allclose(t[:, 0], 0.0, atol=1e-12)
        assert np.allclose(t[:, 2], -0.31)

    def test_unit_amplitude_stands_in_place(self):
        for theta in np.linspace(0, 2 * np.pi, 17):
            s = state_with(np.full(4, theta), np.ones(4))
            t = map_to_foot_targets(s, STYLE)
            assert np.allclose(t[:, 0], STYLE.x_off, atol=1e-12)

    def test_x_range_bound(self):
        rng = np.random.default_rng(0)
        theta = rng.uniform(0, 2 * np.pi, (200, 4))
        r = rng.uniform(1, 2, (200, 4))
        t = foot_targets_from_arrays(theta, r, STYLE)
        assert np.abs(t[..., 0] - STYLE.x_off).max() <= STYLE.d_step + 1e-12

    def test_z_within_bounds(self):
        rng = np.random.default_rng(1)
        theta = rng.uniform(-10, 10, (500, 4))
        r = rng.uniform(0, 2, (500, 4))
        t = foot_targets_from_arrays(theta, r, STYLE)
        lo, hi = z_bounds(STYLE)
        assert t[..., 2].min() >= lo - 1e-12
        assert t[..., 2].max() <= hi + 1e-12

    def test_z_continuous_at_branch(self):
        eps = 1e-9
        for theta0 in (0.0, np.pi):
            below = foot_targets_from_arrays(np.full(4, theta0 - eps), np.ones(4), STYLE)
            above = foot_targets_from_arrays(np.full(4, theta0 + eps), np.ones(4), STYLE)
            assert np.allclose(below[:, 2], above[:, 2], atol=1e-8)
            assert np.allclose(below[:, 2], -STYLE.h, atol=1e-8)

    def test_y_nominal_passthrough(self):
        y = np.array([-0.08, 0.08, -0.08, 0.08])
        s = state_with(np.zeros(4), np.ones(4))
        t = map_to_foot_targets(s, STYLE, y_nominal=y)
        assert np.allclose(t[:, 1], y)


class TestSwingFlag:
    def test_quarter_cycle_is_swing(self):
        s = state_with(np.full(4, np.pi / 4), np.ones(4))
        assert swing_flag(s, 0) is True

    def test_pi_boundary_is_stance(self):
        s = state_with(np.full(4, np.pi), np.ones(4))
        assert swing_flag(s, 0) is False

    def test_three_quarter_is_stance(self):
        s = state_with(np.full(4, 3 * np.pi / 2), np.ones(4))
        assert swing_flag(s, 2) is False

    def test_half_cycle_split(self):
        # over one cycle at constant r, exactly half the phase interval swings
        theta = np.linspace(0, 2 * np.pi, 10000, endpoint=False)
        frac = swing_flags(theta).mean()
        assert frac == pytest.approx(0.5, abs=1e-3)


class TestStyleValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"h": 0.17}, {"h": 0.36}, {"g_c": 0.01}, {"g_c": 0.13},
            {"g_p": -0.001}, {"g_p": 0.016}, {"x_off": -0.09}, {"x_off": 0.04},
            {"d_step": 0.0}, {"d_step": -0.1},
        ],
    )
    def test_out_of_range_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            StyleParams(**kwargs)

    def test_defaults_valid(self):
        StyleParams()

    def test_range_extremes_accepted(self):
        StyleParams(h=0.18, g_c=0.02, g_p=0.0, x_off=-0.08)
        StyleParams(h=0.35, g_c=0.12, g_p=0.015, x_off=0.03)
