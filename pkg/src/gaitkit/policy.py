"""Policies mapping observations to oscillator modulation commands.

All variants clamp their output to the command boxes (mu in [1, 2], omega in
[0, 8] Hz). The default constant-table policy holds one (mu, omega) table per
gait over commanded-velocity knots; the active gait is inferred from the CPG
phases in the observation (the efference copy), never given out-of-band.
"""

from __future__ import annotations

import json

import numpy as np

from .cpg import (
    GAIT_NAMES,
    GaitMatrix,
    NUM_LEGS,
    OscillatorNetworkState,
    gait_library,
    phase_error,
)
from .errors import ConfigError, SchemaVersionError

POLICY_SCHEMA = "gaitkit-policy/1"

MU_LO, MU_HI = 1.0, 2.0
OM_LO, OM_HI = 0.0, 8.0

# observation slices (see simulator.OBSERVATION_LAYOUT)
OBS_V_CMD = 0
OBS_THETA = slice(55, 59)
OBS_R = slice(47, 51)


def clamp_action(action: np.ndarray) -> np.ndarray:
    action = np.asarray(action, dtype=float).copy()
    action[:NUM_LEGS] = np.clip(action[:NUM_LEGS], MU_LO, MU_HI)
    action[NUM_LEGS:] = np.clip(action[NUM_LEGS:], OM_LO, OM_HI)
    return action


class Policy:
    """Interface: act(obs) -> 8-vector [mu x4, omega x4], always in range."""

    variant = "abstract"

    def act(self, obs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def get_params(self) -> np.ndarray:
        raise NotImplementedError

    def set_params(self, params: np.ndarray) -> None:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def save(self, path) -> None:
        doc = {"schema": POLICY_SCHEMA, "variant": self.variant, "data": self.to_dict()}
        with open(path, "w") as f:
            json.dump(doc, f, indent=1, sort_keys=True)
            f.write("\n")


def load_policy(path) -> Policy:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("schema") != POLICY_SCHEMA:
        raise SchemaVersionError(f"{path}: unsupported policy schema")
    variant = doc.get("variant")
    data = doc.get("data", {})
    if variant == "constant-table":
        return ConstantTablePolicy.from_dict(data)
    if variant == "linear":
        return LinearPolicy.from_dict(data)
    if variant == "small-mlp":
        return MLPPolicy.from_dict(data)
    raise ConfigError(f"{path}: unknown policy variant {variant!r}")


class GaitInference:
    """Identify the active gait from observed oscillator phases."""

    def __init__(self, names=GAIT_NAMES):
        self._gaits = [gait_library(n) for n in names]

    def infer(self, theta: np.ndarray) -> str:
        state = OscillatorNetworkState(
            r=np.ones(NUM_LEGS), r_dot=np.zeros(NUM_LEGS),
            theta=np.asarray(theta, dtype=float), theta_dot=np.zeros(NUM_LEGS),
        )
        errs = [float(phase_error(state, g)) for g in self._gaits]
        return self._gaits[int(np.argmin(errs))].name


class ConstantTablePolicy(Policy):
    """Per-gait (mu, omega) values over velocity knots, linearly interpolated.

    `trainable_gait` selects which gait's table get_params/set_params expose,
    so an optimizer can tune one gait at a time.
    """

    variant = "constant-table"

    def __init__(self, knots, tables: dict, default=None, trainable_gait="trot"):
        self.knots = np.asarray(knots, dtype=float)
        if self.knots.ndim != 1 or len(self.knots) < 1:
            raise ConfigError("knots must be a non-empty 1-D velocity grid")
        self.tables = {
            name: np.asarray(vals, dtype=float).reshape(len(self.knots), 8)
            for name, vals in tables.items()
        }
        if default is None:
            default = next(iter(self.tables.values()))
        self.default = np.asarray(default, dtype=float).reshape(len(self.knots), 8)
        self.trainable_gait = trainable_gait
        self._inference = GaitInference()

    @classmethod
    def stride_feedforward(
        cls,
        knots=(0.0, 0.3, 0.6, 1.0, 1.5, 2.0, 2.5, 3.0),
        mu: float = 1.5,
        d_step: float = 0.2,
        gaits=GAIT_NAMES,
    ) -> "ConstantTablePolicy":
        """Hand baseline from stride arithmetic: v = 4 d_step (mu - 1) omega."""
        knots = np.asarray(knots, dtype=float)
        table = np.zeros((len(knots), 8))
        table[:, :4] = mu
        omega = knots / (4.0 * d_step * (mu - 1.0))
        table[:, 4:] = np.clip(omega, OM_LO, OM_HI)[:, None]
        return cls(knots, {g: table.copy() for g in gaits})

    def table_for(self, name: str) -> np.ndarray:
        return self.tables.get(name, self.default)

    def act(self, obs: np.ndarray) -> np.ndarray:
        v = float(obs[OBS_V_CMD])
        gait = self._inference.infer(obs[OBS_THETA])
        table = self.table_for(gait)
        out = np.empty(8)
        for c in range(8):
            out[c] = np.interp(v, self.knots, table[:, c])
        return clamp_action(out)

    def get_params(self) -> np.ndarray:
        return self.table_for(self.trainable_gait).ravel().copy()

    def set_params(self, params: np.ndarray) -> None:
        self.tables[self.trainable_gait] = np.asarray(
            params, dtype=float
        ).reshape(len(self.knots), 8)

    def to_dict(self) -> dict:
        return {
            "knots": [float(k) for k in self.knots],
            "tables": {n: t.tolist() for n, t in sorted(self.tables.items())},
            "default": self.default.tolist(),
            "trainable_gait": self.trainable_gait,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantTablePolicy":
        return cls(
            data["knots"],
            data["tables"],
            default=data.get("default"),
            trainable_gait=data.get("trainable_gait", "trot"),
        )


class LinearPolicy(Policy):
    """action = clamp(W @ obs + b); parameters are [W.ravel(), b]."""

    variant = "linear"

    def __init__(self, weights=None, bias=None, obs_dim: int = 63):
        self.obs_dim = obs_dim
        self.W = (
            np.zeros((8, obs_dim)) if weights is None
            else np.asarray(weights, dtype=float).reshape(8, obs_dim)
        )
        if bias is None:
            bias = np.concatenate([np.full(4, 1.5), np.full(4, 2.0)])
        self.b = np.asarray(bias, dtype=float).reshape(8)

    def act(self, obs: np.ndarray) -> np.ndarray:
        return clamp_action(self.W @ np.asarray(obs, dtype=float) + self.b)

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b])

    def set_params(self, params: np.ndarray) -> None:
        params = np.asarray(params, dtype=float)
        n = 8 * self.obs_dim
        self.W = params[:n].reshape(8, self.obs_dim)
        self.b = params[n:].copy()

    def to_dict(self) -> dict:
        return {"obs_dim": self.obs_dim, "W": self.W.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "LinearPolicy":
        return cls(data["W"], data["b"], obs_dim=int(data["obs_dim"]))


class MLPPolicy(Policy):
    """One tanh hidden layer; small enough for evolution strategies."""

    variant = "small-mlp"

    def __init__(self, hidden: int = 16, obs_dim: int = 63, params=None):
        self.hidden = hidden
        self.obs_dim = obs_dim
        n = hidden * obs_dim + hidden + 8 * hidden + 8
        self._params = np.zeros(n) if params is None else np.asarray(params, dtype=float)
        if self._params.shape != (n,):
            raise ConfigError(f"mlp parameter vector must have length {n}")

    def _unpack(self):
        h, d = self.hidden, self.obs_dim
        p = self._params
        i = 0
        W1 = p[i : i + h * d].reshape(h, d); i += h * d
        b1 = p[i : i + h]; i += h
        W2 = p[i : i + 8 * h].reshape(8, h); i += 8 * h
        b2 = p[i : i + 8]
        return W1, b1, W2, b2

    def act(self, obs: np.ndarray) -> np.ndarray:
        W1, b1, W2, b2 = self._unpack()
        z = np.tanh(W1 @ np.asarray(obs, dtype=float) + b1)
        raw = W2 @ z + b2
        # map through the box centers so zero parameters give a sane command
        out = np.empty(8)
        out[:4] = 1.5 + 0.5 * np.tanh(raw[:4])
        out[4:] = 4.0 + 4.0 * np.tanh(raw[4:])
        return clamp_action(out)

    def get_params(self) -> np.ndarray:
        return self._params.copy()

    def set_params(self, params: np.ndarray) -> None:
        params = np.asarray(params, dtype=float)
        if params.shape != self._params.shape:
            raise ConfigError("parameter shape mismatch")
        self._params = params.copy()

    def to_dict(self) -> dict:
        return {
            "hidden": self.hidden,
            "obs_dim": self.obs_dim,
            "params": self._params.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MLPPolicy":
        return cls(
            hidden=int(data["hidden"]),
            obs_dim=int(data["obs_dim"]),
            params=data["params"],
        )


def cpg_param_trace(log, window_s: float | None = None) -> dict:
    """Mean commanded mu and omega over the steady-state tail of a log.

    Raises if the window is shorter than one gait cycle (estimated from the
    mean commanded frequency).
    """
    if window_s is None:
        window_s = log.duration() / 2.0
    tail = log.tail(window_s)
    action = tail["action"]
    if action.shape[0] < 2:
        raise ConfigError("log too short for a parameter trace")
    mean_mu = action[:, :4].mean(axis=0)
    mean_omega = action[:, 4:].mean(axis=0)
    f = float(mean_omega.mean())
    if f > 0 and window_s < 1.0 / f:
        raise ConfigError(
            f"trace window {window_s:.3f} s is shorter than one gait cycle"
        )
    return {
        "mean_mu": mean_mu,
        "mean_omega": mean_omega,
        "v_cmd": float(tail.column("v_cmd").mean()),
    }
