"""Rhythm generation: a network of four coupled amplitude-controlled phase oscillators.

One oscillator per leg, leg order FR, FL, HR, HL everywhere. Amplitude dynamics
are critically damped toward the commanded intrinsic amplitude; phases advance
at the commanded intrinsic frequency plus a sine coupling term that pulls the
network into the phase offsets of the active gait matrix.

Conventions that the rest of the toolkit relies on:

* ``phi[i][j] = phase[i] - phase[j]`` (wrapped to (-pi, pi]). With the coupling
  term ``sin(theta_j - theta_i - phi_ij)`` this makes the locked solution
  ``theta_i = common_phase - phase[i]``: a leg with a larger phase offset
  touches down later in the cycle, which reproduces the footfall orderings of
  the gait diagrams (see :meth:`GaitMatrix.locked_phases`).
* Commanded frequency is in Hz and contributes ``2*pi*omega`` to the phase rate.
* ``phase_error`` is the largest wrapped coupling residual
  ``|theta_j - theta_i - phi_ij|`` over all oscillator pairs; it is exactly 0
  on the locked solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ConfigError, NumericalDivergenceError, UnknownGaitError

LEG_NAMES = ("FR", "FL", "HR", "HL")
NUM_LEGS = 4
TWO_PI = 2.0 * np.pi

MU_RANGE = (1.0, 2.0)
OMEGA_RANGE = (0.0, 8.0)  # Hz

GAIT_FILE_SCHEMA = "gaitkit-gaits/1"

# Per-leg phase offsets (cycle fractions, order FR FL HR HL). Walk/amble share
# the quarter-cycle lateral-sequence pattern; canter and the gallops are the
# shipped footfall conventions and can be overridden via a gait file.
GAIT_PHASE_FRACTIONS = {
    "pronk": (0.0, 0.0, 0.0, 0.0),
    "bound": (0.0, 0.0, 0.5, 0.5),
    "pace": (0.0, 0.5, 0.0, 0.5),
    "trot": (0.0, 0.5, 0.5, 0.0),
    "walk": (0.0, 0.5, 0.75, 0.25),
    "amble": (0.0, 0.5, 0.75, 0.25),
    "canter": (0.0, 0.3, 0.7, 0.0),
    "transverse-gallop": (0.0, 0.1, 0.6, 0.5),
    "rotary-gallop": (0.0, 0.1, 0.5, 0.6),
}

GAIT_ALIASES = {
    "lateral-sequence-walk": "walk",
    "lateral-sequence": "walk",
    "t-g": "transverse-gallop",
    "r-g": "rotary-gallop",
}

GAIT_NAMES = tuple(GAIT_PHASE_FRACTIONS)


def wrap_angle(x):
    """Wrap angle(s) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)


def normalize_gait_name(name: str) -> str:
    key = name.strip().lower().replace("_", "-").replace(" ", "-").replace(".", "-")
    return GAIT_ALIASES.get(key, key)


@dataclass
class CpgConfig:
    """Integration settings for the oscillator network.

    a: amplitude convergence factor (1/s). The amplitude response is critically
       damped with a double pole at -a/2.
    w: coupling weight applied to every off-diagonal pair (scaled per pair by
       the gait's weight mask).
    dt: integration step (s); the network is meant to run at 1 kHz.
    omega_is_hz: commanded frequency unit flag, fixed True (theta_dot picks up
       2*pi*omega). Kept as an explicit field so configs are self-describing.
    integrator: "euler" (default) or "rk4". The Euler path matches the 1 kHz
       explicit integration the controller runs at; rk4 is for accuracy
       studies of the amplitude dynamics.
    """

    a: float = 50.0
    w: float = 10.0
    dt: float = 1e-3
    omega_is_hz: bool = True
    integrator: str = "euler"

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError(f"convergence factor a must be > 0, got {self.a}")
        if self.w < 0:
            raise ConfigError(f"coupling weight w must be >= 0, got {self.w}")
        if not 0 < self.dt <= 0.002:
            raise ConfigError(f"dt must be in (0, 0.002], got {self.dt}")
        if self.integrator not in ("euler", "rk4"):
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        if not self.omega_is_hz:
            raise ConfigError("commanded omega is defined in Hz for this artifact")


@dataclass
class OscillatorNetworkState:
    """Amplitudes/phases and their rates for the 4 oscillators.

    Arrays have shape (..., 4); a leading batch dimension runs many independent
    networks at once. theta is stored unwrapped; use theta_wrapped() for
    reporting.
    """

    r: np.ndarray
    r_dot: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray

    def theta_wrapped(self) -> np.ndarray:
        return np.mod(self.theta, TWO_PI)

    def copy(self) -> "OscillatorNetworkState":
        return OscillatorNetworkState(
            self.r.copy(), self.r_dot.copy(), self.theta.copy(), self.theta_dot.copy()
        )

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.r).all()
            and np.isfinite(self.r_dot).all()
            and np.isfinite(self.theta).all()
        )


@dataclass
class ModulationCommand:
    """Intrinsic amplitude and frequency commands, one per leg.

    mu is clamped to [1, 2] and omega to [0, 8] Hz on construction.
    """

    mu: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.mu = np.clip(np.asarray(self.mu, dtype=float), *MU_RANGE)
        self.omega = np.clip(np.asarray(self.omega, dtype=float), *OMEGA_RANGE)

    @classmethod
    def constant(cls, mu: float, omega: float) -> "ModulationCommand":
        return cls(np.full(NUM_LEGS, mu), np.full(NUM_LEGS, omega))

    @classmethod
    def from_action(cls, action: np.ndarray) -> "ModulationCommand":
        action = np.asarray(action, dtype=float)
        return cls(action[..., :NUM_LEGS], action[..., NUM_LEGS:])


@dataclass(frozen=True)
class GaitMatrix:
    """A gait: per-leg phase offsets and the derived pairwise bias matrix.

    phi[i][j] = phase[i] - phase[j], wrapped; weight_mask holds per-pair
    multipliers of the config coupling weight (all ones off-diagonal by
    default, zero diagonal).
    """

    name: str
    phase: np.ndarray
    phi: np.ndarray
    weight_mask: np.ndarray

    @classmethod
    def from_phase(cls, phase, name: str = "custom", weight_mask=None) -> "GaitMatrix":
        phase = np.asarray(phase, dtype=float)
        if phase.shape != (NUM_LEGS,):
            raise ConfigError(f"phase vector must have shape (4,), got {phase.shape}")
        if not np.isfinite(phase).all():
            raise ConfigError("phase vector must be finite")
        phase = np.mod(phase, TWO_PI)
        phi = wrap_angle(phase[:, None] - phase[None, :])
        if weight_mask is None:
            weight_mask = 1.0 - np.eye(NUM_LEGS)
        else:
            weight_mask = np.asarray(weight_mask, dtype=float)
            if weight_mask.shape != (NUM_LEGS, NUM_LEGS):
                raise ConfigError("weight mask must be 4x4")
            weight_mask = weight_mask * (1.0 - np.eye(NUM_LEGS))
        phase.setflags(write=False)
        phi.setflags(write=False)
        weight_mask.setflags(write=False)
        return cls(name=name, phase=phase, phi=phi, weight_mask=weight_mask)

    def locked_phases(self) -> np.ndarray:
        """Oscillator phases (mod 2pi) that realize this gait under the coupling.

        The coupling drives theta_j - theta_i toward phi[i][j], whose solution
        is theta_i = C - phase[i]; legs with larger offsets touch down later.
        """
        return np.mod(-self.phase, TWO_PI)

    def phase_fractions(self) -> np.ndarray:
        return self.phase / TWO_PI


def gait_library(name: str) -> GaitMatrix:
    """Return the library GaitMatrix for one of the 9 gait identifiers."""
    key = normalize_gait_name(name)
    if key not in GAIT_PHASE_FRACTIONS:
        raise UnknownGaitError(
            f"unknown gait {name!r}; valid identifiers: {', '.join(GAIT_NAMES)}"
        )
    fractions = np.asarray(GAIT_PHASE_FRACTIONS[key], dtype=float)
    return GaitMatrix.from_phase(TWO_PI * fractions, name=key)


def custom_gait(phase, weight_mask=None, name: str = "custom") -> GaitMatrix:
    """Build a GaitMatrix from an arbitrary per-leg phase vector (rad)."""
    return GaitMatrix.from_phase(phase, name=name, weight_mask=weight_mask)


def _phase_rates(theta, r, cmd_omega, gait: GaitMatrix, w: float):
    # theta_dot_i = 2*pi*omega_i + sum_j r_j * w_ij * sin(theta_j - theta_i - phi_ij)
    diff = theta[..., None, :] - theta[..., :, None] - gait.phi
    wmat = w * gait.weight_mask
    if theta.ndim == 1:
        coupling = (wmat * np.sin(diff)) @ r
    else:
        coupling = np.einsum("...j,ij,...ij->...i", r, wmat, np.sin(diff))
    return TWO_PI * cmd_omega + coupling


def _amplitude_accel(r, r_dot, mu, a: float):
    return a * (0.25 * a * (mu - r) - r_dot)


def step(
    state: OscillatorNetworkState,
    cmd: ModulationCommand,
    gait: GaitMatrix,
    cfg: CpgConfig,
) -> OscillatorNetworkState:
    """Advance the network by one integration step.

    Deterministic; supports batched states. The returned theta_dot/r_dot are
    the rates applied over the step (evaluated at its start), so they form a
    consistent efference-copy snapshot with the pre-step phases.
    """
    if not state.is_finite():
        raise NumericalDivergenceError("oscillator state is non-finite")
    dt = cfg.dt
    if cfg.integrator == "euler":
        theta_dot = _phase_rates(state.theta, state.r, cmd.omega, gait, cfg.w)
        r_ddot = _amplitude_accel(state.r, state.r_dot, cmd.mu, cfg.a)
        return OscillatorNetworkState(
            r=state.r + dt * state.r_dot,
            r_dot=state.r_dot + dt * r_ddot,
            theta=state.theta + dt * theta_dot,
            theta_dot=theta_dot,
        )

    # rk4 over the joint (r, r_dot, theta) system
    def rates(r, r_dot, theta):
        return (
            r_dot,
            _amplitude_accel(r, r_dot, cmd.mu, cfg.a),
            _phase_rates(theta, r, cmd.omega, gait, cfg.w),
        )

    r0, v0, t0 = state.r, state.r_dot, state.theta
    k1 = rates(r0, v0, t0)
    k2 = rates(r0 + 0.5 * dt * k1[0], v0 + 0.5 * dt * k1[1], t0 + 0.5 * dt * k1[2])
    k3 = rates(r0 + 0.5 * dt * k2[0], v0 + 0.5 * dt * k2[1], t0 + 0.5 * dt * k2[2])
    k4 = rates(r0 + dt * k3[0], v0 + dt * k3[1], t0 + dt * k3[2])
    sixth = dt / 6.0
    return OscillatorNetworkState(
        r=r0 + sixth * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        r_dot=v0 + sixth * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        theta=t0 + sixth * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
        theta_dot=k1[2],
    )


def step_block(
    state: OscillatorNetworkState,
    cmd: ModulationCommand,
    gait: GaitMatrix,
    cfg: CpgConfig,
    n: int,
):
    """Advance a single (unbatched) network n steps, recording each step.

    Same arithmetic as calling step() n times, without per-step state
    wrapping; used by the simulation inner loop. Returns the new state plus
    per-step (r, r_dot, theta, theta_dot) arrays of shape (n, 4).
    """
    if not state.is_finite():
        raise NumericalDivergenceError("oscillator state is non-finite")
    dt = cfg.dt
    r, r_dot, theta = state.r, state.r_dot, state.theta
    r_seq = np.empty((n, NUM_LEGS))
    rdot_seq = np.empty((n, NUM_LEGS))
    theta_seq = np.empty((n, NUM_LEGS))
    thetadot_seq = np.empty((n, NUM_LEGS))
    if cfg.integrator == "euler":
        for k in range(n):
            theta_dot = _phase_rates(theta, r, cmd.omega, gait, cfg.w)
            r_ddot = _amplitude_accel(r, r_dot, cmd.mu, cfg.a)
            r = r + dt * r_dot
            r_dot = r_dot + dt * r_ddot
            theta = theta + dt * theta_dot
            r_seq[k] = r
            rdot_seq[k] = r_dot
            theta_seq[k] = theta
            thetadot_seq[k] = theta_dot
        out = OscillatorNetworkState(r=r, r_dot=r_dot, theta=theta, theta_dot=theta_dot)
    else:
        out = state
        for k in range(n):
            out = step(out, cmd, gait, cfg)
            r_seq[k] = out.r
            rdot_seq[k] = out.r_dot
            theta_seq[k] = out.theta
            thetadot_seq[k] = out.theta_dot
    return out, r_seq, rdot_seq, theta_seq, thetadot_seq


def phase_error(state: OscillatorNetworkState, gait: GaitMatrix) -> np.ndarray:
    """Largest wrapped pairwise residual |theta_j - theta_i - phi_ij| (rad).

    0 means the network sits exactly on the gait's locked solution. Batched
    states return one error per batch entry.
    """
    diff = state.theta[..., None, :] - state.theta[..., :, None] - gait.phi
    return np.abs(wrap_angle(diff)).max(axis=(-2, -1))


def initial_state(
    gait: GaitMatrix,
    rng: np.random.Generator | None = None,
    phase_noise: float = 0.5,
    r0: float = 1.0,
    batch: int | None = None,
) -> OscillatorNetworkState:
    """Reset state: locked gait phases plus uniform noise, r = r0, r_dot = 0."""
    shape = (NUM_LEGS,) if batch is None else (batch, NUM_LEGS)
    theta = np.broadcast_to(gait.locked_phases(), shape).copy()
    if phase_noise > 0:
        if rng is None:
            rng = np.random.default_rng()
        theta = theta + rng.uniform(-phase_noise, phase_noise, shape)
    return OscillatorNetworkState(
        r=np.full(shape, float(r0)),
        r_dot=np.zeros(shape),
        theta=theta,
        theta_dot=np.zeros(shape),
    )


def random_phase_state(
    rng: np.random.Generator, r0: float = 1.0, batch: int | None = None
) -> OscillatorNetworkState:
    """State with phases uniform on [0, 2pi), r = r0, rates zero."""
    shape = (NUM_LEGS,) if batch is None else (batch, NUM_LEGS)
    return OscillatorNetworkState(
        r=np.full(shape, float(r0)),
        r_dot=np.zeros(shape),
        theta=rng.uniform(0.0, TWO_PI, shape),
        theta_dot=np.zeros(shape),
    )


def amplitude_closed_form(t, a: float, mu: float, r0: float, r_dot0: float = 0.0):
    """Closed-form solution of the amplitude dynamics (double pole at -a/2).

    r(t) = mu + (c1 + c2 t) exp(-a t / 2) with c1, c2 fixed by the initial
    amplitude and rate. Oracle for integrator-accuracy tests.
    """
    t = np.asarray(t, dtype=float)
    c = 0.5 * a
    c1 = r0 - mu
    c2 = r_dot0 + c * c1
    return mu + (c1 + c2 * t) * np.exp(-c * t)


def dump_gaits(gaits, path) -> None:
    """Write gait definitions to a YAML text file (documented schema)."""
    entries = []
    for g in gaits:
        entry = {
            "name": g.name,
            "phase_fractions": [round(float(x), 12) for x in g.phase_fractions()],
        }
        default_mask = 1.0 - np.eye(NUM_LEGS)
        if not np.array_equal(g.weight_mask, default_mask):
            entry["weight_mask"] = [[float(x) for x in row] for row in g.weight_mask]
        entries.append(entry)
    doc = {"schema": GAIT_FILE_SCHEMA, "leg_order": list(LEG_NAMES), "gaits": entries}
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def load_gaits(path) -> dict[str, GaitMatrix]:
    """Load gait definitions from a YAML text file written by dump_gaits."""
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict) or "gaits" not in doc:
        raise ConfigError(f"{path}: not a gait definition file")
    schema = doc.get("schema")
    if schema != GAIT_FILE_SCHEMA:
        from .errors import SchemaVersionError

        raise SchemaVersionError(f"{path}: unsupported gait schema {schema!r}")
    if doc.get("leg_order") not in (None, list(LEG_NAMES)):
        raise ConfigError(f"{path}: leg order must be {LEG_NAMES}")
    out = {}
    for entry in doc["gaits"]:
        name = normalize_gait_name(str(entry["name"]))
        fractions = np.asarray(entry["phase_fractions"], dtype=float)
        if fractions.shape != (NUM_LEGS,):
            raise ConfigError(f"{path}: gait {name!r} needs 4 phase fractions")
        mask = entry.get("weight_mask")
        out[name] = GaitMatrix.from_phase(
            TWO_PI * fractions, name=name, weight_mask=mask
        )
    return out


def default_gait_set() -> dict[str, GaitMatrix]:
    return {name: gait_library(name) for name in GAIT_NAMES}
