"""Lightweight quadruped simulation driven by the oscillator network.

Two fidelity tiers behind the same control stack (CPG -> pattern formation ->
inverse kinematics -> joint PD):

* kinematic: joints follow a rate-limited first-order tracking model, stance
  feet are anchored in the world, and the base pose is the least-squares
  translation fit to the anchors. Exact gait timing, no forces.
* dynamic: single-rigid-body base plus per-joint reflected-inertia dynamics,
  spring-damper ground normals with regularized Coulomb friction, semi-implicit
  Euler at 1 kHz. Torques, power, and thus Cost of Transport are meaningful.

The control policy is queried once every `policy_period` sim steps (100 Hz at
the default 1 kHz); scenario events are applied at those same tick boundaries,
which keeps every run bit-reproducible from (seed, config, script).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import cpg as cpg_mod
from .cpg import (
    CpgConfig,
    GaitMatrix,
    ModulationCommand,
    NUM_LEGS,
    OscillatorNetworkState,
    gait_library,
)
from .errors import ConfigError, NumericalDivergenceError
from .metrics import episode_metrics, reward_step
from .pattern import StyleParams, foot_targets_from_arrays, swing_flags
from .robot import RobotModel
from .scenario import ScenarioEvent, ScenarioScript
from .trajlog import LogBuilder, TrajectoryLog

GRAVITY = 9.81

# Observation vector layout (total dim 63). The policy never sees the gait
# matrix or the style parameters, only the efference copy of the CPG.
OBSERVATION_LAYOUT = (
    ("v_cmd", 1),
    ("base_quat", 4),
    ("v_b", 3),
    ("omega_b", 3),
    ("q", 12),
    ("qd", 12),
    ("contacts", 4),
    ("last_action", 8),
    ("r", 4),
    ("r_dot", 4),
    ("theta", 4),
    ("theta_dot", 4),
)
OBSERVATION_DIM = sum(width for _, width in OBSERVATION_LAYOUT)


@dataclass
class RandomizationRanges:
    """Uniform resampling ranges applied at episode resets."""

    kp: tuple = (30.0, 100.0)
    kd: tuple = (0.5, 2.0)
    mass_scale: tuple = (0.7, 1.3)
    added_base_mass: tuple = (0.0, 5.0)
    friction: tuple = (0.3, 1.0)


@dataclass
class SimConfig:
    mode: str = "kinematic"
    dt: float = 1e-3
    kp: float = 60.0
    kd: float = 1.5
    torque_limit: float = 23.7
    ground_k: float = 1e4
    ground_c: float = 300.0
    friction: float = 0.8
    slip_vel: float = 0.1
    angular_damping: float = 2.0
    mass_scale: float = 1.0
    added_base_mass: float = 0.0
    episode_s: float = 20.0
    policy_period: int = 10
    log_decim: int = 10
    seed: int = 0
    tau_track: float = 0.010
    init_phase_noise: float = 0.5
    fall_height_frac: float = 0.5
    cpg_a: float = 50.0
    cpg_w: float = 10.0
    cpg_integrator: str = "euler"
    randomization: RandomizationRanges = field(default_factory=RandomizationRanges)

    def __post_init__(self):
        if self.mode not in ("kinematic", "dynamic"):
            raise ConfigError(f"mode must be kinematic|dynamic, got {self.mode!r}")
        if not 0 < self.dt <= 0.002:
            raise ConfigError(f"dt must be in (0, 0.002], got {self.dt}")
        if self.policy_period < 1 or self.log_decim < 1:
            raise ConfigError("policy_period and log_decim must be >= 1")

    def cpg_config(self) -> CpgConfig:
        return CpgConfig(
            a=self.cpg_a, w=self.cpg_w, dt=self.dt, integrator=self.cpg_integrator
        )


def randomize(cfg: SimConfig, seed: int) -> SimConfig:
    """Resample PD gains, mass scale, added base mass, and friction uniformly.

    Draw order is fixed (kp, kd, mass_scale, added_base_mass, friction) so a
    seed always produces the same configuration.
    """
    rng = np.random.default_rng(seed)
    rr = cfg.randomization
    return replace(
        cfg,
        kp=float(rng.uniform(*rr.kp)),
        kd=float(rng.uniform(*rr.kd)),
        mass_scale=float(rng.uniform(*rr.mass_scale)),
        added_base_mass=float(rng.uniform(*rr.added_base_mass)),
        friction=float(rng.uniform(*rr.friction)),
        seed=seed,
    )


def sample_style(rng: np.random.Generator, d_step: float = 0.2) -> StyleParams:
    """Uniform style resampling over the documented training ranges."""
    return StyleParams(
        h=float(rng.uniform(0.18, 0.35)),
        g_c=float(rng.uniform(0.02, 0.12)),
        g_p=float(rng.uniform(0.0, 0.015)),
        x_off=float(rng.uniform(-0.08, 0.03)),
        d_step=d_step,
    )


def pd_torques(q_des, q, qd, kp: float, kd: float, torque_limit: float = 23.7):
    """Joint PD law: tau = kp*(q_des - q) - kd*qd, clamped to the torque limit."""
    tau = kp * (np.asarray(q_des, dtype=float) - q) - kd * np.asarray(qd, dtype=float)
    return np.clip(tau, -torque_limit, torque_limit)


@dataclass
class RobotState:
    """Snapshot of the simulated robot (world base pose, base-frame twist)."""

    base_pos: np.ndarray
    base_quat: np.ndarray
    v_b: np.ndarray
    omega_b: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    contacts: np.ndarray
    foot_world: np.ndarray


# --- quaternion helpers (w, x, y, z) ----------------------------------------


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_from_rotvec(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return np.array([1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]])
    axis = v / angle
    half = 0.5 * angle
    s = np.sin(half)
    return np.array([np.cos(half), s * axis[0], s * axis[1], s * axis[2]])


# --- engines -----------------------------------------------------------------


class KinematicEngine:
    """Anchor-based kinematic tier: exact footfall timing, no forces."""

    def __init__(self, robot: RobotModel, cfg: SimConfig, style: StyleParams, q0):
        self.robot = robot
        self.cfg = cfg
        self.q = np.array(q0, dtype=float)
        self.qd = np.zeros((NUM_LEGS, 3))
        self.base_pos = np.array([0.0, 0.0, style.h])
        self.v_base = np.zeros(3)
        self.anchored = np.zeros(NUM_LEGS, dtype=bool)
        self.anchors = np.zeros((NUM_LEGS, 3))
        self._alpha = 1.0 - np.exp(-cfg.dt / cfg.tau_track)
        self._max_dq = robot.velocity_limit * cfg.dt
        self._contacts = np.zeros(NUM_LEGS, dtype=bool)

    def push(self, delta_v) -> None:
        # Anchors make the base infinitely stiff while in stance; pushes only
        # alter the coasting velocity used during full-flight phases.
        self.v_base = self.v_base + np.asarray(delta_v, dtype=float)

    def step_block(self, q_des_seq, swing_seq, locked, lock_q):
        """Advance len(q_des_seq) sim steps; returns per-step histories."""
        cfg = self.cfg
        dt = cfg.dt
        n = q_des_seq.shape[0]
        q_seq = np.empty((n, NUM_LEGS, 3))
        qd_seq = np.empty((n, NUM_LEGS, 3))
        base_seq = np.empty((n, 3))
        vb_seq = np.empty((n, 3))
        contact_seq = np.empty((n, NUM_LEGS), dtype=bool)

        q = self.q
        any_locked = bool(locked.any())
        for k in range(n):
            dq = np.clip(self._alpha * (q_des_seq[k] - q), -self._max_dq, self._max_dq)
            q_new = q + dq
            if any_locked:
                q_new[locked] = lock_q[locked]
            qd_seq[k] = (q_new - q) / dt
            q_seq[k] = q_new
            q = q_new
        self.q = q
        self.qd = qd_seq[-1]

        feet_b_seq = self.robot.foot_body_positions(q_seq)
        not_locked = ~locked
        base = self.base_pos
        v_base = self.v_base
        for k in range(n):
            stance = (~swing_seq[k]) & not_locked
            newly = stance & (~self.anchored)
            feet_b = feet_b_seq[k]
            if newly.any():
                world = base + feet_b[newly]
                world[:, 2] = 0.0
                self.anchors[newly] = world
            self.anchored = stance
            if stance.any():
                offsets = self.anchors[stance] - feet_b[stance]
                new_base = offsets.mean(axis=0)
                v_base = (new_base - base) / dt
                base = new_base
            else:
                # full flight: coast at the last base velocity, hold height
                v_base = np.array([v_base[0], v_base[1], 0.0])
                base = base + v_base * dt
            contacts = stance
            if any_locked:
                contacts = contacts | (locked & (base[2] + feet_b[:, 2] <= 1e-6))
            base_seq[k] = base
            vb_seq[k] = v_base
            contact_seq[k] = contacts
        self.base_pos = base
        self.v_base = v_base
        self._contacts = contact_seq[-1]

        quat_seq = np.zeros((n, 4))
        quat_seq[:, 0] = 1.0
        omega_seq = np.zeros((n, 3))
        return q_seq, qd_seq, base_seq, quat_seq, vb_seq, omega_seq, contact_seq

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.base_pos).all() and np.isfinite(self.q).all())

    def base_height(self) -> float:
        return float(self.base_pos[2])

    def knee_world_z(self) -> np.ndarray:
        return self.base_pos[2] + self.robot.knee_body_positions(self.q)[:, 2]

    def foot_world(self) -> np.ndarray:
        return self.base_pos + self.robot.foot_body_positions(self.q)

    def snapshot(self, tau, locked) -> RobotState:
        return RobotState(
            base_pos=self.base_pos.copy(),
            base_quat=np.array([1.0, 0.0, 0.0, 0.0]),
            v_b=self.v_base.copy(),
            omega_b=np.zeros(3),
            q=self.q.copy(),
            qd=self.qd.copy(),
            tau=np.array(tau, dtype=float),
            contacts=self._contacts.copy(),
            foot_world=self.foot_world(),
        )


class DynamicEngine:
    """Single-rigid-body base + reflected-inertia joints + spring-damper feet."""

    def __init__(self, robot: RobotModel, cfg: SimConfig, style: StyleParams, q0):
        self.robot = robot
        self.cfg = cfg
        self.mass = robot.mass * cfg.mass_scale + cfg.added_base_mass
        self.inertia = robot.body_inertia * cfg.mass_scale
        self.p = np.array([0.0, 0.0, style.h])
        self.quat = np.array([1.0, 0.0, 0.0, 0.0])
        self.v = np.zeros(3)
        self.w_b = np.zeros(3)
        self.q = np.array(q0, dtype=float)
        self.qd = np.zeros((NUM_LEGS, 3))
        self.tau = np.zeros((NUM_LEGS, 3))
        self._contact_force = np.zeros((NUM_LEGS, 3))
        self.last_contact_power = 0.0
        self.contact_energy = 0.0

    def push(self, delta_v) -> None:
        self.v = self.v + np.asarray(delta_v, dtype=float)

    def _step(self, tau, locked, lock_q, any_locked) -> None:
        cfg = self.cfg
        dt = cfg.dt
        R = quat_to_matrix(self.quat)
        feet_b = self.robot.foot_body_positions(self.q)
        feet_w = self.p + feet_b @ R.T
        J = self.robot.jacobians(self.q)
        foot_vel_b = np.cross(self.w_b, feet_b) + np.einsum("lij,lj->li", J, self.qd)
        foot_vel_w = self.v + foot_vel_b @ R.T

        pen = -feet_w[:, 2]
        normal = np.where(
            pen > 0.0,
            np.maximum(0.0, cfg.ground_k * pen - cfg.ground_c * foot_vel_w[:, 2]),
            0.0,
        )
        vt = foot_vel_w[:, :2]
        vt_norm = np.maximum(np.sqrt((vt * vt).sum(axis=1)), cfg.slip_vel)
        ft = -(cfg.friction * normal)[:, None] * vt / vt_norm[:, None]
        force_w = np.concatenate([ft, normal[:, None]], axis=1)
        self._contact_force = force_w
        self.last_contact_power = float((force_w * foot_vel_w).sum())
        self.contact_energy += self.last_contact_power * dt

        force_total = force_w.sum(axis=0)
        force_total = force_total + np.array([0.0, 0.0, -self.mass * GRAVITY])
        force_b = force_w @ R
        torque_b = np.cross(feet_b, force_b).sum(axis=0)
        torque_b = torque_b - cfg.angular_damping * self.w_b

        self.v = self.v + dt * force_total / self.mass
        self.p = self.p + dt * self.v
        w_dot = (torque_b - np.cross(self.w_b, self.inertia * self.w_b)) / self.inertia
        self.w_b = self.w_b + dt * w_dot
        dq_quat = quat_from_rotvec(self.w_b * dt)
        self.quat = quat_mul(self.quat, dq_quat)
        self.quat = self.quat / np.linalg.norm(self.quat)

        tau_contact = np.einsum("lij,li->lj", J, force_b)
        qdd = (tau + tau_contact) / self.robot.reflected_inertia
        qd_new = self.qd + dt * qdd
        lim = self.robot.velocity_limit
        qd_new = np.clip(qd_new, -lim, lim)
        q_new = self.q + dt * qd_new
        if any_locked:
            q_new[locked] = lock_q[locked]
            qd_new[locked] = 0.0
        self.q = q_new
        self.qd = qd_new

    def step_block(self, q_des_seq, swing_seq, locked, lock_q, kp, kd, tau_lim):
        """PD-track q_des_seq for len(q_des_seq) steps; returns histories."""
        n = q_des_seq.shape[0]
        q_seq = np.empty((n, NUM_LEGS, 3))
        qd_seq = np.empty((n, NUM_LEGS, 3))
        tau_seq = np.empty((n, NUM_LEGS, 3))
        base_seq = np.empty((n, 3))
        quat_seq = np.empty((n, 4))
        vb_seq = np.empty((n, 3))
        omega_seq = np.empty((n, 3))
        contact_seq = np.empty((n, NUM_LEGS), dtype=bool)
        any_locked = bool(locked.any())
        for k in range(n):
            tau = np.clip(
                kp * (q_des_seq[k] - self.q) - kd * self.qd, -tau_lim, tau_lim
            )
            if any_locked:
                tau[locked] = 0.0
            self._step(tau, locked, lock_q, any_locked)
            self.tau = tau
            q_seq[k] = self.q
            qd_seq[k] = self.qd
            tau_seq[k] = tau
            base_seq[k] = self.p
            quat_seq[k] = self.quat
            vb_seq[k] = self.v
            omega_seq[k] = self.w_b
            contact_seq[k] = self._contact_force[:, 2] > 0.0
        # report base-frame linear velocity
        for k in range(n):
            vb_seq[k] = quat_to_matrix(quat_seq[k]).T @ vb_seq[k]
        return q_seq, qd_seq, tau_seq, base_seq, quat_seq, vb_seq, omega_seq, contact_seq

    def contacts(self) -> np.ndarray:
        return self._contact_force[:, 2] > 0.0

    def base_height(self) -> float:
        return float(self.p[2])

    def knee_world_z(self) -> np.ndarray:
        R = quat_to_matrix(self.quat)
        knees_w = self.p + self.robot.knee_body_positions(self.q) @ R.T
        return knees_w[:, 2]

    def foot_world(self) -> np.ndarray:
        R = quat_to_matrix(self.quat)
        return self.p + self.robot.foot_body_positions(self.q) @ R.T

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.p).all()
            and np.isfinite(self.v).all()
            and np.isfinite(self.quat).all()
            and np.isfinite(self.q).all()
            and np.isfinite(self.qd).all()
        )

    def snapshot(self, tau, locked) -> RobotState:
        R = quat_to_matrix(self.quat)
        return RobotState(
            base_pos=self.p.copy(),
            base_quat=self.quat.copy(),
            v_b=R.T @ self.v,
            omega_b=self.w_b.copy(),
            q=self.q.copy(),
            qd=self.qd.copy(),
            tau=np.array(tau, dtype=float),
            contacts=self.contacts(),
            foot_world=self.foot_world(),
        )


# --- the closed-loop simulation ----------------------------------------------


class Simulation:
    """Closed loop: policy at 100 Hz, CPG/pattern/IK/PD every 1 kHz step."""

    def __init__(
        self,
        cfg: SimConfig,
        robot: RobotModel | None = None,
        style: StyleParams | None = None,
        gait: GaitMatrix | None = None,
        policy=None,
        script: ScenarioScript | None = None,
    ):
        self.cfg = cfg
        self.robot = robot if robot is not None else RobotModel()
        self.style = style if style is not None else StyleParams()
        self.gait = gait if gait is not None else gait_library("trot")
        self.policy = policy
        self.script = script if script is not None else ScenarioScript(events=[])
        self.cpg_cfg = cfg.cpg_config()
        self.rng = np.random.default_rng(cfg.seed)

        self.cpg_state = cpg_mod.initial_state(
            self.gait, self.rng, phase_noise=cfg.init_phase_noise
        )
        q0 = self.robot.nominal_stance_q(self.style.h, self.style.x_off)
        engine_cls = KinematicEngine if cfg.mode == "kinematic" else DynamicEngine
        self.engine = engine_cls(self.robot, cfg, self.style, q0)

        self.v_cmd = 0.0
        self.last_action = np.concatenate(
            [np.ones(NUM_LEGS), np.zeros(NUM_LEGS)]
        )
        self.tau = np.zeros((NUM_LEGS, 3))
        self.locked = np.zeros(NUM_LEGS, dtype=bool)
        self.lock_q = np.array(q0, dtype=float)
        self.step_count = 0
        self.tick_count = 0
        self.clamp_count = 0
        self.reward_total = 0.0
        self.termination = None
        self._applied_through = -1.0
        self._gait_names = [self.gait.name]
        self._log = None

    # -- public control surface (also used by the live server) ----------------

    @property
    def t(self) -> float:
        return self.step_count * self.cfg.dt

    def set_gait(self, gait: GaitMatrix) -> None:
        """Swap the coupling matrix; oscillator state is continuous across it."""
        self.gait = gait
        if gait.name not in self._gait_names:
            self._gait_names.append(gait.name)

    def set_style(self, style: StyleParams) -> None:
        self.style = style

    def set_velocity(self, v: float) -> None:
        self.v_cmd = float(v)

    def push(self, magnitude: float, direction_deg: float = 0.0) -> None:
        ang = np.deg2rad(direction_deg)
        self.engine.push(magnitude * np.array([np.cos(ang), np.sin(ang), 0.0]))

    def disable_leg(self, leg: int, lock_angles=None) -> None:
        """Freeze a leg: PD output overridden to hold position; CPG untouched."""
        if lock_angles is None:
            lock_angles = self.robot.nominal_stance_q(
                self.style.h, self.style.x_off
            )[leg]
        self.locked[leg] = True
        self.lock_q[leg] = np.asarray(lock_angles, dtype=float)

    def enable_leg(self, leg: int) -> None:
        self.locked[leg] = False

    def apply_event(self, event: ScenarioEvent) -> None:
        if event.kind == "set_gait":
            self.set_gait(event.gait_matrix())
        elif event.kind == "set_style":
            self.set_style(StyleParams(**event.params))
        elif event.kind == "set_velocity":
            self.set_velocity(event.params["v"])
        elif event.kind == "push":
            self.push(
                event.params["magnitude"], event.params.get("direction_deg", 0.0)
            )
        elif event.kind == "disable_leg":
            self.disable_leg(event.leg_index(), event.params.get("lock_angles"))
        elif event.kind == "enable_leg":
            self.enable_leg(event.leg_index())

    # -- observation and logging ----------------------------------------------

    def robot_state(self) -> RobotState:
        return self.engine.snapshot(self.tau, self.locked)

    def observation(self) -> np.ndarray:
        s = self.robot_state()
        return np.concatenate(
            [
                [self.v_cmd],
                s.base_quat,
                s.v_b,
                s.omega_b,
                s.q.ravel(),
                s.qd.ravel(),
                s.contacts.astype(float),
                self.last_action,
                self.cpg_state.r,
                self.cpg_state.r_dot,
                self.cpg_state.theta_wrapped(),
                self.cpg_state.theta_dot,
            ]
        )

    def start_log(self, capacity_hint: int | None = None) -> None:
        n = capacity_hint or int(
            self.cfg.episode_s / (self.cfg.dt * self.cfg.log_decim) + 2
        )
        meta = {
            "schema": "gaitkit-trajlog/1",
            "log_dt": self.cfg.dt * self.cfg.log_decim,
            "sim_dt": self.cfg.dt,
            "mode": self.cfg.mode,
            "mass": float(
                self.robot.mass * self.cfg.mass_scale + self.cfg.added_base_mass
            ),
            "seed": self.cfg.seed,
            "style": self.style.as_dict(),
            "v_cmd": self.v_cmd,
        }
        self._log = LogBuilder(n, meta, self._gait_names)

    def finish_log(self) -> TrajectoryLog:
        log = self._log.finalize(termination=self.termination or "open")
        self._log = None
        return log

    # -- stepping ---------------------------------------------------------------

    def _check_fall(self) -> bool:
        if self.engine.base_height() < self.cfg.fall_height_frac * self.style.h:
            return True
        return bool((self.engine.knee_world_z() < 0.0).any())

    def tick(self) -> bool:
        """Apply due events, query the policy once, run one policy period.

        Returns False when the episode must stop (fall or divergence).
        """
        t_now = self.t
        for event in self.script.due(self._applied_through, t_now):
            self.apply_event(event)
        self._applied_through = t_now

        if self.policy is not None:
            action = np.asarray(self.policy.act(self.observation()), dtype=float)
            self.last_action = np.concatenate(
                [
                    np.clip(action[:NUM_LEGS], 1.0, 2.0),
                    np.clip(action[NUM_LEGS:], 0.0, 8.0),
                ]
            )
        cmd = ModulationCommand.from_action(self.last_action)

        s = self.robot_state()
        self.reward_total += reward_step(
            self.v_cmd,
            s.v_b,
            s.omega_b,
            s.tau.ravel(),
            s.qd.ravel(),
            dt=self.cfg.dt * self.cfg.policy_period,
        )

        period = self.cfg.policy_period
        self.cpg_state, r_seq, rdot_seq, theta_seq, thetadot_seq = cpg_mod.step_block(
            self.cpg_state, cmd, self.gait, self.cpg_cfg, period
        )
        targets = foot_targets_from_arrays(
            theta_seq, r_seq, self.style, self.robot.nominal_y()
        )
        q_des_seq, clamped = self.robot.ik_all(targets)
        if clamped.any():
            self.clamp_count += int(clamped.sum())
        swing_seq = swing_flags(theta_seq)

        if self.cfg.mode == "kinematic":
            (
                q_seq, qd_seq, base_seq, quat_seq, vb_seq, omega_seq, contact_seq
            ) = self.engine.step_block(q_des_seq, swing_seq, self.locked, self.lock_q)
            tau_seq = pd_torques(
                q_des_seq, q_seq, qd_seq, self.cfg.kp, self.cfg.kd,
                self.cfg.torque_limit,
            )
            if self.locked.any():
                tau_seq[:, self.locked] = 0.0
        else:
            (
                q_seq, qd_seq, tau_seq, base_seq, quat_seq, vb_seq, omega_seq,
                contact_seq,
            ) = self.engine.step_block(
                q_des_seq, swing_seq, self.locked, self.lock_q,
                self.cfg.kp, self.cfg.kd, self.cfg.torque_limit,
            )
        self.tau = tau_seq[-1]

        if self._log is not None:
            decim = self.cfg.log_decim
            gait_idx = self._gait_names.index(self.gait.name)
            for k in range(period):
                step_idx = self.step_count + k + 1
                if step_idx % decim == 0:
                    self._log.append(
                        t=step_idx * self.cfg.dt,
                        base_pos=base_seq[k],
                        base_quat=quat_seq[k],
                        v_b=vb_seq[k],
                        omega_b=omega_seq[k],
                        q=q_seq[k],
                        qd=qd_seq[k],
                        tau=tau_seq[k],
                        contact=contact_seq[k].astype(float),
                        r=r_seq[k],
                        r_dot=rdot_seq[k],
                        theta=np.mod(theta_seq[k], 2.0 * np.pi),
                        theta_dot=thetadot_seq[k],
                        action=self.last_action,
                        v_cmd=self.v_cmd,
                        gait_idx=gait_idx,
                    )
        self.step_count += period
        self.tick_count += 1

        if not self.engine.is_finite() or not self.cpg_state.is_finite():
            self.termination = "divergence"
            return False
        if self._check_fall():
            self.termination = "fall"
            return False
        return True

    def run(self, duration_s: float | None = None) -> str:
        duration = duration_s if duration_s is not None else self.cfg.episode_s
        n_ticks = int(round(duration / (self.cfg.dt * self.cfg.policy_period)))
        for _ in range(n_ticks):
            if not self.tick():
                return self.termination
        self.termination = self.termination or "completed"
        return self.termination


@dataclass
class EpisodeResult:
    log: TrajectoryLog
    metrics: object
    termination: str
    reward_total: float
    clamp_count: int


def run_episode(
    policy,
    script: ScenarioScript,
    style: StyleParams,
    cfg: SimConfig,
    robot: RobotModel | None = None,
    gait: GaitMatrix | None = None,
) -> EpisodeResult:
    """Run one closed-loop episode and post-process its metrics."""
    sim = Simulation(
        cfg, robot=robot, style=style, gait=gait, policy=policy, script=script
    )
    sim.start_log()
    termination = sim.run()
    log = sim.finish_log()
    mass = sim.robot.mass * cfg.mass_scale + cfg.added_base_mass
    metrics = episode_metrics(log, mass=mass, fault=termination != "completed")
    return EpisodeResult(
        log=log,
        metrics=metrics,
        termination=termination,
        reward_total=sim.reward_total,
        clamp_count=sim.clamp_count,
    )
