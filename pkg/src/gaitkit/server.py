"""Live command/telemetry bridge: a websocket around a running simulation.

One simulation loop owns all mutable state. Network ingress validates
commands and enqueues them; the loop applies them at policy-tick boundaries
(100 Hz) and emits one telemetry frame every 20 sim steps (exactly 50 frames
per simulated second). Given the applied-command log, a session replays
bit-identically; the server records that log and exposes it at /record.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass, field

import numpy as np

from .cpg import GAIT_NAMES, LEG_NAMES, gait_library
from .errors import ConfigError
from .metrics import GRAVITY, mechanical_power
from .pattern import GC_RANGE, GP_RANGE, H_RANGE, StyleParams, XOFF_RANGE
from .robot import RobotModel
from .scenario import PUSH_MAX, ScenarioScript
from .simulator import SimConfig, Simulation

PROTOCOL_VERSION = 1
FRAME_PERIOD_STEPS = 20  # 50 Hz at dt = 1 ms

COMMAND_TYPES = (
    "set_gait",
    "set_style",
    "set_velocity",
    "push",
    "disable_leg",
    "enable_leg",
    "pause",
    "resume",
    "reset",
    "set_speed_factor",
)

ERROR_CODES = {
    "bad_json": "message was not valid JSON",
    "bad_type": "unknown or missing command type",
    "bad_version": "unsupported protocol version",
    "bad_payload": "payload failed validation",
}


def _round_list(values, ndigits=6):
    return [round(float(v), ndigits) for v in np.ravel(values)]


@dataclass
class SessionConfig:
    sim: SimConfig = field(default_factory=lambda: SimConfig(mode="kinematic"))
    gait: str = "trot"
    velocity: float = 0.5
    style: StyleParams = field(default_factory=StyleParams)
    policy_path: str | None = None
    scenario_path: str | None = None
    cot_window_s: float = 2.0


class LiveSession:
    """Synchronous core: deterministic command application and telemetry."""

    def __init__(self, cfg: SessionConfig, robot: RobotModel | None = None):
        self.cfg = cfg
        self.robot = robot if robot is not None else RobotModel()
        self.command_log = []  # (tick index, command dict) in application order
        self.speed_factor = 1.0
        self.paused = False
        self._pending = []
        self._energy = 0.0
        self._window = []  # (t, energy, x) samples for the rolling COT
        self._build()

    def _build(self) -> None:
        from .optimize import load_or_default_policy

        policy = load_or_default_policy(self.cfg.policy_path)
        script = (
            ScenarioScript.from_yaml(self.cfg.scenario_path)
            if self.cfg.scenario_path
            else ScenarioScript.single_gait(self.cfg.gait, self.cfg.velocity)
        )
        self.sim = Simulation(
            self.cfg.sim,
            robot=self.robot,
            style=self.cfg.style,
            gait=gait_library(self.cfg.gait),
            policy=policy,
            script=script,
        )
        self._energy = 0.0
        self._window = []

    # -- command handling -------------------------------------------------------

    def validate(self, cmd: dict) -> str | None:
        """Returns an error code, or None when the command is applicable."""
        if not isinstance(cmd, dict) or cmd.get("type") not in COMMAND_TYPES:
            return "bad_type"
        if cmd.get("version", PROTOCOL_VERSION) != PROTOCOL_VERSION:
            return "bad_version"
        kind = cmd["type"]
        try:
            if kind == "set_gait":
                if "name" in cmd:
                    gait_library(cmd["name"])
                elif "phases" in cmd:
                    phases = np.asarray(cmd["phases"], dtype=float)
                    if phases.shape != (4,) or not np.isfinite(phases).all():
                        return "bad_payload"
                else:
                    return "bad_payload"
            elif kind == "set_style":
                StyleParams(**{
                    k: cmd[k] for k in ("h", "g_c", "g_p", "x_off", "d_step")
                    if k in cmd
                })
            elif kind == "set_velocity":
                v = float(cmd["v"])
                if not np.isfinite(v) or abs(v) > 5.0:
                    return "bad_payload"
            elif kind == "push":
                mag = float(cmd["magnitude"])
                if not 0 <= mag <= PUSH_MAX:
                    return "bad_payload"
            elif kind in ("disable_leg", "enable_leg"):
                leg = cmd.get("leg")
                if isinstance(leg, str):
                    if leg.upper() not in LEG_NAMES:
                        return "bad_payload"
                elif leg not in (0, 1, 2, 3):
                    return "bad_payload"
            elif kind == "set_speed_factor":
                f = float(cmd["factor"])
                if not 0.01 <= f <= 100.0:
                    return "bad_payload"
        except (KeyError, TypeError, ValueError, ConfigError):
            return "bad_payload"
        return None

    def enqueue(self, cmd: dict) -> dict:
        """Validate and queue a command; returns the ack/error reply."""
        code = self.validate(cmd)
        if code is not None:
            return {
                "type": "error",
                "version": PROTOCOL_VERSION,
                "code": code,
                "message": ERROR_CODES[code],
                "seq": cmd.get("seq") if isinstance(cmd, dict) else None,
            }
        self._pending.append(cmd)
        return {
            "type": "ack",
            "version": PROTOCOL_VERSION,
            "seq": cmd.get("seq"),
            "applies_at_tick": self.sim.tick_count,
        }

    def _leg_index(self, leg) -> int:
        if isinstance(leg, str):
            return LEG_NAMES.index(leg.upper())
        return int(leg)

    def _apply(self, cmd: dict) -> None:
        kind = cmd["type"]
        if kind == "set_gait":
            if "name" in cmd:
                self.sim.set_gait(gait_library(cmd["name"]))
            else:
                from .cpg import custom_gait

                self.sim.set_gait(
                    custom_gait(cmd["phases"], name=cmd.get("label", "custom"))
                )
        elif kind == "set_style":
            current = self.sim.style.as_dict()
            current.update(
                {k: cmd[k] for k in ("h", "g_c", "g_p", "x_off", "d_step") if k in cmd}
            )
            self.sim.set_style(StyleParams(**current))
        elif kind == "set_velocity":
            self.sim.set_velocity(float(cmd["v"]))
        elif kind == "push":
            self.sim.push(float(cmd["magnitude"]), float(cmd.get("direction_deg", 0.0)))
        elif kind == "disable_leg":
            self.sim.disable_leg(self._leg_index(cmd["leg"]), cmd.get("lock_angles"))
        elif kind == "enable_leg":
            self.sim.enable_leg(self._leg_index(cmd["leg"]))
        elif kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "reset":
            self.command_log.append((self.sim.tick_count, dict(cmd)))
            self._build()
            return
        elif kind == "set_speed_factor":
            self.speed_factor = float(cmd["factor"])
        self.command_log.append((self.sim.tick_count, dict(cmd)))

    def advance_tick(self):
        """Apply queued commands, advance one policy tick, return new frames.

        Pause and speed changes take effect immediately; simulation commands
        are consumed at this tick boundary, preserving determinism.
        """
        pending, self._pending = self._pending, []
        for cmd in pending:
            self._apply(cmd)
        if self.paused:
            return []
        return self._advance_one()

    def _advance_one(self):
        sim = self.sim
        before = sim.step_count
        alive = sim.tick()
        frames = []
        # energy accumulates at the policy rate from the current torques
        s = sim.robot_state()
        power = float(mechanical_power(s.tau.ravel(), s.qd.ravel()))
        self._energy += power * (sim.step_count - before) * sim.cfg.dt
        for step in range(before + 1, sim.step_count + 1):
            if step % FRAME_PERIOD_STEPS == 0:
                frames.append(self._frame(power))
        if not alive:
            frames.append(self._frame(power, terminated=True))
        return frames

    def _rolling_cot(self, t: float, x: float) -> float:
        self._window.append((t, self._energy, x))
        horizon = t - self.cfg.cot_window_s
        while len(self._window) > 2 and self._window[0][0] < horizon:
            self._window.pop(0)
        t0, e0, x0 = self._window[0]
        mass = self.robot.mass * self.cfg.sim.mass_scale + self.cfg.sim.added_base_mass
        dx = x - x0
        if dx <= 1e-6:
            return 0.0
        return (self._energy - e0) / (mass * GRAVITY * dx)

    def _frame(self, power: float, terminated: bool = False) -> dict:
        sim = self.sim
        s = sim.robot_state()
        t = sim.t
        return {
            "type": "telemetry",
            "version": PROTOCOL_VERSION,
            "tick": sim.tick_count,
            "sim_time": round(t, 6),
            "base_pos": _round_list(s.base_pos),
            "base_quat": _round_list(s.base_quat),
            "v_b": _round_list(s.v_b),
            "omega_b": _round_list(s.omega_b),
            "q": _round_list(s.q),
            "foot_world": _round_list(s.foot_world),
            "contacts": [bool(c) for c in s.contacts],
            "r": _round_list(sim.cpg_state.r),
            "theta": _round_list(sim.cpg_state.theta_wrapped()),
            "gait": sim.gait.name,
            "style": {k: round(v, 6) for k, v in sim.style.as_dict().items()},
            "v_cmd": round(sim.v_cmd, 6),
            "power": round(power, 6),
            "rolling_cot": round(self._rolling_cot(t, float(s.base_pos[0])), 6),
            "locked_legs": [bool(x) for x in sim.locked],
            "paused": self.paused,
            "terminated": terminated,
        }

    def run_ticks(self, n: int) -> list:
        frames = []
        for _ in range(n):
            frames.extend(self.advance_tick())
        return frames


def replay_session(
    cfg: SessionConfig,
    command_log,
    n_ticks: int,
    robot: RobotModel | None = None,
) -> list:
    """Re-run a session, re-issuing logged commands at their recorded ticks.

    With the same config/seed this reproduces the original telemetry frames
    bit-identically (pause/speed commands affect wall pacing only and are
    ignored here).
    """
    session = LiveSession(cfg, robot=robot)
    by_tick: dict = {}
    for tick, cmd in command_log:
        if cmd.get("type") in ("pause", "resume", "set_speed_factor"):
            continue
        by_tick.setdefault(int(tick), []).append(cmd)
    frames = []
    for _ in range(n_ticks):
        for cmd in by_tick.get(session.sim.tick_count, []):
            reply = session.enqueue(cmd)
            if reply["type"] != "ack":
                raise ConfigError(f"replay command rejected: {reply}")
        frames.extend(session.advance_tick())
    return frames


def protocol_schema() -> dict:
    return {
        "schema": "gaitkit-live/1",
        "version": PROTOCOL_VERSION,
        "telemetry_rate_hz": 50,
        "leg_order": list(LEG_NAMES),
        "gaits": list(GAIT_NAMES),
        "style_ranges": {
            "h": H_RANGE,
            "g_c": GC_RANGE,
            "g_p": GP_RANGE,
            "x_off": XOFF_RANGE,
        },
        "push_max": PUSH_MAX,
        "commands": {
            "set_gait": {"name": "one of gaits", "phases": "4 radians (custom)"},
            "set_style": {
                "h": "m", "g_c": "m", "g_p": "m", "x_off": "m", "d_step": "m"
            },
            "set_velocity": {"v": "m/s, |v| <= 5"},
            "push": {"magnitude": "m/s <= 0.5", "direction_deg": "deg"},
            "disable_leg": {"leg": "index or FR|FL|HR|HL", "lock_angles": "3 rad"},
            "enable_leg": {"leg": "index or name"},
            "pause": {}, "resume": {}, "reset": {},
            "set_speed_factor": {"factor": "0.01..100"},
        },
        "errors": ERROR_CODES,
        "telemetry_fields": [
            "tick", "sim_time", "base_pos", "base_quat", "v_b", "omega_b", "q",
            "foot_world", "contacts", "r", "theta", "gait", "style", "v_cmd",
            "power", "rolling_cot", "locked_legs", "paused", "terminated",
        ],
    }


def create_app(session: LiveSession | None = None, cfg: SessionConfig | None = None):
    """FastAPI app exposing /ws, /health, /schema, /record for one session."""
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    from fastapi.responses import JSONResponse

    app = FastAPI(title="gaitkit live server")
    app.state.session = session if session is not None else LiveSession(
        cfg if cfg is not None else SessionConfig()
    )
    app.state.clients = set()
    app.state.loop_task = None

    async def _loop():
        session = app.state.session
        try:
            while True:
                speed = max(0.01, session.speed_factor)
                burst = max(1, int(round(speed)))
                frames = []
                for _ in range(burst):
                    frames.extend(session.advance_tick())
                if frames:
                    dead = []
                    for queue in app.state.clients:
                        for frame in frames:
                            try:
                                queue.put_nowait(frame)
                            except asyncio.QueueFull:
                                dead.append(queue)
                                break
                    for queue in dead:
                        app.state.clients.discard(queue)
                tick_dt = session.sim.cfg.dt * session.sim.cfg.policy_period
                await asyncio.sleep(tick_dt * burst / speed)
        except asyncio.CancelledError:
            pass

    @app.on_event("startup")
    async def _start():
        app.state.loop_task = asyncio.create_task(_loop())

    @app.on_event("shutdown")
    async def _stop():
        if app.state.loop_task is not None:
            app.state.loop_task.cancel()

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "sim_time": app.state.session.sim.t,
            "version": PROTOCOL_VERSION,
        }

    @app.get("/schema")
    async def schema():
        return JSONResponse(protocol_schema())

    @app.get("/record")
    async def record():
        return {
            "version": PROTOCOL_VERSION,
            "seed": app.state.session.cfg.sim.seed,
            "commands": [
                {"tick": tick, "command": cmd}
                for tick, cmd in app.state.session.command_log
            ],
        }

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        await ws.send_text(json.dumps({
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "schema": "/schema",
        }))
        queue: asyncio.Queue = asyncio.Queue(maxsize=512)
        app.state.clients.add(queue)

        async def _sender():
            while True:
                frame = await queue.get()
                await ws.send_text(json.dumps(frame))

        sender = asyncio.create_task(_sender())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    cmd = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({
                        "type": "error",
                        "version": PROTOCOL_VERSION,
                        "code": "bad_json",
                        "message": ERROR_CODES["bad_json"],
                    }))
                    continue
                reply = app.state.session.enqueue(cmd)
                await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            app.state.clients.discard(queue)

    return app


def serve(bind: str = "127.0.0.1:8800", cfg: SessionConfig | None = None) -> None:
    import uvicorn

    host, _, port = bind.partition(":")
    app = create_app(cfg=cfg)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8800), log_level="warning")
