"""Scenario scripts: timed gait/style/velocity changes, pushes, leg failures.

A script is an ordered list of events; the simulation applies every event
whose time has come at the next policy tick, so replays are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .cpg import LEG_NAMES, custom_gait, gait_library, normalize_gait_name
from .errors import ConfigError
from .pattern import StyleParams

SCENARIO_SCHEMA = "gaitkit-scenario/1"

EVENT_KINDS = (
    "set_gait",
    "set_style",
    "set_velocity",
    "push",
    "disable_leg",
    "enable_leg",
)

PUSH_MAX = 0.5  # m/s


@dataclass(frozen=True)
class ScenarioEvent:
    t: float
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ConfigError(
                f"unknown event kind {self.kind!r}; valid: {', '.join(EVENT_KINDS)}"
            )
        if not (np.isfinite(self.t) and self.t >= 0):
            raise ConfigError(f"event time must be finite and >= 0, got {self.t}")
        validator = getattr(self, f"_check_{self.kind}")
        validator()

    def _check_set_gait(self):
        p = self.params
        if "name" in p:
            gait_library(p["name"])  # raises on unknown names
        elif "phases" in p:
            phases = np.asarray(p["phases"], dtype=float)
            if phases.shape != (4,) or not np.isfinite(phases).all():
                raise ConfigError("set_gait phases must be 4 finite radians")
        else:
            raise ConfigError("set_gait needs 'name' or 'phases'")

    def _check_set_style(self):
        StyleParams(**self.params)  # raises on out-of-range values

    def _check_set_velocity(self):
        v = self.params.get("v")
        if v is None or not np.isfinite(v):
            raise ConfigError("set_velocity needs finite 'v'")

    def _check_push(self):
        mag = self.params.get("magnitude")
        if mag is None or not 0 <= mag <= PUSH_MAX:
            raise ConfigError(f"push magnitude must be in [0, {PUSH_MAX}] m/s")
        if "direction_deg" in self.params and not np.isfinite(
            self.params["direction_deg"]
        ):
            raise ConfigError("push direction_deg must be finite")

    def _check_disable_leg(self):
        self._leg_index()
        lock = self.params.get("lock_angles")
        if lock is not None:
            lock = np.asarray(lock, dtype=float)
            if lock.shape != (3,) or not np.isfinite(lock).all():
                raise ConfigError("lock_angles must be 3 finite radians")

    def _check_enable_leg(self):
        self._leg_index()

    def _leg_index(self) -> int:
        leg = self.params.get("leg")
        if isinstance(leg, str):
            try:
                return LEG_NAMES.index(leg.upper())
            except ValueError:
                raise ConfigError(f"unknown leg {leg!r}; use one of {LEG_NAMES}")
        if leg in (0, 1, 2, 3):
            return int(leg)
        raise ConfigError(f"leg must be an index 0-3 or one of {LEG_NAMES}")

    def leg_index(self) -> int:
        return self._leg_index()

    def gait_matrix(self):
        p = self.params
        if "name" in p:
            return gait_library(p["name"])
        return custom_gait(
            p["phases"], weight_mask=p.get("weight_mask"), name=p.get("label", "custom")
        )

    def as_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, **self.params}


@dataclass
class ScenarioScript:
    events: list

    def __post_init__(self):
        self.events = sorted(self.events, key=lambda e: e.t)
        times = [e.t for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ConfigError("event times must be non-decreasing")

    def __len__(self) -> int:
        return len(self.events)

    def due(self, t_prev: float, t_now: float):
        """Events with time in (t_prev, t_now] (t_prev < 0 includes t=0)."""
        return [e for e in self.events if t_prev < e.t <= t_now]

    def to_yaml(self, path) -> None:
        doc = {
            "schema": SCENARIO_SCHEMA,
            "events": [e.as_dict() for e in self.events],
        }
        with open(path, "w") as f:
            yaml.safe_dump(doc, f, sort_keys=False)

    @classmethod
    def from_yaml(cls, path) -> "ScenarioScript":
        with open(path) as f:
            doc = yaml.safe_load(f)
        if not isinstance(doc, dict) or doc.get("schema") != SCENARIO_SCHEMA:
            raise ConfigError(f"{path}: not a scenario file ({SCENARIO_SCHEMA})")
        events = []
        for raw in doc.get("events", []):
            raw = dict(raw)
            t = float(raw.pop("t"))
            kind = raw.pop("kind")
            events.append(ScenarioEvent(t=t, kind=kind, params=raw))
        return cls(events=events)

    @classmethod
    def single_gait(cls, gait_name: str, velocity: float) -> "ScenarioScript":
        return cls(
            events=[
                ScenarioEvent(0.0, "set_gait", {"name": gait_name}),
                ScenarioEvent(0.0, "set_velocity", {"v": velocity}),
            ]
        )


def gait_sequence_script(
    names, segment_s: float, velocity: float, start: float = 0.0
) -> ScenarioScript:
    """Back-to-back gait segments at a fixed commanded velocity."""
    events = [ScenarioEvent(0.0, "set_velocity", {"v": velocity})]
    t = start
    for name in names:
        events.append(ScenarioEvent(t, "set_gait", {"name": name}))
        t += segment_s
    return ScenarioScript(events=events)


def training_script(
    duration_s: float,
    rng: np.random.Generator,
    v_range=(0.2, 3.0),
    velocity_period: float = 5.0,
    gait_period: float = 3.0,
    push_period: float = 15.0,
    push_magnitude: float = PUSH_MAX,
) -> ScenarioScript:
    """Training-style resampling schedule: velocity commands every 5 s, gait
    every 3 s, a random-direction push every 15 s."""
    from .cpg import GAIT_NAMES

    events = []
    t = 0.0
    while t < duration_s:
        events.append(
            ScenarioEvent(t, "set_velocity", {"v": float(rng.uniform(*v_range))})
        )
        t += velocity_period
    t = 0.0
    while t < duration_s:
        name = GAIT_NAMES[int(rng.integers(len(GAIT_NAMES)))]
        events.append(ScenarioEvent(t, "set_gait", {"name": name}))
        t += gait_period
    t = push_period
    while t < duration_s:
        events.append(
            ScenarioEvent(
                t,
                "push",
                {
                    "magnitude": float(rng.uniform(0, push_magnitude)),
                    "direction_deg": float(rng.uniform(0, 360.0)),
                },
            )
        )
        t += push_period
    return ScenarioScript(events=events)
