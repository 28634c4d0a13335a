"""Columnar trajectory logs with a documented, versioned on-disk format.

A log is a dense float64 matrix, one row per logged sim step, with named
column groups. CSV files carry the schema id and a JSON metadata line in
comments, so a log round-trips bit-exactly through to_csv/from_csv.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SchemaVersionError

LOG_SCHEMA = "gaitkit-trajlog/1"

# (group name, width); flattened per-leg/per-joint groups use leg-major order
# FR, FL, HR, HL x (abd, thigh, calf).
COLUMN_GROUPS = (
    ("t", 1),
    ("base_pos", 3),
    ("base_quat", 4),
    ("v_b", 3),
    ("omega_b", 3),
    ("q", 12),
    ("qd", 12),
    ("tau", 12),
    ("contact", 4),
    ("r", 4),
    ("r_dot", 4),
    ("theta", 4),
    ("theta_dot", 4),
    ("action", 8),
    ("v_cmd", 1),
    ("gait_idx", 1),
)

_SLICES = {}
_offset = 0
for _name, _width in COLUMN_GROUPS:
    _SLICES[_name] = slice(_offset, _offset + _width)
    _offset += _width
ROW_WIDTH = _offset

COLUMN_NAMES = []
for _name, _width in COLUMN_GROUPS:
    if _width == 1:
        COLUMN_NAMES.append(_name)
    else:
        COLUMN_NAMES.extend(f"{_name}_{k}" for k in range(_width))


@dataclass
class TrajectoryLog:
    """Logged trajectory plus run metadata (dt of the log, robot mass, ...)."""

    data: np.ndarray
    meta: dict = field(default_factory=dict)
    gait_names: list = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != ROW_WIDTH:
            raise ConfigError(
                f"log data must be (N, {ROW_WIDTH}), got {self.data.shape}"
            )

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, group: str) -> np.ndarray:
        return self.data[:, _SLICES[group]]

    def column(self, group: str) -> np.ndarray:
        col = self.data[:, _SLICES[group]]
        return col[:, 0] if col.shape[1] == 1 else col

    @property
    def dt(self) -> float:
        return float(self.meta["log_dt"])

    def duration(self) -> float:
        t = self.column("t")
        return float(t[-1] - t[0]) if len(t) > 1 else 0.0

    def gait_name_at(self, row: int) -> str:
        idx = int(self.column("gait_idx")[row])
        return self.gait_names[idx] if 0 <= idx < len(self.gait_names) else "?"

    def tail(self, seconds: float) -> "TrajectoryLog":
        """Last `seconds` of the log (steady-state windows)."""
        t = self.column("t")
        keep = t >= t[-1] - seconds + 1e-12
        return TrajectoryLog(self.data[keep], dict(self.meta), list(self.gait_names))

    def to_csv(self, path_or_buf) -> None:
        meta = dict(self.meta)
        meta["gait_names"] = list(self.gait_names)
        header = (
            f"# {LOG_SCHEMA}\n"
            f"# meta: {json.dumps(meta, sort_keys=True)}\n"
            + ",".join(COLUMN_NAMES)
        )
        if hasattr(path_or_buf, "write"):
            np.savetxt(
                path_or_buf, self.data, fmt="%.17g", delimiter=",",
                header=header, comments="",
            )
        else:
            with open(path_or_buf, "w") as f:
                np.savetxt(
                    f, self.data, fmt="%.17g", delimiter=",",
                    header=header, comments="",
                )

    @classmethod
    def from_csv(cls, path) -> "TrajectoryLog":
        with open(path) as f:
            first = f.readline().strip()
            if first != f"# {LOG_SCHEMA}":
                raise SchemaVersionError(f"{path}: expected '# {LOG_SCHEMA}' header")
            meta_line = f.readline().strip()
            if not meta_line.startswith("# meta: "):
                raise ConfigError(f"{path}: missing metadata line")
            meta = json.loads(meta_line[len("# meta: "):])
            names = f.readline().strip().split(",")
            if names != COLUMN_NAMES:
                raise ConfigError(f"{path}: column layout mismatch")
            body = f.read()
        data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
        gait_names = meta.pop("gait_names", [])
        return cls(data=data, meta=meta, gait_names=gait_names)


class LogBuilder:
    """Preallocating row collector used by the simulator."""

    def __init__(self, capacity: int, meta: dict, gait_names: list):
        self._data = np.zeros((capacity, ROW_WIDTH))
        self._n = 0
        self._meta = meta
        self._gait_names = gait_names

    def append(self, **groups) -> None:
        if self._n >= self._data.shape[0]:
            self._data = np.vstack([self._data, np.zeros_like(self._data)])
        row = self._data[self._n]
        for name, value in groups.items():
            row[_SLICES[name]] = np.ravel(value)
        self._n += 1

    def finalize(self, **extra_meta) -> TrajectoryLog:
        meta = dict(self._meta)
        meta.update(extra_meta)
        return TrajectoryLog(
            self._data[: self._n].copy(), meta, list(self._gait_names)
        )
