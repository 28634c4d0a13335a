"""Grid sweeps over gait x style x velocity with a resumable on-disk journal.

Each grid cell runs an independent, seeded episode; completed cells land in a
JSON-lines journal so an interrupted sweep resumes without recomputation and
the final results table is byte-identical either way. Faulted episodes (falls,
zero displacement) stay in the table as flagged rows and are excluded from
argmin queries, never silently dropped.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import yaml

from .cpg import gait_library, normalize_gait_name
from .errors import ConfigError
from .metrics import joint_acc_residuals
from .pattern import StyleParams
from .policy import Policy
from .scenario import ScenarioScript
from .simulator import SimConfig, run_episode

SWEEP_SCHEMA = "gaitkit-sweep/1"

RESULT_FIELDS = (
    "cell",
    "gait",
    "h",
    "g_c",
    "x_off",
    "velocity",
    "repeat",
    "seed",
    "cot",
    "mean_ang_vel",
    "mean_joint_acc",
    "mean_vx",
    "mean_power",
    "distance",
    "duration",
    "reward",
    "fault",
)

METRIC_COLUMNS = ("cot", "mean_ang_vel", "mean_joint_acc", "mean_vx", "mean_power")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


@dataclass
class SweepSpec:
    gaits: list = field(default_factory=lambda: ["trot"])
    h_list: list = field(default_factory=lambda: [0.30])
    g_c_list: list = field(default_factory=lambda: [0.05])
    x_off_list: list = field(default_factory=lambda: [0.0])
    velocities: list = field(default_factory=lambda: [0.5])
    repeats: int = 8
    seed: int = 0
    mode: str = "kinematic"
    episode_s: float = 5.0
    d_step: float = 0.2
    g_p: float = 0.01
    policy_path: str | None = None

    def __post_init__(self):
        for name in ("gaits", "h_list", "g_c_list", "x_off_list", "velocities"):
            if not getattr(self, name):
                raise ConfigError(f"sweep spec field {name} must be non-empty")
        self.gaits = [normalize_gait_name(g) for g in self.gaits]
        for g in self.gaits:
            gait_library(g)
        for h in self.h_list:
            StyleParams(h=h, g_c=self.g_c_list[0], g_p=self.g_p, d_step=self.d_step)
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")

    def cells(self) -> list:
        """Canonically ordered grid cells (gait, h, g_c, x_off, velocity, repeat)."""
        return list(
            product(
                self.gaits,
                self.h_list,
                self.g_c_list,
                self.x_off_list,
                self.velocities,
                range(self.repeats),
            )
        )

    def grid_size(self) -> int:
        return len(self.cells())

    def to_yaml(self, path) -> None:
        doc = {
            "schema": SWEEP_SCHEMA,
            "gaits": self.gaits,
            "h": list(self.h_list),
            "g_c": list(self.g_c_list),
            "x_off": list(self.x_off_list),
            "velocities": list(self.velocities),
            "repeats": self.repeats,
            "seed": self.seed,
            "mode": self.mode,
            "episode_s": self.episode_s,
            "d_step": self.d_step,
            "g_p": self.g_p,
            "policy": self.policy_path,
        }
        with open(path, "w") as f:
            yaml.safe_dump(doc, f, sort_keys=False)

    @classmethod
    def from_yaml(cls, path) -> "SweepSpec":
        with open(path) as f:
            doc = yaml.safe_load(f)
        if not isinstance(doc, dict) or doc.get("schema") != SWEEP_SCHEMA:
            raise ConfigError(f"{path}: not a sweep spec ({SWEEP_SCHEMA})")
        return cls(
            gaits=doc["gaits"],
            h_list=doc["h"],
            g_c_list=doc["g_c"],
            x_off_list=doc["x_off"],
            velocities=doc["velocities"],
            repeats=int(doc.get("repeats", 8)),
            seed=int(doc.get("seed", 0)),
            mode=doc.get("mode", "kinematic"),
            episode_s=float(doc.get("episode_s", 5.0)),
            d_step=float(doc.get("d_step", 0.2)),
            g_p=float(doc.get("g_p", 0.01)),
            policy_path=doc.get("policy"),
        )


def cell_seed(spec_seed: int, cell_index: int) -> int:
    return int(
        np.random.SeedSequence([spec_seed, cell_index]).generate_state(1)[0]
        % (2**31)
    )


def run_cell(spec: SweepSpec, policy: Policy, cell_index: int) -> dict:
    gait, h, g_c, x_off, velocity, repeat = spec.cells()[cell_index]
    seed = cell_seed(spec.seed, cell_index)
    style = StyleParams(h=h, g_c=g_c, g_p=spec.g_p, x_off=x_off, d_step=spec.d_step)
    cfg = SimConfig(mode=spec.mode, episode_s=spec.episode_s, seed=seed)
    result = run_episode(
        policy,
        ScenarioScript.single_gait(gait, velocity),
        style,
        cfg,
        gait=gait_library(gait),
    )
    m = result.metrics
    return {
        "cell": cell_index,
        "gait": gait,
        "h": h,
        "g_c": g_c,
        "x_off": x_off,
        "velocity": velocity,
        "repeat": repeat,
        "seed": seed,
        "cot": m.cot,
        "mean_ang_vel": m.mean_ang_vel,
        "mean_joint_acc": m.mean_joint_acc,
        "mean_vx": m.mean_vx,
        "mean_power": m.mean_power,
        "distance": m.distance,
        "duration": m.duration,
        "reward": result.reward_total,
        "fault": m.fault,
    }


_POOL_STATE: dict = {}


def _pool_cell(payload):
    import pickle

    blob, cell_index = payload
    if _POOL_STATE.get("blob") != blob:
        _POOL_STATE["args"] = pickle.loads(blob)
        _POOL_STATE["blob"] = blob
    spec, policy = _POOL_STATE["args"]
    return run_cell(spec, policy, cell_index)


def journal_path(out_dir) -> str:
    return os.path.join(out_dir, "journal.jsonl")


def results_path(out_dir) -> str:
    return os.path.join(out_dir, "results.csv")


def _load_journal(out_dir) -> dict:
    rows = {}
    path = journal_path(out_dir)
    if os.path.exists(path):
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path}: corrupt journal line: {exc}") from exc
                rows[int(row["cell"])] = row
    return rows


def run_sweep(
    spec: SweepSpec, out_dir, policy: Policy | None = None, workers: int = 1
) -> list:
    """Run (or resume) the sweep; returns all rows and writes results.csv."""
    import pickle

    os.makedirs(out_dir, exist_ok=True)
    if policy is None:
        from .optimize import load_or_default_policy

        policy = load_or_default_policy(spec.policy_path)
    done = _load_journal(out_dir)
    todo = [i for i in range(spec.grid_size()) if i not in done]

    if todo:
        blob = pickle.dumps((spec, policy))
        payloads = [(blob, i) for i in todo]
        with open(journal_path(out_dir), "a") as journal:
            if workers > 1:
                with ProcessPoolExecutor(workers) as pool:
                    for row in pool.map(_pool_cell, payloads):
                        journal.write(json.dumps(row, sort_keys=True) + "\n")
                        journal.flush()
                        done[row["cell"]] = row
            else:
                for payload in payloads:
                    row = _pool_cell(payload)
                    journal.write(json.dumps(row, sort_keys=True) + "\n")
                    journal.flush()
                    done[row["cell"]] = row

    rows = [done[i] for i in sorted(done)]
    write_results_csv(rows, results_path(out_dir))
    return rows


def write_results_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RESULT_FIELDS)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in RESULT_FIELDS])


def read_results_csv(path) -> list:
    rows = []
    with open(path) as f:
        reader = csv.DictReader(f)
        for raw in reader:
            row = dict(raw)
            for k in (
                "h", "g_c", "x_off", "velocity", "cot", "mean_ang_vel",
                "mean_joint_acc", "mean_vx", "mean_power", "distance",
                "duration", "reward",
            ):
                row[k] = float(row[k]) if row[k] not in ("", "nan") else float("nan")
            row["cell"] = int(row["cell"])
            row["repeat"] = int(row["repeat"])
            row["seed"] = int(row["seed"])
            rows.append(row)
    return rows


def best_per_velocity(rows, metric: str) -> list:
    """Per (gait, velocity), the non-faulted row minimizing `metric`.

    Ties break deterministically toward lower g_c, then higher h, then
    smaller |x_off|.
    """
    if not rows:
        raise ConfigError("no rows to scan")
    if metric not in METRIC_COLUMNS:
        raise ConfigError(
            f"unknown metric {metric!r}; choose from {METRIC_COLUMNS}"
        )
    groups: dict = {}
    for row in rows:
        if row.get("fault"):
            continue
        value = row[metric]
        if not np.isfinite(value):
            continue
        groups.setdefault((row["gait"], row["velocity"]), []).append(row)
    out = []
    for key in sorted(groups):
        candidates = groups[key]
        candidates.sort(
            key=lambda r: (r[metric], r["g_c"], -r["h"], abs(r["x_off"]), r["cell"])
        )
        out.append(candidates[0])
    return out


def emit_plotdata(rows, kind: str, out_dir) -> list:
    """Write tidy CSV + JSON series for one figure family; returns file paths."""
    os.makedirs(out_dir, exist_ok=True)
    if kind == "cot":
        best = best_per_velocity(rows, "cot")
        series: dict = {}
        for row in best:
            series.setdefault(row["gait"], []).append(
                (row["velocity"], row["cot"])
            )
        paths = _write_series(series, ("velocity", "cot"), out_dir, "cot")
    elif kind == "style":
        best = best_per_velocity(rows, "cot")
        series = {}
        for row in best:
            series.setdefault(row["gait"], []).append(
                (row["velocity"], row["h"], row["g_c"], row["x_off"])
            )
        paths = _write_series(
            series, ("velocity", "h", "g_c", "x_off"), out_dir, "style"
        )
    elif kind == "residual":
        best = best_per_velocity(rows, "mean_joint_acc")
        records = [
            (row["gait"], row["velocity"], row["mean_joint_acc"]) for row in best
        ]
        residuals = joint_acc_residuals(records)
        series = {}
        for velocity, by_gait in residuals.items():
            for gait, value in by_gait.items():
                series.setdefault(gait, []).append((velocity, value))
        paths = _write_series(series, ("velocity", "residual"), out_dir, "residual")
    else:
        raise ConfigError(f"unknown plotdata kind {kind!r} (cot|style|residual)")
    return paths


def _write_series(series: dict, columns, out_dir, stem: str) -> list:
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(("gait",) + tuple(columns))
        for gait in sorted(series):
            for point in sorted(series[gait]):
                writer.writerow((gait,) + tuple(_fmt(v) for v in point))
    doc = {
        "series": {
            gait: [[float(v) for v in point] for point in sorted(series[gait])]
            for gait in sorted(series)
        },
        "columns": list(columns),
    }
    with open(json_path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    return [csv_path, json_path]
