"""Regenerate the shipped baseline policy and default data files.

Per gait, measures the kinematic-mode velocity response v(omega) at fixed
amplitude and inverts it onto the table's velocity knots; the trot table is
then polished with a short evolution-strategies run (this is the checkpoint
the tests freeze against). Writes:

    src/gaitkit/data/baseline_policy.json
    src/gaitkit/data/gaits_default.yaml
    src/gaitkit/data/robot_default.yaml

Usage: python scripts/make_baseline.py [--skip-es]
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from gaitkit import cpg
from gaitkit.cpg import GAIT_NAMES, gait_library
from gaitkit.optimize import EvalTask, OptimizerConfig, evaluate, optimize_es
from gaitkit.pattern import StyleParams
from gaitkit.policy import ConstantTablePolicy
from gaitkit.robot import RobotModel
from gaitkit.simulator import SimConfig, Simulation

KNOTS = (0.0, 0.3, 0.6, 1.0, 1.5, 2.0, 2.5, 3.0)
MU_HI = {"pronk": 2.0, "walk": 1.8, "amble": 1.8, "canter": 1.8,
         "transverse-gallop": 1.8, "rotary-gallop": 1.8}
MU_HI_DEFAULT = 1.6
MU_LO = 1.3
D_STEP = 0.2


class _FixedCommand:
    def __init__(self, mu, omega):
        self.a = np.concatenate([np.full(4, mu), np.full(4, omega)])

    def act(self, obs):
        return self.a


def mu_for(gait: str, v: float) -> float:
    hi = MU_HI.get(gait, MU_HI_DEFAULT)
    return MU_LO + (hi - MU_LO) * min(max(v / 1.5, 0.0), 1.0)


def measure_velocity(gait_name: str, mu: float, omega: float) -> float:
    if omega <= 0:
        return 0.0
    settle = max(1.5, 2.0 / omega)
    window = max(2.5, 4.0 / omega)
    cfg = SimConfig(mode="kinematic", seed=17, init_phase_noise=0.2)
    sim = Simulation(
        cfg,
        style=StyleParams(d_step=D_STEP),
        gait=gait_library(gait_name),
        policy=_FixedCommand(mu, omega),
    )
    sim.run(settle)
    x0 = sim.engine.base_pos[0]
    sim.run(window)
    return float((sim.engine.base_pos[0] - x0) / window)


def solve_omega(gait: str, mu: float, v_target: float) -> float:
    """Secant refinement of the commanded frequency hitting v_target."""
    omega = min(8.0, v_target / (4.0 * D_STEP * (mu - 1.0)))
    for _ in range(3):
        v = measure_velocity(gait, mu, omega)
        if v <= 1e-6:
            omega = min(8.0, omega + 0.5)
            continue
        err = (v - v_target) / v_target
        if abs(err) < 0.015:
            break
        omega = float(np.clip(omega * v_target / v, 0.05, 8.0))
        if omega >= 8.0:
            break
    return omega


def calibrate_tables() -> dict:
    tables = {}
    for gait in GAIT_NAMES:
        table = np.zeros((len(KNOTS), 8))
        for i, v in enumerate(KNOTS):
            mu = mu_for(gait, v)
            table[i, :4] = mu
            table[i, 4:] = solve_omega(gait, mu, v) if v > 0 else 0.0
        tables[gait] = table
        print(f"calibrated {gait:18s} omega@1.0={table[KNOTS.index(1.0), 4]:.2f} Hz "
              f"omega@3.0={table[-1, 4]:.2f} Hz")
    return tables


def polish_trot(policy: ConstantTablePolicy, workers: int) -> ConstantTablePolicy:
    cfg = OptimizerConfig(
        population=16,
        iterations=12,
        sigma=0.03,
        sigma_decay=0.92,
        lr=0.2,
        episode_s=3.0,
        seed=99,
        workers=workers,
        curriculum=[
            EvalTask(gait="trot", velocity=0.5, style=StyleParams(d_step=D_STEP)),
            EvalTask(gait="trot", velocity=1.0, style=StyleParams(d_step=D_STEP)),
        ],
        sim=SimConfig(mode="kinematic"),
    )
    policy.trainable_gait = "trot"
    result = optimize_es(cfg, policy)
    print(f"trot polish: best objective {result.best_objective:.4f}")
    return result.policy


def verify(policy: ConstantTablePolicy) -> None:
    cfg = SimConfig(mode="kinematic", episode_s=5.0)
    worst = 0.0
    for gait in GAIT_NAMES:
        for v in (0.3, 0.5, 1.0, 2.0, 3.0):
            _, m = evaluate(policy, gait, StyleParams(d_step=D_STEP), v, cfg, seed=23)
            err = abs(m.mean_vx - v) / v
            worst = max(worst, err)
            status = "ok" if err < 0.10 else "OFF"
            print(f"  {gait:18s} v*={v:3.1f}: v={m.mean_vx:6.3f} ({100*err:4.1f}%) {status}")
    print(f"worst tracking error: {100*worst:.1f}%")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--skip-es", action="store_true")
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args()

    data_dir = os.path.join(os.path.dirname(__file__), "..", "src", "gaitkit", "data")
    os.makedirs(data_dir, exist_ok=True)

    t0 = time.time()
    tables = calibrate_tables()
    policy = ConstantTablePolicy(KNOTS, tables, default=tables["trot"])
    if not args.skip_es:
        policy = polish_trot(policy, args.workers)
    verify(policy)
    policy.save(os.path.join(data_dir, "baseline_policy.json"))

    cpg.dump_gaits(
        [gait_library(n) for n in GAIT_NAMES],
        os.path.join(data_dir, "gaits_default.yaml"),
    )
    RobotModel().to_yaml(os.path.join(data_dir, "robot_default.yaml"))
    print(f"done in {time.time() - t0:.0f} s -> {data_dir}")


if __name__ == "__main__":
    main()
