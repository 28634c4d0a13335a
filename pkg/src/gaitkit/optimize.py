"""Evolution-strategies policy search over the simulator.

Mirrored sampling with rank-based fitness shaping over a small parameter
vector; population members are evaluated on identical seeds within an
iteration (common random numbers), so the whole optimization is reproducible
from (config, seed). Population evaluations fan out over a process pool when
workers > 1 and aggregate at an iteration barrier.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cpg import gait_library
from .errors import ConfigError, GaitkitError
from .metrics import MetricsRecord
from .pattern import StyleParams
from .policy import Policy, load_policy
from .robot import RobotModel
from .scenario import ScenarioScript
from .simulator import SimConfig, run_episode


@dataclass(frozen=True)
class EvalTask:
    """One curriculum item: a gait at a commanded velocity with a style."""

    gait: str = "trot"
    velocity: float = 0.5
    style: StyleParams = field(default_factory=StyleParams)


@dataclass
class OptimizerConfig:
    population: int = 32
    iterations: int = 40
    sigma: float = 0.08
    sigma_decay: float = 0.97
    lr: float = 0.25
    episode_s: float = 4.0
    seed: int = 0
    workers: int = 1
    objective: str = "return"  # "return" | "cot"
    tracking_tolerance: float = 0.10
    curriculum: list = field(default_factory=lambda: [EvalTask()])
    sim: SimConfig = field(default_factory=lambda: SimConfig(mode="kinematic"))

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ConfigError("population must be even and >= 4")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")


def evaluate(
    policy: Policy,
    gait: str,
    style: StyleParams,
    velocity: float,
    cfg: SimConfig,
    seed: int,
    robot: RobotModel | None = None,
):
    """Run one closed-loop episode; returns (summed reward, MetricsRecord)."""
    cfg = replace(cfg, seed=seed)
    script = ScenarioScript.single_gait(gait, velocity)
    result = run_episode(
        policy, script, style, cfg, robot=robot, gait=gait_library(gait)
    )
    return result.reward_total, result.metrics


def _objective_value(obj: str, reward: float, metrics: MetricsRecord, task: EvalTask):
    if obj == "return":
        return reward
    # COT objective: minimize COT subject to staying on the commanded velocity
    if not metrics.is_valid():
        return -1e6
    err = abs(metrics.mean_vx - task.velocity) / max(abs(task.velocity), 1e-6)
    return -metrics.cot - 100.0 * max(0.0, err - 0.10) ** 2


_WORKER_STATE: dict = {}


def _worker_eval(payload):
    """Evaluate one candidate parameter vector (runs in a pool worker)."""
    import pickle

    idx, params, blob, seeds = payload
    if _WORKER_STATE.get("blob") != blob:
        _WORKER_STATE["cfg"] = pickle.loads(blob)
        _WORKER_STATE["blob"] = blob
    opt_cfg, policy = _WORKER_STATE["cfg"]
    policy.set_params(np.asarray(params))
    total = 0.0
    faults = 0
    cfg = replace(opt_cfg.sim, episode_s=opt_cfg.episode_s)
    for task, seed in zip(opt_cfg.curriculum, seeds):
        reward, metrics = evaluate(
            policy, task.gait, task.style, task.velocity, cfg, seed
        )
        total += _objective_value(opt_cfg.objective, reward, metrics, task)
        if metrics.fault:
            faults += 1
    return idx, total / len(opt_cfg.curriculum), faults


@dataclass
class OptResult:
    policy: Policy
    best_objective: float
    trace: list
    best_params: np.ndarray

    def trace_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(
                f, fieldnames=["iteration", "best_so_far", "population_mean", "sigma"]
            )
            writer.writeheader()
            for row in self.trace:
                writer.writerow(row)


def es_maximize(fn, x0, cfg: OptimizerConfig, callback=None):
    """Generic mirrored-sampling ES with rank-shaped, sigma-scaled updates.

    fn(batch_of_params, iteration) -> array of objective values (higher is
    better). The batch holds the current mean first (tracked for best-so-far
    only) followed by the mirrored population. Returns (best_x, best_f, trace).
    """
    rng = np.random.default_rng(cfg.seed)
    x = np.asarray(x0, dtype=float).copy()
    dim = x.size
    sigma = cfg.sigma
    half = cfg.population // 2
    best_x = x.copy()
    best_f = -np.inf
    trace = []
    for it in range(cfg.iterations):
        eps = rng.standard_normal((half, dim))
        candidates = np.concatenate(
            [x[None, :], x + sigma * eps, x - sigma * eps], axis=0
        )
        values = np.asarray(fn(candidates, it), dtype=float)
        if values.shape != (cfg.population + 1,):
            raise GaitkitError("objective returned wrong batch shape")
        pop_values = values[1:]
        order = np.argsort(np.argsort(pop_values))  # ranks, 0 = worst
        utilities = order / (cfg.population - 1.0) - 0.5
        signed = np.concatenate([eps, -eps], axis=0)
        x = x + cfg.lr * sigma * (utilities @ signed)
        top = int(np.argmax(values))
        if values[top] > best_f:
            best_f = float(values[top])
            best_x = candidates[top].copy()
        trace.append(
            {
                "iteration": it,
                "best_so_far": best_f,
                "population_mean": float(pop_values.mean()),
                "sigma": sigma,
            }
        )
        if callback is not None:
            callback(it, best_f, values)
        sigma *= cfg.sigma_decay
    return best_x, best_f, trace


def optimize_es(
    cfg: OptimizerConfig, policy: Policy, robot: RobotModel | None = None
) -> OptResult:
    """Search the policy's parameter vector to maximize the configured objective."""
    import pickle

    blob = pickle.dumps((cfg, policy))
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None

    def batch_objective(candidates, iteration):
        # common random numbers: every member sees the same episode seeds
        seeds = [
            int(s.generate_state(1)[0] % (2**31))
            for s in np.random.SeedSequence([cfg.seed, iteration]).spawn(
                len(cfg.curriculum)
            )
        ]
        payloads = [
            (i, candidates[i], blob, seeds) for i in range(len(candidates))
        ]
        values = np.empty(len(candidates))
        fault_counts = np.zeros(len(candidates), dtype=int)
        if pool is None:
            results = map(_worker_eval, payloads)
        else:
            results = pool.map(_worker_eval, payloads)
        for idx, value, faults in results:
            values[idx] = value
            fault_counts[idx] = faults
        if (fault_counts >= len(cfg.curriculum)).all():
            raise GaitkitError(
                "every candidate in the iteration faulted; check the task "
                "(velocity, style, mode) before re-running"
            )
        return values

    try:
        best_x, best_f, trace = es_maximize(
            batch_objective, policy.get_params(), cfg
        )
    finally:
        if pool is not None:
            pool.shutdown()
    policy.set_params(best_x)
    return OptResult(
        policy=policy, best_objective=best_f, trace=trace, best_params=best_x
    )


def load_or_default_policy(path=None) -> Policy:
    if path is None:
        from importlib import resources

        ref = resources.files("gaitkit").joinpath("data/baseline_policy.json")
        with resources.as_file(ref) as p:
            return load_policy(p)
    return load_policy(path)
