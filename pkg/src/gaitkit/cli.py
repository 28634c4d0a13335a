"""Command-line interface.

Verbs: gait list/show/validate, sweep, best, plotdata, scenario run,
optimize, serve. Exit codes: 0 success, 2 configuration/user error,
3 runtime fault, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import yaml

from . import cpg
from .errors import ConfigError, GaitkitError, SchemaVersionError, UnknownGaitError
from .pattern import StyleParams
from .scenario import ScenarioScript
from .simulator import SimConfig, run_episode

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


def _cmd_gait(args) -> int:
    if args.action == "list":
        for name in cpg.GAIT_NAMES:
            fractions = cpg.GAIT_PHASE_FRACTIONS[name]
            print(f"{name:18s} phase fractions (FR FL HR HL): {fractions}")
        return EXIT_OK
    if args.action == "show":
        gait = cpg.gait_library(args.name)
        print(f"name: {gait.name}")
        print(f"phase (rad): {np.array2string(gait.phase, precision=4)}")
        print("phase bias matrix (rad):")
        print(np.array2string(gait.phi, precision=4, suppress_small=True))
        return EXIT_OK
    # validate
    gaits = cpg.load_gaits(args.file)
    for name, gait in gaits.items():
        skew = cpg.wrap_angle(gait.phi + gait.phi.T)
        assert np.abs(skew).max() < 1e-9
        print(f"{name}: ok")
    print(f"{args.file}: {len(gaits)} gait(s) valid")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .sweep import SweepSpec, run_sweep

    spec = SweepSpec.from_yaml(args.spec)
    rows = run_sweep(spec, args.out, workers=args.workers)
    faults = sum(1 for r in rows if r["fault"])
    print(f"{len(rows)} rows ({faults} flagged) -> {args.out}/results.csv")
    return EXIT_OK


def _cmd_best(args) -> int:
    from .sweep import best_per_velocity, read_results_csv, write_results_csv

    rows = read_results_csv(args.results)
    best = best_per_velocity(rows, args.metric)
    write_results_csv(best, args.out)
    print(f"{len(best)} best rows -> {args.out}")
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    from .sweep import emit_plotdata, read_results_csv

    rows = read_results_csv(args.results)
    paths = emit_plotdata(rows, args.kind, args.out)
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_scenario(args) -> int:
    from .optimize import load_or_default_policy

    script = ScenarioScript.from_yaml(args.script)
    cfg = SimConfig(mode=args.mode, episode_s=args.duration, seed=args.seed)
    policy = load_or_default_policy(args.policy)
    result = run_episode(policy, script, StyleParams(), cfg)
    if args.log:
        result.log.to_csv(args.log)
    print(f"termination: {result.termination}")
    print(json.dumps(result.metrics.as_dict(), indent=1, sort_keys=True))
    if result.termination == "divergence":
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_optimize(args) -> int:
    from .optimize import EvalTask, OptimizerConfig, optimize_es
    from .policy import ConstantTablePolicy

    with open(args.config) as f:
        doc = yaml.safe_load(f) or {}
    tasks = [
        EvalTask(
            gait=t.get("gait", "trot"),
            velocity=float(t.get("velocity", 0.5)),
            style=StyleParams(**t.get("style", {})),
        )
        for t in doc.get("curriculum", [{}])
    ]
    cfg = OptimizerConfig(
        population=int(doc.get("population", 32)),
        iterations=int(doc.get("iterations", 40)),
        sigma=float(doc.get("sigma", 0.08)),
        sigma_decay=float(doc.get("sigma_decay", 0.97)),
        lr=float(doc.get("lr", 0.25)),
        episode_s=float(doc.get("episode_s", 4.0)),
        seed=int(doc.get("seed", 0)),
        workers=args.workers,
        objective=doc.get("objective", "return"),
        curriculum=tasks,
        sim=SimConfig(mode=doc.get("mode", "kinematic")),
    )
    policy = ConstantTablePolicy.stride_feedforward()
    policy.trainable_gait = tasks[0].gait
    result = optimize_es(cfg, policy)
    result.policy.save(args.out)
    if args.trace:
        result.trace_csv(args.trace)
    print(f"best objective {result.best_objective:.4f} -> {args.out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .server import SessionConfig, serve

    cfg = SessionConfig(
        sim=SimConfig(mode=args.mode, seed=args.seed, episode_s=1e9),
        gait=args.gait,
        velocity=args.velocity,
        policy_path=args.policy,
        scenario_path=args.scenario,
    )
    serve(args.bind, cfg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitkit", description="quadruped gait-control toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gait", help="inspect or validate gait definitions")
    gait_sub = p.add_subparsers(dest="action", required=True)
    gait_sub.add_parser("list", help="list library gaits")
    show = gait_sub.add_parser("show", help="print one gait's matrices")
    show.add_argument("name")
    validate = gait_sub.add_parser("validate", help="check a gait file")
    validate.add_argument("file")
    p.set_defaults(func=_cmd_gait)

    p = sub.add_parser("sweep", help="run a gait x style x velocity grid")
    p.add_argument("--spec", required=True, help="sweep spec YAML")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("best", help="argmin rows per (gait, velocity)")
    p.add_argument("--results", required=True)
    p.add_argument("--metric", default="cot")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_best)

    p = sub.add_parser("plotdata", help="emit tidy plot series")
    p.add_argument("--results", required=True)
    p.add_argument("--kind", choices=("cot", "style", "residual"), default="cot")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plotdata)

    p = sub.add_parser("scenario", help="scenario playback")
    scen_sub = p.add_subparsers(dest="action", required=True)
    run = scen_sub.add_parser("run", help="run a scenario script")
    run.add_argument("script")
    run.add_argument("--mode", choices=("kinematic", "dynamic"), default="kinematic")
    run.add_argument("--duration", type=float, default=20.0)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--policy", default=None)
    run.add_argument("--log", default=None, help="write trajectory CSV here")
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("optimize", help="evolution-strategies policy search")
    p.add_argument("--config", required=True, help="optimizer YAML")
    p.add_argument("--out", required=True, help="policy checkpoint path")
    p.add_argument("--trace", default=None, help="convergence trace CSV")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("serve", help="live websocket command/telemetry bridge")
    p.add_argument("--bind", default="127.0.0.1:8800")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("kinematic", "dynamic"), default="kinematic")
    p.add_argument("--gait", default="trot")
    p.add_argument("--velocity", type=float, default=0.5)
    p.add_argument("--policy", default=None)
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownGaitError, SchemaVersionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GaitkitError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
