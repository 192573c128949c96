"""Command-line mission runner.

Subcommands mirror the pipeline stages: ``map`` (scout + fusion only),
``risk`` (platform risk from an existing map), ``plan`` (trajectory from
an existing risk layer), ``run`` (everything), ``replay`` (re-derive
from a recorded step log), and ``serve`` (HTTP mission service).

Exit codes: 0 success, 2 configuration error, 3 pipeline error (the
failing stage is named on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

CONFIG_ERROR = 2
PIPELINE_ERROR = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default="ames", help="mission preset: ames or whitesands")
    p.add_argument("--seed", type=int, default=0, help="simulation seed")
    p.add_argument("--out", required=True, help="artifact output directory")
    p.add_argument("--payload", type=float, default=None,
                   help="extra payload mass (kg) applied to the hexapod sweep")
    p.add_argument("--risk-threshold", type=float, default=None,
                   help="risk score at or above which cells become obstacles")
    p.add_argument("--noise", type=float, default=None,
                   help="force noise std (N); default 5%% of full-stroke force")
    p.add_argument("--length-scale", type=float, default=None, help="kernel length scale (m)")
    p.add_argument("--noise-floor", type=float, default=None, help="kernel noise floor")
    p.add_argument("--constant", type=float, default=None, help="kernel constant")
    p.add_argument("--optimize-kernel", action="store_true",
                   help="grid-search kernel hyperparameters by marginal likelihood")


def _build_config(args):
    from .mapping import KernelParams
    from .mission import preset_config

    config = preset_config(args.preset, seed=args.seed)
    kernel = config.kernel
    if args.length_scale is not None:
        kernel = replace(kernel, length_scale=args.length_scale)
    if args.noise_floor is not None:
        kernel = replace(kernel, noise_floor=args.noise_floor)
    if args.constant is not None:
        kernel = replace(kernel, constant=args.constant)
    config = replace(config, kernel=kernel)
    if args.risk_threshold is not None:
        config = replace(config, risk_threshold=args.risk_threshold)
    if args.noise is not None:
        config = replace(config, noise_std_n=args.noise)
    if args.payload is not None:
        config = replace(config, rhex_payloads_kg=(args.payload,),
                         planning_platform=f"rhex_{int(args.payload)}kg")
    return config


def _maybe_optimize(config, steps):
    from .mapping import optimize_hyperparameters

    obs = [(s.x, s.y, s.estimate.alpha_z) for s in steps]
    return replace(config, kernel=optimize_hyperparameters(obs))


def _cmd_run(args) -> int:
    from .mission import generate_scout_steps, replay, run_mission
    from .proprioception import steps_to_csv

    config = _build_config(args)
    if args.optimize_kernel:
        steps = generate_scout_steps(
            config.scout_plan, config.ground_truth, noise_std_n=config.noise_std_n,
            seed=config.seed, crust_regions=config.crust_regions,
        )
        config = _maybe_optimize(config, steps)
        artifacts = replay(steps_to_csv(steps), config, out_dir=args.out)
    else:
        artifacts = run_mission(config, out_dir=args.out)
    print(json.dumps(artifacts.summary, sort_keys=True, indent=2))
    return 0


def _cmd_map(args) -> int:
    from .mapping import TerrainMapper
    from .mission import MissionArtifacts, generate_scout_steps, write_artifacts

    config = _build_config(args)
    steps = generate_scout_steps(
        config.scout_plan, config.ground_truth, noise_std_n=config.noise_std_n,
        seed=config.seed, crust_regions=config.crust_regions,
    )
    if args.optimize_kernel:
        config = _maybe_optimize(config, steps)
    mapper = TerrainMapper(config.kernel)
    mapper.ingest(steps)
    terrain_map = mapper.rasterize(config.map_grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .grids import raster_to_binary, raster_to_csv
    from .proprioception import steps_to_csv

    (out / "log.csv").write_text(steps_to_csv(steps), encoding="utf-8")
    maps_dir = out / "maps"
    maps_dir.mkdir(exist_ok=True)
    for name, raster in (("mean", terrain_map.mean), ("variance", terrain_map.variance),
                         ("fitness", terrain_map.fitness)):
        (maps_dir / f"{name}.csv").write_text(raster_to_csv(raster), encoding="utf-8")
        (maps_dir / f"{name}.bin").write_bytes(raster_to_binary(raster))
    print(f"wrote maps for {len(steps)} steps to {out}")
    return 0


def _cmd_risk(args) -> int:
    from .grids import raster_from_csv, raster_to_csv
    from .mission import preset_config
    from .rhex import field_params, rhex_risk_map
    from .wheel import wheel_risk_map

    mean_path = Path(args.map_dir) / "maps" / "mean.csv"
    if not mean_path.exists():
        print(f"risk: no mean raster at {mean_path} (run 'map' first)", file=sys.stderr)
        return CONFIG_ERROR
    mean = raster_from_csv(mean_path.read_text(encoding="utf-8"))
    config = preset_config(args.preset, seed=args.seed)
    if args.platform == "wheel":
        params = config.wheel_params
        if params is None:
            from .wheel import WheelParams

            params = WheelParams(radius_m=0.15, width_m=0.10,
                                 mass_kg=(40.0 + (args.payload or 60.0)) / 4.0,
                                 torque_limit_nm=9.0)
        risk = wheel_risk_map(mean, params)
    else:
        payload = args.payload if args.payload is not None else 60.0
        risk = rhex_risk_map(mean, field_params(27.4 + payload))
    out = Path(args.out)
    risk_dir = out / "risk"
    risk_dir.mkdir(parents=True, exist_ok=True)
    key = args.platform
    (risk_dir / f"{key}_score.csv").write_text(raster_to_csv(risk.score), encoding="utf-8")
    (risk_dir / f"{key}_hazard.csv").write_text(raster_to_csv(risk.hazard_raster()),
                                                encoding="utf-8")
    for layer_name, layer in sorted(risk.layers.items()):
        (risk_dir / f"{key}_{layer_name}.csv").write_text(raster_to_csv(layer), encoding="utf-8")
    print(f"hazard fraction: {risk.hazard_fraction:.4f}")
    return 0


def _cmd_plan(args) -> int:
    from .grids import raster_from_csv
    from .planner import (PlannerConfig, naive_rollout, obstacles_to_text, simulate_path,
                          threshold_obstacles, trajectory_to_csv)

    score_path = Path(args.risk_dir) / "risk" / f"{args.platform}_score.csv"
    if not score_path.exists():
        print(f"plan: no risk score at {score_path} (run 'risk' first)", file=sys.stderr)
        return CONFIG_ERROR
    score = raster_from_csv(score_path.read_text(encoding="utf-8"))
    threshold = args.risk_threshold if args.risk_threshold is not None else 1.0
    obstacles = threshold_obstacles(score, threshold)
    start = tuple(float(v) for v in args.start.split(","))
    goals = [tuple(float(v) for v in g.split(",")) for g in args.goal]
    trajectory = simulate_path(start, goals, obstacles, PlannerConfig())
    naive = naive_rollout(start, goals, PlannerConfig())
    out = Path(args.out)
    plan_dir = out / "plan"
    plan_dir.mkdir(parents=True, exist_ok=True)
    (plan_dir / "trajectory.csv").write_text(trajectory_to_csv(trajectory), encoding="utf-8")
    (plan_dir / "naive_trajectory.csv").write_text(trajectory_to_csv(naive), encoding="utf-8")
    (plan_dir / "obstacles.txt").write_text(obstacles_to_text(obstacles), encoding="utf-8")
    print(f"plan: {trajectory.termination} after {trajectory.duration_s:.2f}s, "
          f"arrivals {list(trajectory.arrivals)}")
    return 0


def _cmd_replay(args) -> int:
    from .mission import replay

    log_path = Path(args.log)
    if not log_path.exists():
        print(f"replay: step log {log_path} not found", file=sys.stderr)
        return CONFIG_ERROR
    config = _build_config(args)
    artifacts = replay(log_path.read_text(encoding="utf-8"), config, out_dir=args.out)
    print(json.dumps(artifacts.summary, sort_keys=True, indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app()
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="terrascout",
                                     description="scout-rover terrain risk pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: scout, map, risk, plan")
    _add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_map = sub.add_parser("map", help="scouting and map fusion only")
    _add_common(p_map)
    p_map.set_defaults(func=_cmd_map)

    p_risk = sub.add_parser("risk", help="platform risk from an existing map")
    _add_common(p_risk)
    p_risk.add_argument("--map-dir", required=True, help="directory holding maps/mean.csv")
    p_risk.add_argument("--platform", choices=("rhex", "wheel"), default="wheel")
    p_risk.set_defaults(func=_cmd_risk)

    p_plan = sub.add_parser("plan", help="trajectory from an existing risk layer")
    _add_common(p_plan)
    p_plan.add_argument("--risk-dir", required=True, help="directory holding risk/*_score.csv")
    p_plan.add_argument("--platform", choices=("rhex", "wheel", "rhex_60kg"), default="wheel")
    p_plan.add_argument("--start", required=True, help="start position 'x,y'")
    p_plan.add_argument("--goal", action="append", required=True,
                        help="goal position 'x,y' (repeatable, visited in order)")
    p_plan.set_defaults(func=_cmd_plan)

    p_replay = sub.add_parser("replay", help="re-derive artifacts from a step log")
    _add_common(p_replay)
    p_replay.add_argument("--log", required=True, help="step log CSV from a previous run")
    p_replay.set_defaults(func=_cmd_replay)

    p_serve = sub.add_parser("serve", help="run the HTTP mission service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8787)
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches the config-error code
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        # mission stage failures name their stage in the message
        if str(exc).startswith("stage "):
            return PIPELINE_ERROR
        return CONFIG_ERROR
    except Exception as exc:  # unexpected pipeline failure
        print(f"{args.command}: {exc}", file=sys.stderr)
        return PIPELINE_ERROR


if __name__ == "__main__":
    sys.exit(main())
