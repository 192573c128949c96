"""Closed-loop desk-scale missions: scout, map, assess risk, plan.

A mission simulates a boustrophedon scouting pass over a ground-truth
resistance field, turns each footstep trace into a strength estimate,
fuses the estimates into posterior terrain maps, converts the strength
map into platform risk maps, extracts hazard polygons, and plans a safe
trajectory through the configured science goals.  Everything is
deterministic for a fixed seed, and all artifacts serialize to an output
directory with byte-stable formatting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import planner as planner_mod
from . import rhex as rhex_mod
from . import wheel as wheel_mod
from .grids import GridSpec, Raster, raster_to_binary, raster_to_csv
from .mapping import KernelParams, TerrainMap, TerrainMapper
from .planner import ObstacleSet, PlannerConfig, Trajectory
from .proprioception import (
    StepMeasurement,
    extract_penetration_phase,
    fit_resistance,
    steps_from_csv,
    steps_to_csv,
)
from .risk import RiskMap
from .terrain import CrustSpec, ProbeGeometry, ResistanceField, ames_testbed_field, synthesize_trace

__all__ = [
    "ScoutPlan",
    "CrustRegion",
    "MissionConfig",
    "MissionArtifacts",
    "MissionError",
    "generate_scout_steps",
    "run_mission",
    "replay",
    "preset_config",
    "PRESETS",
    "whitesands_field",
]


class MissionError(ValueError):
    """Invalid mission configuration or pipeline failure."""


@dataclass(frozen=True)
class ScoutPlan:
    """Boustrophedon coverage: lanes along x, ordered by increasing y.

    Lane y positions and step x positions are endpoint-inclusive; lane
    direction alternates so step counts and ordering are reproducible.
    The contact threshold defaults to zero because synthetic traces have
    no free-fall phase to strip.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    lane_spacing_m: float
    step_length_m: float
    probe: ProbeGeometry = field(default_factory=ProbeGeometry)
    contact_threshold_n: float = 0.0
    step_period_s: float = 1.0

    def __post_init__(self):
        if self.lane_spacing_m <= 0 or self.step_length_m <= 0:
            raise MissionError("lane spacing and step length must be positive")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise MissionError("scout region must have positive extent")

    def positions(self) -> list[tuple[float, float]]:
        eps = 1e-9
        lanes = []
        y = self.y_min
        while y <= self.y_max + eps:
            lanes.append(min(y, self.y_max))
            y += self.lane_spacing_m
        xs = []
        x = self.x_min
        while x <= self.x_max + eps:
            xs.append(min(x, self.x_max))
            x += self.step_length_m
        out = []
        for i, lane_y in enumerate(lanes):
            lane_xs = xs if i % 2 == 0 else xs[::-1]
            out.extend((lane_x, lane_y) for lane_x in lane_xs)
        return out


@dataclass(frozen=True)
class CrustRegion:
    """Axis-aligned region whose traces carry a crust force plateau."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    crust: CrustSpec

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class MissionConfig:
    """Everything a mission run needs, seed included."""

    name: str
    ground_truth: ResistanceField
    scout_plan: ScoutPlan
    map_grid: GridSpec
    kernel: KernelParams = field(default_factory=KernelParams)
    rhex_payloads_kg: tuple[float, ...] = ()
    rhex_base_mass_kg: float = 27.4
    wheel_params: wheel_mod.WheelParams | None = None
    planner_config: PlannerConfig = field(default_factory=PlannerConfig)
    start: tuple[float, float] = (0.0, 0.0)
    goals: tuple[tuple[float, float], ...] = ()
    risk_threshold: float = 1.0
    planning_platform: str = "wheel"  # which risk map feeds the obstacle set
    noise_std_n: float | None = None  # None -> 5% of full-stroke force
    crust_regions: tuple[CrustRegion, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not self.rhex_payloads_kg and self.wheel_params is None:
            raise MissionError("configure at least one platform")


@dataclass(frozen=True)
class MissionArtifacts:
    """All mission outputs, mutually consistent on the mission map grid."""

    config: MissionConfig
    steps: tuple[StepMeasurement, ...]
    terrain_map: TerrainMap
    risk_maps: dict[str, RiskMap]
    obstacles: ObstacleSet
    trajectory: Trajectory | None
    naive_trajectory: Trajectory | None
    summary: dict


def generate_scout_steps(
    plan: ScoutPlan,
    ground_truth: ResistanceField,
    noise_std_n: float | None = None,
    seed: int = 0,
    crust_regions: tuple[CrustRegion, ...] = (),
) -> list[StepMeasurement]:
    """Walk the boustrophedon pattern, probing and fitting at every step.

    Each step gets an independent, deterministic noise stream derived
    from (seed, step index), so a fixed seed reproduces the whole log.
    """
    extent = ground_truth.spec.extent
    if not (
        extent[0] <= plan.x_min
        and extent[1] <= plan.y_min
        and plan.x_max < extent[2]
        and plan.y_max < extent[3]
    ):
        raise MissionError(f"scout region exceeds the field extent {extent}")
    steps = []
    for index, (x, y) in enumerate(plan.positions()):
        crust = None
        for region in crust_regions:
            if region.contains(x, y):
                crust = region.crust
                break
        trace = synthesize_trace(
            ground_truth,
            x,
            y,
            probe=plan.probe,
            noise_std_n=noise_std_n,
            crust=crust,
            seed=[seed, index],
        )
        segment = extract_penetration_phase(trace, plan.contact_threshold_n)
        estimate = fit_resistance(segment)
        steps.append(
            StepMeasurement(x=x, y=y, estimate=estimate, time_s=index * plan.step_period_s)
        )
    return steps


def _risk_maps(config: MissionConfig, mean_raster: Raster) -> dict[str, RiskMap]:
    maps: dict[str, RiskMap] = {}
    for payload in config.rhex_payloads_kg:
        params = rhex_mod.field_params(config.rhex_base_mass_kg + payload)
        maps[f"rhex_{int(payload)}kg"] = rhex_mod.rhex_risk_map(mean_raster, params)
    if config.wheel_params is not None:
        maps["wheel"] = wheel_mod.wheel_risk_map(mean_raster, config.wheel_params)
    return maps


def _planning_risk(config: MissionConfig, risk_maps: dict[str, RiskMap]) -> RiskMap:
    if config.planning_platform in risk_maps:
        return risk_maps[config.planning_platform]
    # fall back to whichever platform exists
    return risk_maps[sorted(risk_maps)[0]]


def _rmse_vs_ground_truth(mean: Raster, field: ResistanceField) -> float:
    xg, yg = mean.spec.cell_centers()
    truth = np.empty_like(mean.values)
    for iy in range(mean.spec.height):
        for ix in range(mean.spec.width):
            truth[iy, ix] = field.raster.value_at(float(xg[iy, ix]), float(yg[iy, ix]))
    return float(np.sqrt(np.mean((mean.values - truth) ** 2)))


def _build_artifacts(config: MissionConfig, steps: list[StepMeasurement]) -> MissionArtifacts:
    stage = "mapping"
    try:
        mapper = TerrainMapper(config.kernel)
        for step in steps:
            mapper.ingest([step])
        terrain_map = mapper.rasterize(config.map_grid)

        stage = "risk"
        risk_maps = _risk_maps(config, terrain_map.mean)
        planning_risk = _planning_risk(config, risk_maps)

        stage = "planning"
        obstacles = planner_mod.threshold_obstacles(planning_risk.score, config.risk_threshold)
        trajectory = None
        naive = None
        if config.goals:
            trajectory = planner_mod.simulate_path(
                config.start, config.goals, obstacles, config.planner_config
            )
            naive = planner_mod.naive_rollout(config.start, config.goals, config.planner_config)

        stage = "summary"
        summary = {
            "preset": config.name,
            "seed": config.seed,
            "n_steps": len(steps),
            "map_rmse_ncm3": _rmse_vs_ground_truth(terrain_map.mean, config.ground_truth),
            "hazard_fractions": {k: v.hazard_fraction for k, v in sorted(risk_maps.items())},
            "n_obstacle_polygons": len(obstacles),
            "planning_platform": config.planning_platform,
            "risk_threshold": config.risk_threshold,
        }
        if trajectory is not None:
            summary["plan"] = {
                "termination": trajectory.termination,
                "arrivals": list(trajectory.arrivals),
                "duration_s": trajectory.duration_s,
                "naive_enters_hazard": planner_mod.trajectory_intersects(naive, obstacles),
                "safe_enters_hazard": planner_mod.trajectory_intersects(trajectory, obstacles),
            }
    except MissionError:
        raise
    except Exception as exc:
        raise MissionError(f"stage {stage}: {exc}") from exc
    return MissionArtifacts(
        config=config,
        steps=tuple(steps),
        terrain_map=terrain_map,
        risk_maps=risk_maps,
        obstacles=obstacles,
        trajectory=trajectory,
        naive_trajectory=naive,
        summary=summary,
    )


def run_mission(config: MissionConfig, out_dir: str | Path | None = None) -> MissionArtifacts:
    """Execute scouting through planning; optionally write the artifact tree."""
    try:
        steps = generate_scout_steps(
            config.scout_plan,
            config.ground_truth,
            noise_std_n=config.noise_std_n,
            seed=config.seed,
            crust_regions=config.crust_regions,
        )
    except MissionError:
        raise
    except Exception as exc:
        raise MissionError(f"stage scouting: {exc}") from exc
    artifacts = _build_artifacts(config, steps)
    if out_dir is not None:
        write_artifacts(artifacts, Path(out_dir))
    return artifacts


def replay(step_log_csv: str, config: MissionConfig, out_dir: str | Path | None = None) -> MissionArtifacts:
    """Re-derive all downstream artifacts from a recorded step log."""
    try:
        steps = steps_from_csv(step_log_csv)
    except Exception as exc:
        raise MissionError(f"stage replay-parse: {exc}") from exc
    artifacts = _build_artifacts(config, steps)
    if out_dir is not None:
        write_artifacts(artifacts, Path(out_dir))
    return artifacts


def write_artifacts(artifacts: MissionArtifacts, out_dir: Path) -> None:
    """Artifact tree: maps/, risk/, plan/, log.csv, summary.json."""
    out_dir = Path(out_dir)
    maps_dir = out_dir / "maps"
    risk_dir = out_dir / "risk"
    plan_dir = out_dir / "plan"
    for d in (maps_dir, risk_dir, plan_dir):
        d.mkdir(parents=True, exist_ok=True)
    (out_dir / "log.csv").write_text(steps_to_csv(list(artifacts.steps)), encoding="utf-8")
    tm = artifacts.terrain_map
    for name, raster in (("mean", tm.mean), ("variance", tm.variance), ("fitness", tm.fitness)):
        (maps_dir / f"{name}.csv").write_text(raster_to_csv(raster), encoding="utf-8")
        (maps_dir / f"{name}.bin").write_bytes(raster_to_binary(raster))
    for key, risk_map in sorted(artifacts.risk_maps.items()):
        (risk_dir / f"{key}_score.csv").write_text(raster_to_csv(risk_map.score), encoding="utf-8")
        (risk_dir / f"{key}_hazard.csv").write_text(
            raster_to_csv(risk_map.hazard_raster()), encoding="utf-8"
        )
        for layer_name, layer in sorted(risk_map.layers.items()):
            (risk_dir / f"{key}_{layer_name}.csv").write_text(
                raster_to_csv(layer), encoding="utf-8"
            )
    (plan_dir / "obstacles.txt").write_text(
        planner_mod.obstacles_to_text(artifacts.obstacles), encoding="utf-8"
    )
    if artifacts.trajectory is not None:
        (plan_dir / "trajectory.csv").write_text(
            planner_mod.trajectory_to_csv(artifacts.trajectory), encoding="utf-8"
        )
    if artifacts.naive_trajectory is not None:
        (plan_dir / "naive_trajectory.csv").write_text(
            planner_mod.trajectory_to_csv(artifacts.naive_trajectory), encoding="utf-8"
        )
    (out_dir / "summary.json").write_text(
        json.dumps(artifacts.summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def whitesands_field() -> ResistanceField:
    """Synthetic dune-transect stand-in: firm background with one soft blob.

    There is no published per-cell ground truth for the dune transect, so
    this field is generated: 10 m x 15 m at 0.5 m cells, 4.0 N/cm^3
    background, and an elliptical soft pocket (0.15 N/cm^3) mid-field.
    """
    spec = GridSpec(origin_x=0.0, origin_y=0.0, cell_size=0.5, width=20, height=30)
    xs, ys = spec.cell_centers()
    values = np.full((spec.height, spec.width), 4.0)
    r2 = ((xs - 5.0) / 2.0) ** 2 + ((ys - 7.5) / 1.8) ** 2
    values[r2 <= 1.0] = 0.15
    return ResistanceField(Raster(spec, values))


def preset_config(name: str, seed: int = 0, **overrides) -> MissionConfig:
    """Shipped mission presets: "ames" and "whitesands"."""
    if name not in PRESETS:
        raise MissionError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    config = PRESETS[name]()
    if seed:
        config = replace(config, seed=seed)
    if overrides:
        config = replace(config, **overrides)
    return config


def _ames_preset() -> MissionConfig:
    field_gt = ames_testbed_field()
    plan = ScoutPlan(
        x_min=0.2,
        y_min=0.25,
        x_max=3.8,
        y_max=5.75,
        lane_spacing_m=0.5,
        step_length_m=0.2,
    )
    return MissionConfig(
        name="ames",
        ground_truth=field_gt,
        scout_plan=plan,
        map_grid=GridSpec(origin_x=0.0, origin_y=0.0, cell_size=0.5, width=8, height=12),
        rhex_payloads_kg=(40.0, 60.0, 80.0, 100.0),
        planning_platform="rhex_60kg",
        goals=(),
        start=(0.5, 0.5),
    )


def _whitesands_preset() -> MissionConfig:
    field_gt = whitesands_field()
    plan = ScoutPlan(
        x_min=0.25,
        y_min=0.25,
        x_max=9.75,
        y_max=14.5,
        lane_spacing_m=0.75,
        step_length_m=0.5,
    )
    crust = CrustRegion(
        x_min=6.5, y_min=11.5, x_max=8.5, y_max=13.5, crust=CrustSpec(12.0, 0.5, 1.5)
    )
    return MissionConfig(
        name="whitesands",
        ground_truth=field_gt,
        scout_plan=plan,
        map_grid=GridSpec(origin_x=0.0, origin_y=0.0, cell_size=0.5, width=20, height=30),
        wheel_params=wheel_mod.WheelParams(
            radius_m=0.15, width_m=0.10, mass_kg=25.0, torque_limit_nm=9.0
        ),
        planning_platform="wheel",
        start=(2.5, 1.5),
        goals=((8.4, 8.6), (3.2, 12.5)),
        crust_regions=(crust,),
    )


PRESETS = {"ames": _ames_preset, "whitesands": _whitesands_preset}
