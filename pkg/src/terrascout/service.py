"""HTTP mission service: live step stream, map fetches, targets, planning.

One background thread per session advances the simulated mission
(single writer); any number of HTTP readers observe it through
versioned immutable snapshots, so a reader never sees a half-updated
map.  Step events stream over a server-sent-events channel and are
replayed from the start for late subscribers, exactly once each, in
emission order.

Endpoints:
    POST /sessions                         create a session (preset, seed, throttle)
    GET  /sessions/{id}/state              session summary
    GET  /sessions/{id}/map/{layer}        mean | variance | fitness | risk
    GET  /sessions/{id}/events             SSE stream of steps and map bumps
    POST /sessions/{id}/targets            add a science target (rejected in hazard)
    POST /sessions/{id}/plan               plan through the posted targets
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from . import planner as planner_mod
from .grids import Raster, raster_to_binary
from .mapping import TerrainMap, TerrainMapper
from .mission import MissionConfig, _planning_risk, _risk_maps, generate_scout_steps, preset_config
from .risk import RiskMap

__all__ = ["create_app", "MissionSession"]

MAP_LAYERS = ("mean", "variance", "fitness", "risk")
_SNAPSHOT_RING = 8


class SessionRequest(BaseModel):
    preset: str = "ames"
    seed: int = 0
    steps_per_second: float = 0.0  # 0 = run as fast as possible


class TargetRequest(BaseModel):
    x: float
    y: float


@dataclass
class _Snapshot:
    version: int
    terrain: TerrainMap


@dataclass
class MissionSession:
    """Mutable mission state owned by one writer thread."""

    session_id: str
    config: MissionConfig
    steps_per_second: float = 0.0
    status: str = "running"  # running | done | failed
    error: str = ""
    events: list[dict] = field(default_factory=list)
    snapshots: dict[int, _Snapshot] = field(default_factory=dict)
    latest_version: int = 0
    steps_emitted: int = 0
    targets: list[tuple[float, float]] = field(default_factory=list)
    trajectory: planner_mod.Trajectory | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)
    wakeup: threading.Condition = field(default=None)
    _risk_cache: dict[int, RiskMap] = field(default_factory=dict)

    def __post_init__(self):
        self.wakeup = threading.Condition(self.lock)

    # -- writer side ---------------------------------------------------

    def run(self) -> None:
        try:
            steps = generate_scout_steps(
                self.config.scout_plan,
                self.config.ground_truth,
                noise_std_n=self.config.noise_std_n,
                seed=self.config.seed,
                crust_regions=self.config.crust_regions,
            )
            mapper = TerrainMapper(self.config.kernel)
            delay = 1.0 / self.steps_per_second if self.steps_per_second > 0 else 0.0
            for index, step in enumerate(steps):
                if delay:
                    time.sleep(delay)
                mapper.ingest([step])
                terrain = mapper.rasterize(self.config.map_grid)
                with self.lock:
                    self.latest_version += 1
                    version = self.latest_version
                    self.snapshots[version] = _Snapshot(version=version, terrain=terrain)
                    stale = [
                        v for v in self.snapshots if v <= version - _SNAPSHOT_RING and v != version
                    ]
                    for v in stale:
                        self.snapshots.pop(v, None)
                        self._risk_cache.pop(v, None)
                    self.steps_emitted += 1
                    self.events.append(
                        {
                            "id": len(self.events),
                            "event": "step",
                            "data": {
                                "index": index,
                                "time_s": step.time_s,
                                "x": step.x,
                                "y": step.y,
                                "alpha_z": step.estimate.alpha_z,
                                "r_squared": step.estimate.r_squared,
                                "n_samples": step.estimate.n_samples,
                            },
                        }
                    )
                    self.events.append(
                        {"id": len(self.events), "event": "map", "data": {"version": version}}
                    )
                    self.wakeup.notify_all()
            with self.lock:
                self.status = "done"
                self.wakeup.notify_all()
        except Exception as exc:  # surface the failure to readers
            with self.lock:
                self.status = "failed"
                self.error = str(exc)
                self.wakeup.notify_all()

    # -- reader side ---------------------------------------------------

    def snapshot(self, version: int | None = None) -> _Snapshot:
        with self.lock:
            if self.latest_version == 0:
                raise HTTPException(status_code=409, detail="no map yet; scouting in progress")
            v = self.latest_version if version is None else version
            snap = self.snapshots.get(v)
            if snap is None:
                raise HTTPException(status_code=409, detail=f"map version {v} no longer held")
            return snap

    def risk_for(self, snap: _Snapshot) -> RiskMap:
        with self.lock:
            cached = self._risk_cache.get(snap.version)
        if cached is not None:
            return cached
        risk = _planning_risk(self.config, _risk_maps(self.config, snap.terrain.mean))
        with self.lock:
            self._risk_cache[snap.version] = risk
        return risk

    def obstacles_for(self, snap: _Snapshot) -> planner_mod.ObstacleSet:
        risk = self.risk_for(snap)
        return planner_mod.threshold_obstacles(risk.score, self.config.risk_threshold)


def _raster_payload(raster: Raster, version: int, layer: str) -> dict:
    spec = raster.spec
    return {
        "version": version,
        "layer": layer,
        "origin_x": spec.origin_x,
        "origin_y": spec.origin_y,
        "cell_size": spec.cell_size,
        "width": spec.width,
        "height": spec.height,
        "values": raster.values.tolist(),
    }


def create_app() -> FastAPI:
    app = FastAPI(title="terrascout mission service")
    sessions: dict[str, MissionSession] = {}
    counter = {"next": 1}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> MissionSession:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    @app.post("/sessions", status_code=201)
    def start_session(request: SessionRequest):
        try:
            config = preset_config(request.preset, seed=request.seed)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        with registry_lock:
            session_id = f"s{counter['next']:04d}"
            counter["next"] += 1
        session = MissionSession(
            session_id=session_id, config=config, steps_per_second=request.steps_per_second
        )
        sessions[session_id] = session
        thread = threading.Thread(target=session.run, name=f"mission-{session_id}", daemon=True)
        thread.start()
        return {"session_id": session_id, "preset": request.preset, "seed": request.seed}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            extent = session.config.map_grid.extent
            return {
                "session_id": session.session_id,
                "preset": session.config.name,
                "status": session.status,
                "error": session.error,
                "steps_emitted": session.steps_emitted,
                "map_version": session.latest_version,
                "targets": [list(t) for t in session.targets],
                "trajectory_available": session.trajectory is not None,
                "bounds": {
                    "x_min": extent[0],
                    "y_min": extent[1],
                    "x_max": extent[2],
                    "y_max": extent[3],
                },
            }

    @app.get("/sessions/{session_id}/map/{layer}")
    def get_map(session_id: str, layer: str, version: int | None = None, format: str = "json"):
        session = get_session(session_id)
        if layer not in MAP_LAYERS:
            raise HTTPException(status_code=404, detail=f"unknown layer {layer!r}")
        snap = session.snapshot(version)
        if layer == "risk":
            raster = session.risk_for(snap).score
        else:
            raster = getattr(snap.terrain, layer)
        if format == "binary":
            return Response(
                content=raster_to_binary(raster),
                media_type="application/octet-stream",
                headers={"X-Map-Version": str(snap.version), "X-Map-Layer": layer},
            )
        return _raster_payload(raster, snap.version, layer)

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str):
        session = get_session(session_id)

        def generate():
            cursor = 0
            while True:
                with session.lock:
                    while cursor >= len(session.events) and session.status == "running":
                        session.wakeup.wait(timeout=0.5)
                    batch = session.events[cursor:]
                    status = session.status
                cursor += len(batch)
                for event in batch:
                    yield (
                        f"id: {event['id']}\n"
                        f"event: {event['event']}\n"
                        f"data: {json.dumps(event['data'], sort_keys=True)}\n\n"
                    )
                if status != "running" and not batch:
                    yield f"event: end\ndata: {json.dumps({'status': status})}\n\n"
                    return

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.post("/sessions/{session_id}/targets")
    def post_target(session_id: str, request: TargetRequest):
        session = get_session(session_id)
        if not session.config.map_grid.contains(request.x, request.y):
            raise HTTPException(status_code=409, detail="target outside map bounds")
        snap = session.snapshot()
        obstacles = session.obstacles_for(snap)
        for vertices in obstacles.polygons:
            if planner_mod.point_in_polygon((request.x, request.y), vertices):
                raise HTTPException(
                    status_code=409,
                    detail="target rejected: position lies inside a hazard region",
                )
        with session.lock:
            session.targets.append((request.x, request.y))
            targets = [list(t) for t in session.targets]
        return {"targets": targets, "map_version": snap.version}

    @app.post("/sessions/{session_id}/plan")
    def request_plan(session_id: str):
        session = get_session(session_id)
        with session.lock:
            targets = list(session.targets)
        if not targets:
            raise HTTPException(status_code=409, detail="no targets posted")
        snap = session.snapshot()
        obstacles = session.obstacles_for(snap)
        trajectory = planner_mod.simulate_path(
            session.config.start, targets, obstacles, session.config.planner_config
        )
        with session.lock:
            session.trajectory = trajectory
        return {
            "map_version": snap.version,
            "termination": trajectory.termination,
            "arrivals": list(trajectory.arrivals),
            "duration_s": trajectory.duration_s,
            "times": trajectory.times.tolist(),
            "positions": trajectory.positions.tolist(),
            "velocities": trajectory.velocities.tolist(),
            "active_goal": trajectory.active_goal.tolist(),
            "obstacles": [p.tolist() for p in obstacles.polygons],
        }

    app.state.sessions = sessions
    return app
