"""Potential-field path planning around polygonal hazard regions.

Risk rasters are thresholded and contoured (marching squares) into
polygonal obstacles.  Each obstacle contributes a repulsive acceleration
k_rep / D^2 directed from its closest boundary point toward the rover,
the active goal contributes an attraction k_att * (goal - p), and the
clamped sum drives a point-mass rover with bounded speed and
acceleration under explicit Euler integration.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from skimage import measure

from .grids import Raster

__all__ = [
    "ObstacleSet",
    "PlannerConfig",
    "Trajectory",
    "PlannerError",
    "threshold_obstacles",
    "distance_to_obstacle",
    "net_force",
    "simulate_path",
    "naive_rollout",
    "point_in_polygon",
    "points_in_polygon",
    "trajectory_intersects",
    "min_obstacle_clearance",
    "trajectory_to_csv",
    "obstacles_to_text",
    "obstacles_from_text",
]


class PlannerError(ValueError):
    """Invalid planner input (bad polygons, start inside an obstacle, ...)."""


def _signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _validate_polygon(vertices: np.ndarray) -> np.ndarray:
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2 or vertices.shape[0] < 3:
        raise PlannerError("a polygon needs at least 3 (x, y) vertices")
    if np.allclose(vertices[0], vertices[-1]):
        vertices = vertices[:-1]
    if vertices.shape[0] < 3:
        raise PlannerError("a polygon needs at least 3 distinct vertices")
    if _signed_area(vertices) < 0:
        vertices = vertices[::-1].copy()
    n = vertices.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(
                vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]
            ):
                raise PlannerError("polygon is self-intersecting")
    return vertices


@dataclass(frozen=True)
class ObstacleSet:
    """Simple counter-clockwise polygons (m) cut from a risk raster."""

    polygons: tuple[np.ndarray, ...]
    source_threshold: float = math.nan

    def __post_init__(self):
        object.__setattr__(
            self, "polygons", tuple(_validate_polygon(p) for p in self.polygons)
        )

    def __len__(self) -> int:
        return len(self.polygons)


@dataclass(frozen=True)
class PlannerConfig:
    """Gains, motion limits, and termination settings for the planner."""

    k_rep: float = 0.1
    k_att: float = 1.0
    v_max: float = 1.0
    a_max: float = 1.0
    dt: float = 0.01
    goal_radius: float = 0.25
    d_floor: float = 0.05
    max_steps: int = 200_000
    stagnation_window_s: float = 5.0
    stagnation_speed: float = 0.01

    def __post_init__(self):
        for name in (
            "k_rep",
            "k_att",
            "v_max",
            "a_max",
            "dt",
            "goal_radius",
            "d_floor",
            "max_steps",
            "stagnation_window_s",
            "stagnation_speed",
        ):
            if getattr(self, name) <= 0:
                raise PlannerError(f"{name} must be positive")


def _simplify_ring(vertices: np.ndarray, tolerance: float) -> np.ndarray:
    """Douglas-Peucker on a closed ring, anchored at the first vertex."""
    if tolerance <= 0 or vertices.shape[0] <= 3:
        return vertices
    closed = np.vstack([vertices, vertices[:1]])
    keep = np.zeros(closed.shape[0], dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, closed.shape[0] - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        a, b = closed[lo], closed[hi]
        chord = b - a
        length = np.hypot(*chord)
        pts = closed[lo + 1 : hi]
        if length == 0.0:
            dists = np.hypot(*(pts - a).T)
        else:
            dists = np.abs(np.cross(chord, pts - a)) / length
        worst = int(np.argmax(dists))
        if dists[worst] > tolerance:
            mid = lo + 1 + worst
            keep[mid] = True
            stack.append((lo, mid))
            stack.append((mid, hi))
    out = closed[keep][:-1]
    return out if out.shape[0] >= 3 else vertices


def threshold_obstacles(risk: Raster, threshold: float) -> ObstacleSet:
    """Contour the super-threshold region of a risk raster into polygons.

    Marching squares runs on the binary mask (padded so border hazards
    close), vertices map to world coordinates, and rings are simplified
    with a tolerance of half a cell.  Hazard cell centers end up inside a
    polygon and safe centers outside.  Rings nested inside another ring
    (holes in a hazard region) are dropped: the enclosed pocket is
    treated as hazardous too, which is the conservative call.
    """
    if not np.isfinite(threshold):
        raise PlannerError("threshold must be finite")
    mask = (risk.values >= threshold).astype(float)
    if not mask.any():
        return ObstacleSet(polygons=(), source_threshold=threshold)
    padded = np.pad(mask, 1)
    spec = risk.spec
    contours = measure.find_contours(padded, 0.5)
    rings = []
    for contour in contours:
        ring = contour[:-1] if np.allclose(contour[0], contour[-1]) else contour
        world = np.column_stack(
            [
                spec.origin_x + (ring[:, 1] - 0.5) * spec.cell_size,
                spec.origin_y + (ring[:, 0] - 0.5) * spec.cell_size,
            ]
        )
        rings.append(_simplify_ring(world, 0.5 * spec.cell_size))
    # drop rings whose representative vertex lies inside another ring
    keep = []
    for i, ring in enumerate(rings):
        inside_other = any(
            j != i and point_in_polygon(ring[0], other) for j, other in enumerate(rings)
        )
        if not inside_other:
            keep.append(ring)
    return ObstacleSet(polygons=tuple(keep), source_threshold=threshold)


def points_in_polygon(points, vertices: np.ndarray) -> np.ndarray:
    """Vectorized even-odd ray cast; boundary points count as outside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    x1, y1 = vertices[:, 0][None, :], vertices[:, 1][None, :]
    rolled = np.roll(vertices, -1, axis=0)
    x2, y2 = rolled[:, 0][None, :], rolled[:, 1][None, :]
    straddles = (y1 > y) != (y2 > y)
    denom = np.where(y2 - y1 == 0.0, 1.0, y2 - y1)
    x_cross = x1 + (y - y1) * (x2 - x1) / denom
    crossings = np.sum(straddles & (x < x_cross), axis=1)
    return (crossings % 2).astype(bool)


def point_in_polygon(point, vertices: np.ndarray) -> bool:
    return bool(points_in_polygon(np.asarray(point, dtype=float)[None, :], vertices)[0])


def _closest_boundary_point(point: np.ndarray, vertices: np.ndarray):
    """Distance and closest point over all edges of one polygon."""
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    ab = b - a
    ap = point - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.divide(np.einsum("ij,ij->i", ap, ab), np.where(denom == 0, 1.0, denom)), 0, 1)
    proj = a + t[:, None] * ab
    d2 = np.einsum("ij,ij->i", point - proj, point - proj)
    best = int(np.argmin(d2))
    return math.sqrt(float(d2[best])), proj[best], best


def _repulsion_direction(point, vertices, d_floor):
    """(effective distance, unit vector away from the polygon) for one polygon."""
    p = np.asarray(point, dtype=float)
    d, q, edge = _closest_boundary_point(p, vertices)
    inside = point_in_polygon(p, vertices)
    delta = q - p if inside else p - q
    norm = np.hypot(*delta)
    if norm < 1e-12:
        # point sits on the boundary: push along the edge's outward normal
        a = vertices[edge]
        b = vertices[(edge + 1) % vertices.shape[0]]
        tangent = b - a
        normal = np.array([tangent[1], -tangent[0]])
        n_hat = normal / np.hypot(*normal)
    else:
        n_hat = delta / norm
    d_eff = d_floor if inside else max(d, d_floor)
    return d, d_eff, n_hat, inside


def distance_to_obstacle(point, obstacles: ObstacleSet, d_floor: float = 0.05):
    """Minimum boundary distance over the set, with the away-direction.

    Returns (D, n_hat, inside).  Outside, D is the raw distance to the
    closest polygon boundary; inside a polygon, D clamps to d_floor and
    n_hat points outward.  Ties go to the lowest polygon index; an empty
    set reports infinite distance and no direction.
    """
    if len(obstacles) == 0:
        return math.inf, np.zeros(2), False
    best = None
    for vertices in obstacles.polygons:
        d, d_eff, n_hat, inside = _repulsion_direction(point, vertices, d_floor)
        key = -1.0 if inside else d  # inside always wins over outside
        if best is None or key < best[0]:  # strict: ties keep the lowest index
            best = (key, d, d_eff, n_hat, inside)
    _, d, d_eff, n_hat, inside = best
    return (d_eff if inside else d), n_hat, inside


def net_force(point, goal, obstacles: ObstacleSet, config: PlannerConfig = PlannerConfig()):
    """Attraction to the goal plus per-polygon inverse-square repulsion.

    The sum is clamped so its magnitude never exceeds a_max.
    """
    p = np.asarray(point, dtype=float)
    force = config.k_att * (np.asarray(goal, dtype=float) - p)
    for vertices in obstacles.polygons:
        _, d_eff, n_hat, _ = _repulsion_direction(p, vertices, config.d_floor)
        force = force + config.k_rep / (d_eff * d_eff) * n_hat
    magnitude = np.hypot(*force)
    if magnitude > config.a_max:
        force = force * (config.a_max / magnitude)
    return force


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped states with per-goal arrival flags and a termination reason."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    active_goal: np.ndarray  # goal index being chased at each state
    arrivals: tuple[bool, ...]
    termination: str  # "arrived" | "max_steps" | "stuck"

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def duration_s(self) -> float:
        return float(self.times[-1]) if len(self) else 0.0


def _run_point_mass(start, goals, obstacles, config) -> Trajectory:
    p = np.asarray(start, dtype=float).copy()
    v = np.zeros(2)
    goals = [np.asarray(g, dtype=float) for g in goals]
    times = [0.0]
    positions = [p.copy()]
    velocities = [v.copy()]
    active = [0]
    arrivals = [False] * len(goals)
    goal_idx = 0
    while goal_idx < len(goals) and np.hypot(*(p - goals[goal_idx])) <= config.goal_radius:
        arrivals[goal_idx] = True
        goal_idx += 1
    if goal_idx >= len(goals):
        return Trajectory(
            times=np.array(times),
            positions=np.array(positions),
            velocities=np.array(velocities),
            active_goal=np.array(active),
            arrivals=tuple(arrivals),
            termination="arrived",
        )
    window = max(1, int(round(config.stagnation_window_s / config.dt)))
    recent = deque(maxlen=window)
    recent_sum = 0.0
    termination = "max_steps"
    for step in range(1, config.max_steps + 1):
        force = net_force(p, goals[goal_idx], obstacles, config)
        v = v + force * config.dt
        speed = np.hypot(*v)
        if speed > config.v_max:
            v = v * (config.v_max / speed)
            speed = config.v_max
        p = p + v * config.dt
        times.append(step * config.dt)
        positions.append(p.copy())
        velocities.append(v.copy())
        active.append(goal_idx)
        while goal_idx < len(goals) and np.hypot(*(p - goals[goal_idx])) <= config.goal_radius:
            arrivals[goal_idx] = True
            goal_idx += 1
        if goal_idx >= len(goals):
            termination = "arrived"
            break
        if len(recent) == window:
            recent_sum -= recent[0]
        recent.append(float(speed))
        recent_sum += float(speed)
        if len(recent) == window and recent_sum / window < config.stagnation_speed:
            termination = "stuck"
            break
    return Trajectory(
        times=np.array(times),
        positions=np.array(positions),
        velocities=np.array(velocities),
        active_goal=np.array(active),
        arrivals=tuple(arrivals),
        termination=termination,
    )


def simulate_path(
    start,
    goals,
    obstacles: ObstacleSet,
    config: PlannerConfig = PlannerConfig(),
) -> Trajectory:
    """Drive the point-mass rover through the goal sequence, one goal at a time.

    Explicit Euler at dt: acceleration from net_force, velocity clamped to
    v_max, then the position update.  Terminates on final-goal arrival,
    the step budget, or stagnation (mean speed over the stagnation window
    below the threshold, the local-minimum trap signature).
    """
    if not len(list(goals)):
        raise PlannerError("need at least one goal")
    for vertices in obstacles.polygons:
        if point_in_polygon(start, vertices):
            raise PlannerError("start position lies inside an obstacle")
    return _run_point_mass(start, goals, obstacles, config)


def naive_rollout(start, goals, config: PlannerConfig = PlannerConfig()) -> Trajectory:
    """Risk-blind baseline: the same point mass with no repulsion anywhere."""
    if not len(list(goals)):
        raise PlannerError("need at least one goal")
    return _run_point_mass(start, goals, ObstacleSet(polygons=()), config)


def trajectory_intersects(trajectory: Trajectory, obstacles: ObstacleSet) -> bool:
    """True if any trajectory state lies inside any obstacle polygon."""
    for vertices in obstacles.polygons:
        if points_in_polygon(trajectory.positions, vertices).any():
            return True
    return False


def min_obstacle_clearance(trajectory: Trajectory, obstacles: ObstacleSet) -> float:
    """Smallest boundary distance over all states; -1.0 if any state is inside."""
    if len(obstacles) == 0:
        return math.inf
    best = math.inf
    for vertices in obstacles.polygons:
        a = vertices
        b = np.roll(vertices, -1, axis=0)
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        pts = trajectory.positions[:, None, :]
        ap = pts - a[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", ap, ab) / np.where(denom == 0, 1.0, denom), 0, 1)
        proj = a[None, :, :] + t[..., None] * ab[None, :, :]
        d = np.sqrt(np.min(np.einsum("pij,pij->pi", pts - proj, pts - proj), axis=1))
        d = np.where(points_in_polygon(trajectory.positions, vertices), -1.0, d)
        best = min(best, float(d.min()))
    return best


def trajectory_to_csv(trajectory: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "x", "y", "vx", "vy", "active_goal_index"])
    for t, p, v, g in zip(
        trajectory.times, trajectory.positions, trajectory.velocities, trajectory.active_goal
    ):
        writer.writerow([repr(float(t)), repr(float(p[0])), repr(float(p[1])),
                         repr(float(v[0])), repr(float(v[1])), int(g)])
    return buf.getvalue()


def obstacles_to_text(obstacles: ObstacleSet) -> str:
    """Vertex-list export: one 'x,y' line per vertex, blank line between polygons."""
    blocks = []
    for vertices in obstacles.polygons:
        blocks.append("\n".join(f"{v[0]!r},{v[1]!r}" for v in vertices))
    header = f"# obstacle polygons: {len(obstacles)} threshold={obstacles.source_threshold!r}\n"
    return header + "\n\n".join(blocks) + ("\n" if blocks else "")


def obstacles_from_text(text: str) -> ObstacleSet:
    lines = text.splitlines()
    threshold = math.nan
    if lines and lines[0].startswith("#"):
        for tok in lines[0].split():
            if tok.startswith("threshold="):
                threshold = float(tok.split("=", 1)[1])
        lines = lines[1:]
    polygons = []
    block: list[list[float]] = []
    for ln in lines:
        ln = ln.strip()
        if not ln:
            if block:
                polygons.append(np.array(block))
                block = []
            continue
        x, y = ln.split(",")
        block.append([float(x), float(y)])
    if block:
        polygons.append(np.array(block))
    return ObstacleSet(polygons=tuple(polygons), source_threshold=threshold)
