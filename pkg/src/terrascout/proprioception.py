"""Penetration-resistance estimation from force-depth traces.

A trace's penetration phase is fit to the through-origin granular law
f = A * alpha_z * z by least squares, giving the resistance estimate and
an R^2 fitness score.  The regression has no intercept because the
physical model has none; contact re-zeroing absorbs depth offsets
instead, so an intercept would only soak up contact-detection error and
bias the slope.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .terrain import ForceDepthTrace

__all__ = [
    "ResistanceEstimate",
    "StepMeasurement",
    "GroundPlane",
    "EstimationError",
    "extract_penetration_phase",
    "fit_resistance",
    "estimate_ground_plane",
    "depth_normal_to_plane",
    "steps_to_csv",
    "steps_from_csv",
]

DEFAULT_CONTACT_THRESHOLD_N = 0.5


class EstimationError(ValueError):
    """Trace unusable for estimation (no contact, singular fit, bad geometry)."""


@dataclass(frozen=True)
class ResistanceEstimate:
    """Fitted penetration resistance (N/cm^3) with fit quality."""

    alpha_z: float
    r_squared: float
    n_samples: int

    def __post_init__(self):
        if self.alpha_z < 0:
            raise EstimationError("alpha_z must be non-negative")
        if not 0.0 <= self.r_squared <= 1.0:
            raise EstimationError("r_squared must lie in [0, 1]")
        if self.n_samples < 2:
            raise EstimationError("an estimate needs at least 2 samples")


@dataclass(frozen=True)
class StepMeasurement:
    """One scout footstep: world position (m), estimate, timestamp (s)."""

    x: float
    y: float
    estimate: ResistanceEstimate
    time_s: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise EstimationError("step position must be finite")


@dataclass(frozen=True)
class GroundPlane:
    """Local ground plane: a point on it (m) and an upward unit normal."""

    point: tuple[float, float, float]
    normal: tuple[float, float, float]

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise EstimationError("plane normal must have unit magnitude")
        if n[2] <= 0:
            raise EstimationError("plane normal must point upward (positive z)")


def extract_penetration_phase(
    trace: ForceDepthTrace,
    contact_threshold_n: float = DEFAULT_CONTACT_THRESHOLD_N,
) -> ForceDepthTrace:
    """Isolate the penetration phase of a trace.

    Returns the longest contiguous run of samples with force at or above
    the contact threshold and strictly increasing depth, re-zeroed so the
    run starts at depth 0.  This drops free-fall samples before contact
    and any retraction tail.  Ties go to the earliest run.
    """
    if contact_threshold_n < 0:
        raise EstimationError("contact threshold must be non-negative")
    z = trace.depths_cm
    f = trace.forces_n
    n = len(z)
    above = f >= contact_threshold_n
    if not np.any(above):
        raise EstimationError(
            f"no sample reaches the contact threshold {contact_threshold_n} N"
        )
    runs: list[tuple[int, int]] = []  # (start, stop) half-open
    start: int | None = None
    for i in range(n):
        if not above[i]:
            if start is not None:
                runs.append((start, i))
                start = None
        elif start is None:
            start = i
        elif z[i] <= z[i - 1]:
            # depth reversal breaks the run; this sample may start a new one
            runs.append((start, i))
            start = i
    if start is not None:
        runs.append((start, n))
    lo, hi = max(runs, key=lambda r: r[1] - r[0])  # max() keeps the earliest tie
    if hi - lo < 2:
        raise EstimationError("penetration phase has fewer than 2 samples")
    return ForceDepthTrace(
        z[lo:hi] - z[lo], f[lo:hi], probe=trace.probe, world_position=trace.world_position
    )


def fit_resistance(segment: ForceDepthTrace, area_cm2: float | None = None) -> ResistanceEstimate:
    """Least-squares fit of f = A * alpha_z * z over a penetration segment.

    The closed-form minimizer of sum (A*alpha*z_i - f_i)^2 is
    alpha = sum(z_i f_i) / (A * sum(z_i^2)).  R^2 is computed against the
    mean-force baseline and clamped to [0, 1]; for a through-origin fit
    it can go negative, but the score is only used as an ordinal fitness
    heuristic, so the clamp is harmless.
    """
    if area_cm2 is None:
        area_cm2 = segment.probe.area_cm2
    if area_cm2 <= 0:
        raise EstimationError("probe area must be positive")
    z = segment.depths_cm
    f = segment.forces_n
    if len(z) < 2:
        raise EstimationError("need at least 2 samples to fit")
    sum_z2 = float(np.dot(z, z))
    if sum_z2 == 0.0:
        raise EstimationError("all depths are zero; fit is singular")
    alpha = float(np.dot(z, f)) / (area_cm2 * sum_z2)
    alpha = max(alpha, 0.0)
    residuals = f - area_cm2 * alpha * z
    ss_res = float(np.dot(residuals, residuals))
    ss_tot = float(np.sum((f - f.mean()) ** 2))
    if ss_tot == 0.0:
        # constant forces: perfect only if the fit is exact (e.g. all zero)
        r2 = 1.0 if ss_res <= 1e-12 * max(1.0, float(np.dot(f, f))) else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    r2 = min(max(r2, 0.0), 1.0)
    return ResistanceEstimate(alpha_z=alpha, r_squared=r2, n_samples=len(z))


def estimate_ground_plane(points_m: np.ndarray) -> GroundPlane:
    """Least-squares plane through >= 3 non-collinear support-toe positions.

    Fits z = a + b*x + c*y, so the normal always has a positive z
    component (near-vertical walls are not meaningful ground planes
    for a walking robot).
    """
    pts = np.asarray(points_m, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise EstimationError("expected an (n, 3) array of toe positions")
    if pts.shape[0] < 3:
        raise EstimationError("need at least 3 support-toe positions")
    design = np.column_stack([np.ones(pts.shape[0]), pts[:, 0], pts[:, 1]])
    coeffs, _, rank, _ = np.linalg.lstsq(design, pts[:, 2], rcond=None)
    if rank < 3:
        raise EstimationError("support toes are collinear; plane is underdetermined")
    a, b, c = coeffs
    normal = np.array([-b, -c, 1.0])
    normal /= np.linalg.norm(normal)
    centroid = pts.mean(axis=0)
    point = (float(centroid[0]), float(centroid[1]), float(a + b * centroid[0] + c * centroid[1]))
    return GroundPlane(point=point, normal=tuple(normal))


def depth_normal_to_plane(toe_point_m: np.ndarray, plane: GroundPlane) -> float:
    """Signed toe depth normal to the ground plane, in cm; positive below."""
    toe = np.asarray(toe_point_m, dtype=float)
    n = np.asarray(plane.normal)
    depth_m = float(np.dot(np.asarray(plane.point) - toe, n))
    return depth_m * 100.0


_STEP_LOG_FIELDS = ("time_s", "x_m", "y_m", "alpha_z_Ncm3", "r_squared", "n_samples")


def steps_to_csv(steps: list[StepMeasurement]) -> str:
    """Step log: one CSV row per footstep, in emission order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_STEP_LOG_FIELDS)
    for s in steps:
        writer.writerow(
            [
                repr(float(s.time_s)),
                repr(float(s.x)),
                repr(float(s.y)),
                repr(float(s.estimate.alpha_z)),
                repr(float(s.estimate.r_squared)),
                s.estimate.n_samples,
            ]
        )
    return buf.getvalue()


def steps_from_csv(text: str) -> list[StepMeasurement]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EstimationError("empty step log") from None
    if tuple(h.strip() for h in header) != _STEP_LOG_FIELDS:
        raise EstimationError(f"unexpected step-log header {header!r}")
    steps = []
    for i, row in enumerate(reader):
        if not row:
            continue
        if len(row) != len(_STEP_LOG_FIELDS):
            raise EstimationError(f"step-log row {i + 2} has {len(row)} fields")
        try:
            t, x, y, alpha, r2 = (float(v) for v in row[:5])
            n = int(row[5])
        except ValueError as exc:
            raise EstimationError(f"malformed step-log row {i + 2}: {row!r}") from exc
        steps.append(
            StepMeasurement(
                x=x,
                y=y,
                estimate=ResistanceEstimate(alpha_z=alpha, r_squared=r2, n_samples=n),
                time_s=t,
            )
        )
    return steps
