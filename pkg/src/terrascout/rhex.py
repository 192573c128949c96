"""Rotary-walking speed and immobilization risk for C-legged hexapod rovers.

On granular ground a C-leg sinks until the yield force balances the load
plus the elastic reaction of the sand, then rotates about the solidified
contact and propels the body.  The solidification depth is

    z = m (g + R w / dt) / (n_legs * alpha_z * R * W)

with alpha_z the penetration resistance per unit area, and the resulting
fore-aft body speed follows the circular hip trajectory,

    v = (2 R w / pi) * sqrt(1 - u^2),   u = z/R + h/R - 1

saturating at v_max = 2 R w / pi for shallow sinkage and dropping to
zero at the geometric limit z = 2R - h.  Deep sand (alpha_z below the
critical resistance) immobilizes the rover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grids import Raster
from .risk import RiskMap

__all__ = [
    "RhexParams",
    "RhexPrediction",
    "RhexError",
    "solidification_depth",
    "forward_speed",
    "slip_ratio",
    "critical_resistance",
    "calibrate_response_time",
    "predict_locomotion",
    "rhex_risk_map",
    "lab_params",
    "field_params",
]

N_PER_CM3_TO_SI = 1e6  # N/cm^3 -> N/m^3

DEFAULT_SLIP_HAZARD = 0.95

# Bench-validated critical resistance for the 0.4 kg prototype; the
# response-time calibration below reproduces it.
LAB_CRITICAL_RESISTANCE = 0.05  # N/cm^3


class RhexError(ValueError):
    """Invalid rover parameters or model inputs."""


@dataclass(frozen=True)
class RhexParams:
    """C-legged rover parameters (SI units throughout)."""

    mass_kg: float
    leg_radius_m: float
    leg_width_m: float
    n_support_legs: int
    hip_height_m: float
    leg_speed_rad_s: float
    response_time_s: float
    gravity_m_s2: float = 9.81

    def __post_init__(self):
        positive = {
            "mass_kg": self.mass_kg,
            "leg_radius_m": self.leg_radius_m,
            "leg_width_m": self.leg_width_m,
            "hip_height_m": self.hip_height_m,
            "leg_speed_rad_s": self.leg_speed_rad_s,
            "response_time_s": self.response_time_s,
            "gravity_m_s2": self.gravity_m_s2,
        }
        for name, value in positive.items():
            if value <= 0:
                raise RhexError(f"{name} must be positive, got {value}")
        if not 1 <= self.n_support_legs <= 6:
            raise RhexError("n_support_legs must be between 1 and 6")
        if self.hip_height_m >= 2 * self.leg_radius_m:
            raise RhexError("hip height must stay below the leg diameter")

    @property
    def v_max_m_s(self) -> float:
        return 2.0 * self.leg_radius_m * self.leg_speed_rad_s / math.pi


@dataclass(frozen=True)
class RhexPrediction:
    """Locomotion outcome on one terrain strength value."""

    sinkage_m: float
    speed_m_s: float
    slip: float
    immobilized: bool


def solidification_depth(params: RhexParams, alpha_z_ncm3) -> np.ndarray | float:
    """Leg sinkage (m) at which the sand stops yielding under the load."""
    alpha = np.asarray(alpha_z_ncm3, dtype=float)
    if np.any(alpha <= 0):
        raise RhexError("penetration resistance must be positive")
    alpha_si = alpha * N_PER_CM3_TO_SI
    p = params
    dynamic_load = p.gravity_m_s2 + p.leg_radius_m * p.leg_speed_rad_s / p.response_time_s
    z = p.mass_kg * dynamic_load / (p.n_support_legs * alpha_si * p.leg_radius_m * p.leg_width_m)
    return z if z.ndim else float(z)


def forward_speed(params: RhexParams, sinkage_m) -> np.ndarray | float:
    """Fore-aft speed (m/s) from the rotary-walking hip trajectory.

    The offset u = z/R + h/R - 1 is clamped below at 0: sinkage shallower
    than R - h leaves the hip above its rigid-rolling height and the gait
    simply runs at v_max, so speed is non-increasing in sinkage over the
    whole range.  At u >= 1 the hip reaches the ground and speed is zero.
    """
    z = np.asarray(sinkage_m, dtype=float)
    if np.any(z < 0):
        raise RhexError("sinkage must be non-negative")
    p = params
    u = z / p.leg_radius_m + p.hip_height_m / p.leg_radius_m - 1.0
    u = np.clip(u, 0.0, None)
    v = np.where(u >= 1.0, 0.0, p.v_max_m_s * np.sqrt(np.clip(1.0 - u * u, 0.0, None)))
    return v if v.ndim else float(v)


def slip_ratio(params: RhexParams, speed_m_s) -> np.ndarray | float:
    """Slip s = (v_max - v) / v_max, clamped to [0, 1].

    Normalizing by v_max rather than by v keeps the ratio finite at
    immobilization, so a "slip above 95%" hazard rule stays meaningful.
    """
    v = np.asarray(speed_m_s, dtype=float)
    if np.any(v < 0):
        raise RhexError("speed must be non-negative")
    s = np.clip((params.v_max_m_s - v) / params.v_max_m_s, 0.0, 1.0)
    return s if s.ndim else float(s)


def critical_resistance(params: RhexParams) -> float:
    """Resistance alpha_z* (N/cm^3) below which the rover cannot advance.

    Closed form from the immobilization condition z(alpha_z*) = 2R - h.
    """
    p = params
    immobilization_depth = 2.0 * p.leg_radius_m - p.hip_height_m
    if immobilization_depth <= 0:
        raise RhexError("hip height must stay below the leg diameter")
    dynamic_load = p.gravity_m_s2 + p.leg_radius_m * p.leg_speed_rad_s / p.response_time_s
    alpha_si = p.mass_kg * dynamic_load / (
        p.n_support_legs * p.leg_radius_m * p.leg_width_m * immobilization_depth
    )
    return alpha_si / N_PER_CM3_TO_SI


def calibrate_response_time(params: RhexParams, alpha_star_ncm3: float) -> RhexParams:
    """Solve the elastic response time so critical_resistance hits a target.

    One-dimensional inversion of the closed form; fails if the target sits
    at or below the static (w -> 0) limit, which no response time reaches.
    """
    p = params
    immobilization_depth = 2.0 * p.leg_radius_m - p.hip_height_m
    denom = p.n_support_legs * p.leg_radius_m * p.leg_width_m * immobilization_depth
    required_load = alpha_star_ncm3 * N_PER_CM3_TO_SI * denom / p.mass_kg
    excess = required_load - p.gravity_m_s2
    if excess <= 0:
        raise RhexError(
            f"target critical resistance {alpha_star_ncm3} N/cm^3 is at or below "
            "the static limit for these parameters"
        )
    dt = p.leg_radius_m * p.leg_speed_rad_s / excess
    return replace(params, response_time_s=dt)


def predict_locomotion(params: RhexParams, alpha_z_ncm3: float) -> RhexPrediction:
    """Full chain alpha_z -> sinkage -> speed -> slip for one strength value."""
    z = solidification_depth(params, alpha_z_ncm3)
    v = forward_speed(params, z)
    s = slip_ratio(params, v)
    return RhexPrediction(sinkage_m=z, speed_m_s=v, slip=s, immobilized=v == 0.0)


def rhex_risk_map(
    strength: Raster,
    params: RhexParams,
    slip_threshold: float = DEFAULT_SLIP_HAZARD,
) -> RiskMap:
    """Per-cell slip risk over a strength raster; hazard where slip exceeds it.

    Non-positive strength cells (possible in a posterior mean raster) are
    treated as zero-strength and marked immobilized.
    """
    alpha = np.maximum(strength.values, 1e-12)  # zero strength -> infinite sinkage
    z = solidification_depth(params, alpha)
    v = np.asarray(forward_speed(params, z))
    s = np.asarray(slip_ratio(params, v))
    spec = strength.spec
    return RiskMap(
        platform="rhex",
        score=Raster(spec, s / slip_threshold),
        hazard=s > slip_threshold,
        layers={"slip": Raster(spec, s), "speed": Raster(spec, np.asarray(v))},
        thresholds={"slip": slip_threshold},
    )


def lab_params() -> RhexParams:
    """The 0.4 kg bench prototype: 8 cm leg diameter, 1.1 cm leg width, 1 Hz gait.

    Hip height is fixed at half the leg radius and the response time is
    calibrated so the critical resistance lands on the bench-measured
    0.05 N/cm^3.
    """
    base = RhexParams(
        mass_kg=0.4,
        leg_radius_m=0.04,
        leg_width_m=0.011,
        n_support_legs=3,
        hip_height_m=0.02,
        leg_speed_rad_s=2.0 * math.pi,
        response_time_s=1.0,  # placeholder; replaced by calibration
    )
    return calibrate_response_time(base, LAB_CRITICAL_RESISTANCE)


def field_params(total_mass_kg: float) -> RhexParams:
    """Field-scale hexapod: 17.5 cm leg diameter, alternating-tripod support.

    The elastic response time characterizes the sand-leg interaction, not
    the platform, so the bench-calibrated value carries over; hip height
    keeps the half-radius convention.
    """
    lab = lab_params()
    radius = 0.0875
    return RhexParams(
        mass_kg=total_mass_kg,
        leg_radius_m=radius,
        leg_width_m=0.025,
        n_support_legs=3,
        hip_height_m=radius / 2.0,
        leg_speed_rad_s=2.0 * math.pi,
        response_time_s=lab.response_time_s,
    )
