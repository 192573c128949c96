"""Granular resistive-force-theory model of a driven rigid wheel.

Local stresses on the leading rim arc are the generic granular plate
response scaled by a terrain factor zeta and by depth,

    sigma_{z,x}(theta) = zeta * alpha_{z,x}(beta, gamma) * z(theta),
    z(theta) = R (cos theta - cos theta0),     dA = R * width * dtheta,

integrated over the contact arc 0 <= theta <= theta0.  Steady-state
sinkage (immersion angle theta0) and slip come from enforcing vertical
support F_z = m g and zero net horizontal force F_x = 0.  In
dimensionless form both balances depend on terrain, load, and wheel size
only through the effective weight W = m g / (zeta R^2 width), which the
equilibrium solver exploits.

Angle conventions: local_kinematics reports plate and velocity angles in
the standard counterclockwise z-up sense (downward motion comes out
negative), while the generic stress table is tabulated with angles
positive downward into the bed.  integrate_forces mirrors both angles
(and the horizontal stress sign) when combining the two.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field

import numpy as np

from .grids import Raster
from .risk import RiskMap

__all__ = [
    "WheelParams",
    "RftCoefficients",
    "RftStressModel",
    "WheelEquilibrium",
    "WheelError",
    "local_kinematics",
    "generic_stress",
    "calibrate_zeta",
    "integrate_forces",
    "solve_equilibrium",
    "solve_equilibrium_batch",
    "wheel_risk_map",
]

N_PER_CM3_TO_SI = 1e6  # N/cm^3 -> N/m^3

SLIP_MAX = 0.999
FORCE_TOLERANCE = 1e-4  # residuals relative to the wheel load
MIN_QUADRATURE_NODES = 65
_BISECTION_ITERS = 40  # interval shrinks to ~1e-12, far past the residual tolerance
_SOLVER_NODES = 65

DEFAULT_SLIP_HAZARD = 0.95


class WheelError(ValueError):
    """Invalid wheel parameters, non-convergent quadrature, or bad inputs."""


@dataclass(frozen=True)
class WheelParams:
    """Single-wheel parameters: radius and width (m), supported mass (kg)."""

    radius_m: float
    width_m: float
    mass_kg: float
    gravity_m_s2: float = 9.81
    torque_limit_nm: float = 60.0

    def __post_init__(self):
        for name in ("radius_m", "width_m", "mass_kg", "gravity_m_s2", "torque_limit_nm"):
            if getattr(self, name) <= 0:
                raise WheelError(f"{name} must be positive")

    @property
    def load_n(self) -> float:
        return self.mass_kg * self.gravity_m_s2


class RftCoefficients:
    """Fourier expansion of the generic plate stresses over (beta, gamma).

    Terms are alpha = sum value * {cos|sin}(2*m*beta + n*gamma); families
    A (cos) and B (sin) build alpha_z, C (cos) and D (sin) build alpha_x.
    """

    def __init__(self, terms: list[tuple[str, int, int, float]]):
        if not terms:
            raise WheelError("empty coefficient table")
        self._z_cos = [(m, n, v) for fam, m, n, v in terms if fam == "A"]
        self._z_sin = [(m, n, v) for fam, m, n, v in terms if fam == "B"]
        self._x_cos = [(m, n, v) for fam, m, n, v in terms if fam == "C"]
        self._x_sin = [(m, n, v) for fam, m, n, v in terms if fam == "D"]
        known = {"A", "B", "C", "D"}
        bad = {fam for fam, *_ in terms} - known
        if bad:
            raise WheelError(f"unknown coefficient families {sorted(bad)}")
        self.terms = list(terms)

    @classmethod
    def from_csv(cls, text: str) -> "RftCoefficients":
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("term,"):
                continue
            fam, m, n, value = line.split(",")
            terms.append((fam.strip(), int(m), int(n), float(value)))
        return cls(terms)

    def evaluate(self, beta, gamma) -> tuple[np.ndarray, np.ndarray]:
        """Generic (alpha_z, alpha_x) per unit depth at table-convention angles."""
        beta = np.asarray(beta, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        alpha_z = np.zeros(np.broadcast(beta, gamma).shape)
        alpha_x = np.zeros_like(alpha_z)
        for m, n, v in self._z_cos:
            alpha_z += v * np.cos(2 * m * beta + n * gamma)
        for m, n, v in self._z_sin:
            alpha_z += v * np.sin(2 * m * beta + n * gamma)
        for m, n, v in self._x_cos:
            alpha_x += v * np.cos(2 * m * beta + n * gamma)
        for m, n, v in self._x_sin:
            alpha_x += v * np.sin(2 * m * beta + n * gamma)
        return alpha_z, alpha_x


_DEFAULT_COEFFICIENTS: RftCoefficients | None = None


def default_coefficients() -> RftCoefficients:
    global _DEFAULT_COEFFICIENTS
    if _DEFAULT_COEFFICIENTS is None:
        text = (
            importlib.resources.files("terrascout.data")
            .joinpath("rft_generic_coefficients.csv")
            .read_text(encoding="utf-8")
        )
        _DEFAULT_COEFFICIENTS = RftCoefficients.from_csv(text)
    return _DEFAULT_COEFFICIENTS


@dataclass(frozen=True)
class RftStressModel:
    """Generic coefficients plus the terrain strength scaling factor zeta (N/m^3)."""

    zeta: float
    coefficients: RftCoefficients = field(default_factory=default_coefficients)

    def __post_init__(self):
        if self.zeta <= 0:
            raise WheelError("zeta must be positive")
        az0, _ = self.coefficients.evaluate(0.0, math.pi / 2)
        if az0 <= 0:
            raise WheelError("coefficient table does not resist vertical penetration")


def generic_stress(beta, gamma, coefficients: RftCoefficients | None = None):
    """Generic per-unit-depth stresses (alpha_z, alpha_x) at (beta, gamma).

    Angles follow the stress table's downward-positive convention, so
    (0, pi/2) is a flat plate driven straight down.
    """
    coeffs = coefficients or default_coefficients()
    alpha_z, alpha_x = coeffs.evaluate(beta, gamma)
    if np.ndim(alpha_z) == 0:
        return float(alpha_z), float(alpha_x)
    return alpha_z, alpha_x


def calibrate_zeta(
    alpha_z_meas_ncm3: float, coefficients: RftCoefficients | None = None
) -> RftStressModel:
    """Scale the generic response so flat-plate penetration matches the scout.

    zeta = alpha_z_meas / alpha_z_gen(0, pi/2): with that anchor, the RFT
    vertical force on a flat plate at depth z is exactly
    A * alpha_z_meas * z, the same law the scout fits.
    """
    if alpha_z_meas_ncm3 <= 0:
        raise WheelError("measured penetration resistance must be positive")
    coeffs = coefficients or default_coefficients()
    az0, _ = coeffs.evaluate(0.0, math.pi / 2)
    zeta = alpha_z_meas_ncm3 * N_PER_CM3_TO_SI / float(az0)
    return RftStressModel(zeta=zeta, coefficients=coeffs)


def local_kinematics(theta, s):
    """Plate angle beta and velocity angle gamma of a rim element.

    theta is the polar angle ahead of bottom dead center, s the slip
    ratio.  Angles are standard counterclockwise with z up: the rim
    velocity (v - w R cos theta, -w R sin theta) gives
    gamma = atan2(-sin theta, 1 - s - cos theta), and beta = -theta.
    The indeterminate theta = 0, s = 0 case returns gamma = 0.
    """
    theta_arr = np.asarray(theta, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    beta = -theta_arr
    vx = 1.0 - s_arr - np.cos(theta_arr)
    vz = -np.sin(theta_arr)
    vz = np.where(vz == 0.0, 0.0, vz)  # avoid -0.0 so atan2 lands on +pi
    degenerate = (vx == 0.0) & (vz == 0.0)
    gamma = np.where(degenerate, 0.0, np.arctan2(vz, np.where(degenerate, 1.0, vx)))
    if np.ndim(theta) == 0 and np.ndim(s) == 0:
        return float(beta), float(gamma)
    return beta, gamma


def _simpson_weights(nodes: int) -> np.ndarray:
    if nodes < 3 or nodes % 2 == 0:
        raise WheelError("composite Simpson needs an odd node count >= 3")
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _dimensionless_integrals(theta0, s, coefficients: RftCoefficients, nodes: int):
    """Contact-arc integrals (Iz, Ix, Itau) in units of zeta R^2 l (R^3 l for torque).

    theta0 and s broadcast; the arc is rescaled to [0, 1] per cell so a
    single Simpson rule covers every cell in lockstep.
    """
    theta0 = np.asarray(theta0, dtype=float)
    s = np.asarray(s, dtype=float)
    x = np.linspace(0.0, 1.0, nodes)
    theta = theta0[..., None] * x
    # Velocity angle of each rim element.  The rolling-contact node
    # (theta = 0 at zero slip) has zero velocity; biasing it infinitesimally
    # downward selects the theta -> 0+ limit, keeping the integrand smooth.
    gamma_kin = np.arctan2(-np.sin(theta) - 1e-300, 1.0 - s[..., None] - np.cos(theta))
    # mirror into the stress table's downward-positive convention
    alpha_z, alpha_x = coefficients.evaluate(theta, -gamma_kin)
    depth_profile = np.cos(theta) - np.cos(theta0)[..., None]
    weights = _simpson_weights(nodes) * (theta0[..., None] / (nodes - 1))
    iz = np.sum(weights * alpha_z * depth_profile, axis=-1)
    ix = np.sum(weights * alpha_x * depth_profile, axis=-1)
    # drive torque per force convention: sigma_x on the wheel is -alpha_x
    itau = np.sum(
        weights * (-alpha_x * np.cos(theta) + alpha_z * np.sin(theta)) * depth_profile, axis=-1
    )
    return iz, ix, itau


def integrate_forces(
    theta0: float,
    s: float,
    params: WheelParams,
    stress_model: RftStressModel,
    nodes: int = MIN_QUADRATURE_NODES,
    rtol: float = 1e-6,
    max_doublings: int = 8,
) -> tuple[float, float, float]:
    """Net (F_x, F_z, tau) on the wheel from the leading-arc stresses.

    Composite Simpson quadrature, node count doubling until successive
    estimates agree to rtol relative to the dominant force magnitude.
    F_x is the net forward force (thrust minus drag), F_z the upward
    support, tau the required drive torque.
    """
    if not 0.0 <= theta0 <= math.pi / 2:
        raise WheelError("immersion angle must lie in [0, pi/2]")
    if not 0.0 <= s <= 1.0:
        raise WheelError("slip ratio must lie in [0, 1]")
    if theta0 == 0.0:
        return 0.0, 0.0, 0.0
    nodes = max(nodes, MIN_QUADRATURE_NODES)
    if nodes % 2 == 0:
        nodes += 1
    prev = np.array(_dimensionless_integrals(theta0, s, stress_model.coefficients, nodes))
    for _ in range(max_doublings):
        nodes = 2 * nodes - 1
        cur = np.array(_dimensionless_integrals(theta0, s, stress_model.coefficients, nodes))
        scale = float(np.max(np.abs(cur))) or 1.0
        if float(np.max(np.abs(cur - prev))) <= rtol * scale:
            prev = cur
            break
        prev = cur
    else:
        raise WheelError("quadrature failed to converge")
    iz, ix, itau = (float(v) for v in prev)
    r, width = params.radius_m, params.width_m
    force_scale = stress_model.zeta * r * r * width
    return -force_scale * ix, force_scale * iz, force_scale * r * itau


@dataclass(frozen=True)
class WheelEquilibrium:
    """Steady-state solution: slip, immersion angle, torque, residual forces."""

    slip: float
    theta0_rad: float
    torque_nm: float
    drawbar_n: float
    load_n: float
    effective_weight: float
    immobilized: bool

    def __post_init__(self):
        if not 0.0 <= self.theta0_rad <= math.pi / 2:
            raise WheelError("immersion angle out of range")
        if not 0.0 <= self.slip <= 1.0:
            raise WheelError("slip out of range")


def solve_equilibrium_batch(
    params: WheelParams, alpha_z_ncm3: np.ndarray, slip_max: float = SLIP_MAX
) -> dict[str, np.ndarray]:
    """Vectorized equilibrium solve over an array of terrain strengths.

    Nested bisection: for each candidate slip the immersion angle is
    bisected on the monotone vertical balance, then slip is bisected on
    the horizontal balance.  All cells advance in lockstep; cells whose
    final residuals exceed the tolerance are flagged immobilized (either
    over-sinkage past theta0 = pi/2 or no thrust balance below slip_max).
    """
    alpha = np.maximum(np.asarray(alpha_z_ncm3, dtype=float), 1e-12)
    coeffs = default_coefficients()
    az0, _ = coeffs.evaluate(0.0, math.pi / 2)
    zeta = alpha * N_PER_CM3_TO_SI / float(az0)
    w_eff = params.load_n / (zeta * params.radius_m**2 * params.width_m)

    def theta0_for(s: np.ndarray) -> np.ndarray:
        lo = np.zeros_like(w_eff)
        hi = np.full_like(w_eff, math.pi / 2)
        for _ in range(_BISECTION_ITERS):
            mid = 0.5 * (lo + hi)
            iz, _, _ = _dimensionless_integrals(mid, s, coeffs, _SOLVER_NODES)
            under = iz < w_eff
            lo = np.where(under, mid, lo)
            hi = np.where(under, hi, mid)
        return 0.5 * (lo + hi)

    s_lo = np.zeros_like(w_eff)
    s_hi = np.full_like(w_eff, slip_max)
    for _ in range(_BISECTION_ITERS):
        s_mid = 0.5 * (s_lo + s_hi)
        theta0 = theta0_for(s_mid)
        _, ix, _ = _dimensionless_integrals(theta0, s_mid, coeffs, _SOLVER_NODES)
        drag_dominated = ix > 0  # net rearward force: needs more slip
        s_lo = np.where(drag_dominated, s_mid, s_lo)
        s_hi = np.where(drag_dominated, s_hi, s_mid)
    s = 0.5 * (s_lo + s_hi)
    theta0 = theta0_for(s)
    iz, ix, itau = _dimensionless_integrals(theta0, s, coeffs, _SOLVER_NODES)

    vertical_ok = np.abs(iz - w_eff) <= FORCE_TOLERANCE * w_eff
    horizontal_ok = np.abs(ix) <= FORCE_TOLERANCE * w_eff
    immobilized = ~(vertical_ok & horizontal_ok)
    s = np.where(immobilized, slip_max, s)
    theta0 = np.where(vertical_ok, theta0, math.pi / 2)

    force_scale = zeta * params.radius_m**2 * params.width_m
    return {
        "slip": s,
        "theta0": theta0,
        "torque": force_scale * params.radius_m * itau,
        "drawbar": -force_scale * ix,
        "load": force_scale * iz,
        "effective_weight": w_eff,
        "immobilized": immobilized,
    }


def solve_equilibrium(
    params: WheelParams, alpha_z_ncm3: float, slip_max: float = SLIP_MAX
) -> WheelEquilibrium:
    """Equilibrium slip, immersion angle, and torque for one strength value."""
    if alpha_z_ncm3 <= 0:
        raise WheelError("penetration resistance must be positive")
    out = solve_equilibrium_batch(params, np.array([alpha_z_ncm3]), slip_max=slip_max)
    return WheelEquilibrium(
        slip=float(out["slip"][0]),
        theta0_rad=float(out["theta0"][0]),
        torque_nm=float(out["torque"][0]),
        drawbar_n=float(out["drawbar"][0]),
        load_n=float(out["load"][0]),
        effective_weight=float(out["effective_weight"][0]),
        immobilized=bool(out["immobilized"][0]),
    )


def wheel_risk_map(
    strength: Raster,
    params: WheelParams,
    slip_threshold: float = DEFAULT_SLIP_HAZARD,
    torque_threshold_nm: float | None = None,
) -> RiskMap:
    """Per-cell equilibrium solve over a strength raster.

    Risk score is max(slip / slip_threshold, torque / torque_limit);
    hazard where the score reaches 1 or the cell is immobilized.
    """
    if torque_threshold_nm is None:
        torque_threshold_nm = params.torque_limit_nm
    out = solve_equilibrium_batch(params, strength.values.ravel())
    shape = strength.values.shape
    slip = out["slip"].reshape(shape)
    torque = out["torque"].reshape(shape)
    theta0 = out["theta0"].reshape(shape)
    immobilized = out["immobilized"].reshape(shape)
    score = np.maximum(slip / slip_threshold, torque / torque_threshold_nm)
    score = np.where(immobilized, np.maximum(score, 1.0), score)
    spec = strength.spec
    return RiskMap(
        platform="wheel",
        score=Raster(spec, score),
        hazard=(score >= 1.0) | immobilized,
        layers={
            "slip": Raster(spec, slip),
            "torque": Raster(spec, torque),
            "immersion_angle": Raster(spec, theta0),
        },
        thresholds={"slip": slip_threshold, "torque": torque_threshold_nm},
    )
