"""Ground-truth regolith fields, synthetic penetration traces, and DEM screening.

The testbed ground truth is a per-cell penetration resistance field in
N/cm^3 (force-vs-depth slope per unit intruder area).  Synthetic probe
traces follow the linear granular penetration law f = A * alpha_z * z,
optionally with Gaussian force noise and a surface-crust force plateau.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

from .grids import GridError, GridSpec, Raster

__all__ = [
    "ResistanceField",
    "ProbeGeometry",
    "ForceDepthTrace",
    "DemGrid",
    "CrustSpec",
    "TerrainError",
    "load_stiffness_matrix",
    "stiffness_matrix_to_csv",
    "sample_resistance",
    "synthesize_trace",
    "slope_corridor",
    "ames_testbed_field",
    "classify_treatment",
    "TREATMENT_BOUNDS",
]


class TerrainError(ValueError):
    """Invalid terrain data or probe request."""


@dataclass(frozen=True)
class ResistanceField:
    """Gridded ground-truth penetration resistance per unit area (N/cm^3)."""

    raster: Raster

    def __post_init__(self):
        if np.any(self.raster.values <= 0):
            raise TerrainError("resistance values must all be positive")

    @property
    def spec(self) -> GridSpec:
        return self.raster.spec

    @property
    def values(self) -> np.ndarray:
        return self.raster.values


@dataclass(frozen=True)
class ProbeGeometry:
    """Intruder geometry: projected contact area (cm^2), stroke (cm), speed (cm/s)."""

    area_cm2: float = 1.0
    max_depth_cm: float = 4.0
    descent_speed_cm_s: float = 1.0

    def __post_init__(self):
        if self.area_cm2 <= 0:
            raise TerrainError("probe area must be positive")
        if self.max_depth_cm <= 0:
            raise TerrainError("probe max depth must be positive")


@dataclass(frozen=True)
class CrustSpec:
    """Additive force plateau: extra force (N) carried over a depth band (cm).

    Models a brittle surface crust that bears load until instantaneous
    breakage at the bottom of the band; the trace rejoins the linear law
    afterwards.  No attempt at real crust mechanics: the point is to
    produce the low-R^2 signature that flags non-granular anomalies.
    """

    magnitude_n: float
    z_start_cm: float
    z_end_cm: float

    def __post_init__(self):
        if self.z_end_cm <= self.z_start_cm:
            raise TerrainError("crust band must have z_end > z_start")
        if self.magnitude_n < 0:
            raise TerrainError("crust magnitude must be non-negative")


@dataclass(frozen=True)
class ForceDepthTrace:
    """Ordered (depth cm, force N) samples from one probe stroke.

    Synthesized traces have strictly increasing depths starting at 0.
    Monotonicity is not enforced here because recorded field traces can
    include retraction tails; extract_penetration_phase cleans those.
    """

    depths_cm: np.ndarray
    forces_n: np.ndarray
    probe: ProbeGeometry = field(default_factory=ProbeGeometry)
    world_position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        depths = np.asarray(self.depths_cm, dtype=float)
        forces = np.asarray(self.forces_n, dtype=float)
        if depths.ndim != 1 or depths.shape != forces.shape:
            raise TerrainError("depths and forces must be 1-D arrays of equal length")
        if depths.size < 2:
            raise TerrainError("a trace needs at least 2 samples")
        object.__setattr__(self, "depths_cm", depths)
        object.__setattr__(self, "forces_n", forces)

    def __len__(self) -> int:
        return int(self.depths_cm.size)


@dataclass(frozen=True)
class DemGrid:
    """Elevation raster (m)."""

    raster: Raster

    def __post_init__(self):
        if not np.all(np.isfinite(self.raster.values)):
            raise TerrainError("DEM elevations must be finite")

    @property
    def spec(self) -> GridSpec:
        return self.raster.spec


def load_stiffness_matrix(text_table: str) -> ResistanceField:
    """Parse a plain CSV stiffness table into a 1 m-cell field at origin (0, 0).

    The table layout is row-major with one row per y band (y increasing
    down the file) and one column per x band, optionally preceded by an
    "x0,x1,..." header row.
    """
    lines = [ln.strip() for ln in text_table.strip().splitlines() if ln.strip()]
    if lines and lines[0].lstrip().startswith(("x0", '"x0"')):
        lines = lines[1:]
    if not lines:
        raise TerrainError("empty stiffness table")
    rows = []
    for ln in lines:
        parts = [p.strip() for p in ln.split(",")]
        try:
            row = [float(p) for p in parts]
        except ValueError as exc:
            raise TerrainError(f"non-numeric stiffness entry in row {ln!r}") from exc
        rows.append(row)
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise TerrainError(f"row {i} has {len(row)} entries, expected {width}")
    values = np.array(rows, dtype=float)
    if np.any(values <= 0):
        raise TerrainError("stiffness entries must all be positive")
    spec = GridSpec(origin_x=0.0, origin_y=0.0, cell_size=1.0, width=width, height=len(rows))
    return ResistanceField(Raster(spec, values))


def stiffness_matrix_to_csv(field: ResistanceField) -> str:
    """Serialize back to the plain table format accepted by load_stiffness_matrix."""
    lines = [",".join(f"x{i}" for i in range(field.spec.width))]
    for row in field.values:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def ames_testbed_field() -> ResistanceField:
    """The 6 m x 4 m lunar-simulant testbed ground truth shipped with the package."""
    text = (
        importlib.resources.files("terrascout.data")
        .joinpath("ames_stiffness.csv")
        .read_text(encoding="utf-8")
    )
    return load_stiffness_matrix(text)


# Resistance ranges (N/cm^3) of the three surface-preparation treatments:
# below 1.0 sifted (low compaction), 1.0-4.0 raked, 4.0 and above tamped.
TREATMENT_BOUNDS = {"sifted": (0.0, 1.0), "raked": (1.0, 4.0), "tamped": (4.0, float("inf"))}


def classify_treatment(alpha_z: float) -> str:
    for name, (lo, hi) in TREATMENT_BOUNDS.items():
        if lo <= alpha_z < hi:
            return name
    raise TerrainError(f"resistance {alpha_z} outside treatment ranges")


def sample_resistance(field: ResistanceField, x: float, y: float) -> float:
    """Ground-truth resistance at a world position: nearest-cell lookup.

    Cells are half-open boxes [lo, hi) in both axes, so boundary points
    belong to the cell on their upper-left in index space.  No
    interpolation: the field is per-cell constant by construction.
    """
    try:
        return field.raster.value_at(x, y)
    except GridError as exc:
        raise TerrainError(str(exc)) from exc


def synthesize_trace(
    field: ResistanceField,
    x: float,
    y: float,
    probe: ProbeGeometry | None = None,
    noise_std_n: float | None = None,
    crust: CrustSpec | None = None,
    seed: int = 0,
    depth_step_cm: float = 0.1,
) -> ForceDepthTrace:
    """Generate a synthetic force-depth trace at a world position.

    Forces follow f = A * alpha_z * z plus iid Gaussian noise, clamped to
    >= 0 (granular media cannot pull the toe down).  noise_std_n=None
    defaults to 5% of the noiseless force at full stroke; pass 0 for an
    exact trace.  The same seed always yields the same trace.
    """
    probe = probe or ProbeGeometry()
    alpha = sample_resistance(field, x, y)
    depths = np.arange(0.0, probe.max_depth_cm + depth_step_cm / 2, depth_step_cm)
    forces = probe.area_cm2 * alpha * depths
    if crust is not None:
        in_band = (depths >= crust.z_start_cm) & (depths < crust.z_end_cm)
        forces = forces + crust.magnitude_n * in_band
    if noise_std_n is None:
        noise_std_n = 0.05 * probe.area_cm2 * alpha * probe.max_depth_cm
    if noise_std_n < 0:
        raise TerrainError("noise_std_n must be non-negative")
    if noise_std_n > 0:
        rng = np.random.default_rng(seed)
        forces = forces + rng.normal(0.0, noise_std_n, size=depths.shape)
    forces = np.maximum(forces, 0.0)
    return ForceDepthTrace(depths, forces, probe=probe, world_position=(x, y))


def slope_corridor(dem: DemGrid, max_slope_deg: float = 15.0) -> np.ndarray:
    """Boolean mask of cells whose local slope is below max_slope_deg.

    Slope is the arctangent of the gradient magnitude from central
    differences (one-sided at borders), so the mask is unchanged by
    adding a constant to all elevations.
    """
    values = dem.raster.values
    if values.shape[0] < 2 or values.shape[1] < 2:
        raise TerrainError("DEM must be at least 2x2 cells for slope estimation")
    cell = dem.spec.cell_size
    dz_dy, dz_dx = np.gradient(values, cell)
    slope_deg = np.degrees(np.arctan(np.hypot(dz_dx, dz_dy)))
    return slope_deg < max_slope_deg
