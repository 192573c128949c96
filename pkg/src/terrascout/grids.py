"""Regular 2-D rasters over a world-frame grid, with CSV and binary I/O.

Every gridded quantity in the toolkit (ground-truth resistance, DEMs,
posterior maps, risk layers) shares one layout: a rectangular grid of
square cells, origin at the lower-left corner, values stored row-major
with row index increasing along +y and column index along +x.  Cell
(ix, iy) covers the half-open world box
[ox + ix*c, ox + (ix+1)*c) x [oy + iy*c, oy + (iy+1)*c).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "Raster",
    "raster_to_csv",
    "raster_from_csv",
    "raster_to_binary",
    "raster_from_binary",
]


class GridError(ValueError):
    """Malformed grid definition or out-of-bounds access."""


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a raster: origin (m), cell size (m), and cell counts."""

    origin_x: float
    origin_y: float
    cell_size: float
    width: int
    height: int

    def __post_init__(self):
        if self.cell_size <= 0:
            raise GridError(f"cell_size must be positive, got {self.cell_size}")
        if self.width < 1 or self.height < 1:
            raise GridError(f"grid must be at least 1x1, got {self.width}x{self.height}")

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) world bounds."""
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width * self.cell_size,
            self.origin_y + self.height * self.cell_size,
        )

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.extent
        return x0 <= x < x1 and y0 <= y < y1

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell indices (ix, iy) containing the point; half-open intervals."""
        if not self.contains(x, y):
            raise GridError(f"position ({x}, {y}) outside grid extent {self.extent}")
        ix = int(np.floor((x - self.origin_x) / self.cell_size))
        iy = int(np.floor((y - self.origin_y) / self.cell_size))
        # floor() of a point numerically on the upper edge can land one past
        ix = min(ix, self.width - 1)
        iy = min(iy, self.height - 1)
        return ix, iy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (shape height x width) of cell-center coordinates."""
        xs = self.origin_x + (np.arange(self.width) + 0.5) * self.cell_size
        ys = self.origin_y + (np.arange(self.height) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class Raster:
    """A GridSpec plus one float value per cell (row-major, shape h x w)."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.spec.height, self.spec.width):
            raise GridError(
                f"value shape {values.shape} does not match grid "
                f"{self.spec.height}x{self.spec.width}"
            )
        object.__setattr__(self, "values", values)

    def value_at(self, x: float, y: float) -> float:
        ix, iy = self.spec.cell_of(x, y)
        return float(self.values[iy, ix])


def _format_float(v: float) -> str:
    # repr gives the shortest string that round-trips, keeping files byte-stable
    return repr(float(v))


def raster_to_csv(raster: Raster) -> str:
    """Serialize with a '#' grid-header line, an x-column header, one row per y band."""
    spec = raster.spec
    lines = [
        "# origin_x=%s origin_y=%s cell_size=%s width=%d height=%d"
        % (
            _format_float(spec.origin_x),
            _format_float(spec.origin_y),
            _format_float(spec.cell_size),
            spec.width,
            spec.height,
        ),
        ",".join(f"x{i}" for i in range(spec.width)),
    ]
    for row in raster.values:
        lines.append(",".join(_format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def raster_from_csv(text: str) -> Raster:
    """Inverse of raster_to_csv. Values table must be rectangular and numeric."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise GridError("missing '#' grid-header line")
    header = {}
    for tok in lines[0][1:].split():
        key, _, val = tok.partition("=")
        header[key] = val
    try:
        spec = GridSpec(
            origin_x=float(header["origin_x"]),
            origin_y=float(header["origin_y"]),
            cell_size=float(header["cell_size"]),
            width=int(header["width"]),
            height=int(header["height"]),
        )
    except KeyError as exc:
        raise GridError(f"grid header missing field {exc}") from exc
    rows = []
    for ln in lines[2:]:  # skip the x-column header line
        parts = ln.split(",")
        if len(parts) != spec.width:
            raise GridError(f"row has {len(parts)} entries, expected {spec.width}")
        rows.append([float(p) for p in parts])
    if len(rows) != spec.height:
        raise GridError(f"found {len(rows)} rows, expected {spec.height}")
    return Raster(spec, np.array(rows))


# Binary layout: width (uint32 LE), height (uint32 LE), cell_size, origin_x,
# origin_y (float64 LE each), then height*width float64 LE values row-major.
_BIN_HEADER = struct.Struct("<IIddd")


def raster_to_binary(raster: Raster) -> bytes:
    spec = raster.spec
    buf = io.BytesIO()
    buf.write(
        _BIN_HEADER.pack(spec.width, spec.height, spec.cell_size, spec.origin_x, spec.origin_y)
    )
    buf.write(np.ascontiguousarray(raster.values, dtype="<f8").tobytes())
    return buf.getvalue()


def raster_from_binary(blob: bytes) -> Raster:
    if len(blob) < _BIN_HEADER.size:
        raise GridError("binary raster too short for header")
    width, height, cell_size, ox, oy = _BIN_HEADER.unpack_from(blob)
    expected = _BIN_HEADER.size + width * height * 8
    if len(blob) != expected:
        raise GridError(f"binary raster has {len(blob)} bytes, expected {expected}")
    values = np.frombuffer(blob, dtype="<f8", offset=_BIN_HEADER.size).reshape(height, width)
    spec = GridSpec(origin_x=ox, origin_y=oy, cell_size=cell_size, width=width, height=height)
    return Raster(spec, values.copy())
