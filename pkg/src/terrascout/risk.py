"""Shared risk-map container for platform-specific traversal predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import GridError, Raster

__all__ = ["RiskMap"]


@dataclass(frozen=True)
class RiskMap:
    """Per-cell risk layers plus a binary hazard mask for one platform.

    layers maps names like "slip" or "torque" to rasters on a shared
    grid; score is the scalar risk raster the hazard mask was cut from.
    """

    platform: str
    score: Raster
    hazard: np.ndarray  # boolean, same shape as score
    layers: dict[str, Raster] = field(default_factory=dict)
    thresholds: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        hazard = np.asarray(self.hazard, dtype=bool)
        if hazard.shape != self.score.values.shape:
            raise GridError("hazard mask shape must match the score raster")
        for name, layer in self.layers.items():
            if layer.spec != self.score.spec:
                raise GridError(f"risk layer {name!r} is on a different grid")
        object.__setattr__(self, "hazard", hazard)

    @property
    def spec(self):
        return self.score.spec

    @property
    def hazard_fraction(self) -> float:
        return float(np.mean(self.hazard))

    def hazard_raster(self) -> Raster:
        """Hazard mask as a 0/1 float raster for serialization."""
        return Raster(self.score.spec, self.hazard.astype(float))
