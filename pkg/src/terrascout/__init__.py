"""terrascout: scout-rover terrain strength mapping, risk prediction, and planning.

A legged scout probes granular terrain step by step; the penetration
force-depth slope per unit area (N/cm^3) at each footstep is fused by
Gaussian-process regression into strength, uncertainty, and model-fitness
maps; platform-specific terradynamics models turn strength into traversal
risk for C-legged and wheeled rovers; and a potential-field planner routes
a rover through science targets while avoiding hazard polygons.
"""

from . import grids, mapping, mission, planner, proprioception, rhex, risk, terrain, wheel
from .grids import GridSpec, Raster
from .mapping import KernelParams, TerrainMap, TerrainMapper
from .mission import MissionConfig, ScoutPlan, preset_config, replay, run_mission
from .planner import ObstacleSet, PlannerConfig, Trajectory
from .proprioception import ResistanceEstimate, StepMeasurement
from .rhex import RhexParams
from .risk import RiskMap
from .terrain import ForceDepthTrace, ProbeGeometry, ResistanceField
from .wheel import WheelEquilibrium, WheelParams

__version__ = "0.1.0"

__all__ = [
    "grids",
    "terrain",
    "proprioception",
    "mapping",
    "rhex",
    "wheel",
    "risk",
    "planner",
    "mission",
    "GridSpec",
    "Raster",
    "KernelParams",
    "TerrainMap",
    "TerrainMapper",
    "MissionConfig",
    "ScoutPlan",
    "preset_config",
    "run_mission",
    "replay",
    "ObstacleSet",
    "PlannerConfig",
    "Trajectory",
    "ResistanceEstimate",
    "StepMeasurement",
    "RhexParams",
    "RiskMap",
    "ForceDepthTrace",
    "ProbeGeometry",
    "ResistanceField",
    "WheelEquilibrium",
    "WheelParams",
    "__version__",
]
