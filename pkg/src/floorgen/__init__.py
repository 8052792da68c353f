"""Clutter-resistant floorplan reconstruction from labeled building point clouds."""

from .config import PipelineConfig
from .errors import FloorgenError, StageError
from .evaluate import EvalReport, evaluate_pair
from .floorplan import Floorplan, export_floorplan, read_floorplan
from .pcio import LabeledPointCloud, SemanticClass, load_point_cloud, save_point_cloud
from .pipeline import grid_search, run_pipeline
from .synth import BuildingSpec, generate_building, standard_corpus

__all__ = [
    "BuildingSpec", "EvalReport", "Floorplan", "FloorgenError", "LabeledPointCloud", "PipelineConfig",
    "SemanticClass", "StageError", "evaluate_pair", "export_floorplan", "generate_building", "grid_search",
    "load_point_cloud", "read_floorplan", "run_pipeline", "save_point_cloud", "standard_corpus",
]

__version__ = "0.1.0"
