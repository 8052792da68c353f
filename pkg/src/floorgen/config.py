"""Validated pipeline configuration.

Every tunable of the pipeline lives here, grouped by stage. Unknown keys are
rejected and values are range-checked on construction.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .annotate import AnnotationParams
from .doors import DoorBounds
from .evaluate import EvalConfig
from .stairs import StairParams


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class NormalsConfig(_Section):
    k: int = Field(16, ge=3, le=256)


class OutlierConfig(_Section):
    enabled: bool = True
    k: int = Field(8, ge=1, le=256)
    std_ratio: float = Field(3.0, gt=0)


class LevelsConfig(_Section):
    bin_size: float = Field(0.05, gt=0, le=1.0)
    peak_prominence: float = Field(0.3, gt=0, le=1.0)
    min_story_height: float = Field(1.5, gt=0)
    median_contrast: float = Field(3.0, ge=1.0)


class AnnotationConfig(_Section):
    offset: float = Field(0.10, gt=0, le=1.0)
    door_z_max: float = Field(2.2, gt=0)
    class_offsets: Dict[str, float] = Field(default_factory=dict)

    def params(self) -> AnnotationParams:
        return AnnotationParams(self.offset, self.door_z_max, dict(self.class_offsets))


class WallConfig(_Section):
    vertical_tolerance_deg: float = Field(10.0, gt=0, lt=90)
    angle_thresh_deg: float = Field(15.0, gt=0, le=90)
    radius: float = Field(0.15, gt=0, le=2.0)
    min_cluster: int = Field(100, ge=1)
    parametric_filter: bool = True
    min_points: int = Field(500, ge=2)
    min_height_fraction: float = Field(0.5, ge=0, le=1.0)


class DoorConfig(_Section):
    cell: float = Field(0.05, gt=0, le=0.5)
    min_clear_height: float = Field(1.8, gt=0)
    w_min: float = Field(0.6, gt=0)
    w_max: float = Field(1.6, gt=0)
    h_min: float = Field(1.8, gt=0)
    h_max: float = Field(2.4, gt=0)
    a_min: float = Field(1.2, gt=0)
    a_max: float = Field(3.5, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        for lo, hi in (("w_min", "w_max"), ("h_min", "h_max"), ("a_min", "a_max")):
            if getattr(self, lo) > getattr(self, hi):
                raise ValueError(f"{lo} must not exceed {hi}")
        return self

    def bounds(self) -> DoorBounds:
        return DoorBounds(self.w_min, self.w_max, self.h_min, self.h_max, self.a_min, self.a_max)


class StairConfig(_Section):
    riser_min: float = Field(0.10, gt=0)
    riser_max: float = Field(0.22, gt=0)
    tread_min: float = Field(0.22, gt=0)
    tread_max: float = Field(0.40, gt=0)
    min_steps: int = Field(3, ge=2)
    uniformity: float = Field(0.03, gt=0)
    normal_tol_deg: float = Field(15.0, gt=0, lt=90)
    patch_radius: float = Field(0.06, gt=0)
    patch_min_points: int = Field(15, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.riser_min > self.riser_max or self.tread_min > self.tread_max:
            raise ValueError("stair range minimum exceeds maximum")
        return self

    def params(self) -> StairParams:
        return StairParams(self.riser_min, self.riser_max, self.tread_min, self.tread_max, self.min_steps,
                           self.uniformity, math.radians(self.normal_tol_deg), self.patch_radius,
                           self.patch_min_points)


class RansacConfig(_Section):
    iterations: int = Field(500, ge=1, le=100_000)
    inlier_dist: float = Field(0.02, gt=0, le=0.5)
    seed: int = Field(0, ge=0)
    default_thickness: float = Field(0.12, gt=0)
    max_thickness: float = Field(0.6, gt=0)


class FloorplanConfig(_Section):
    snap_dist: float = Field(0.15, ge=0)
    room_resolution: float = Field(0.02, gt=0, le=0.5)
    min_room_area: float = Field(1.0, ge=0)


class EvaluationConfig(_Section):
    resolution: float = Field(0.01, gt=0, le=0.5)
    margins: List[float] = Field(default_factory=lambda: [0.02, 0.05, 0.10], min_length=1)
    max_warp: int = Field(10, ge=0)

    def to_eval(self) -> EvalConfig:
        return EvalConfig(self.resolution, tuple(self.margins), self.max_warp)


class PipelineConfig(_Section):
    align: bool = True
    normals: NormalsConfig = Field(default_factory=NormalsConfig)
    outliers: OutlierConfig = Field(default_factory=OutlierConfig)
    levels: LevelsConfig = Field(default_factory=LevelsConfig)
    annotation: AnnotationConfig = Field(default_factory=AnnotationConfig)
    walls: WallConfig = Field(default_factory=WallConfig)
    doors: DoorConfig = Field(default_factory=DoorConfig)
    stairs: StairConfig = Field(default_factory=StairConfig)
    ransac: RansacConfig = Field(default_factory=RansacConfig)
    floorplan: FloorplanConfig = Field(default_factory=FloorplanConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.model_validate_json(Path(path).read_text())

    def dumps(self) -> str:
        return json.dumps(self.model_dump(), indent=2, sort_keys=True) + "\n"

    def with_overrides(self, overrides: Dict[str, object]) -> "PipelineConfig":
        """Copy with dotted-key overrides, e.g. ``{"walls.min_points": 300}``."""
        data = self.model_dump()
        for key, value in overrides.items():
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ValueError(f"unknown config key {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ValueError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return type(self).model_validate(data)
