"""Collection-pipeline configuration and its serialized form."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Dict


@dataclass
class PipelineConfig:
    """Knobs steering seeding, propagation, resampling, and filtering.

    Defaults are the working values used throughout: gamma 0.9 for the track
    filter, 8 sampled points per target, stability constant alpha 0.2, grid
    32 points per side for seeding, and k = 10 for k-means prompt
    post-processing.
    """

    points_per_target: int = 8
    grid_per_side: int = 32
    gamma: float = 0.9
    alpha: float = 0.2
    resample_period: int = 1
    max_candidates: int = 3
    seed: int = 0
    dedup_iou: float = 0.9
    kmeans_k: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.dedup_iou <= 1.0:
            raise ValueError(f"dedup_iou must be in [0, 1], got {self.dedup_iou}")
        if self.points_per_target < 1:
            raise ValueError(f"points_per_target must be >= 1, got {self.points_per_target}")
        if self.grid_per_side < 1:
            raise ValueError(f"grid_per_side must be >= 1, got {self.grid_per_side}")
        if self.resample_period < 1:
            raise ValueError(f"resample_period must be >= 1, got {self.resample_period}")
        if self.max_candidates < 1:
            raise ValueError(f"max_candidates must be >= 1, got {self.max_candidates}")
        if self.kmeans_k < 1:
            raise ValueError(f"kmeans_k must be >= 1, got {self.kmeans_k}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ValueError(f"config must be an object, got {type(d).__name__}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)
