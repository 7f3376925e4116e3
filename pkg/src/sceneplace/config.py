"""Engine configuration with the documented defaults.

The config file is JSON; every field is optional and falls back to the
module defaults, e.g.:

    {
      "voxel_size": 0.04,
      "min_voxels": 10,
      "thresholds": {"d_offset": 0.5, "d_adjacent": 0.1, "d_near": 1.0, "d_support": 0.1},
      "rebuild_every": 10,
      "limit_embeddings": 64,
      "long_axis_categories": ["bed"],
      "frontless_categories": ["table", "floor", "wall", "ceiling", "otherprops"],
      "standoff": 0.3
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .abstraction import FRONTLESS_CATEGORIES, LONG_AXIS_CATEGORIES
from .arrangement import DEFAULT_EMBEDDING_LIMIT, DEFAULT_STANDOFF
from .errors import SchemaError
from .relations import RelationThresholds
from .semantic_map import DEFAULT_MIN_VOXELS, DEFAULT_VOXEL_SIZE

DEFAULT_REBUILD_EVERY = 10


@dataclass(frozen=True)
class EngineConfig:
    voxel_size: float = DEFAULT_VOXEL_SIZE
    min_voxels: int = DEFAULT_MIN_VOXELS
    thresholds: RelationThresholds = field(default_factory=RelationThresholds)
    rebuild_every: int = DEFAULT_REBUILD_EVERY
    limit_embeddings: int = DEFAULT_EMBEDDING_LIMIT
    long_axis_categories: frozenset[str] = LONG_AXIS_CATEGORIES
    frontless_categories: frozenset[str] = FRONTLESS_CATEGORIES
    standoff: float = DEFAULT_STANDOFF

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise SchemaError("voxel_size must be positive")
        if self.min_voxels < 1:
            raise SchemaError("min_voxels must be at least 1")
        if self.rebuild_every < 1:
            raise SchemaError("rebuild_every must be at least 1")
        if self.limit_embeddings < 1:
            raise SchemaError("limit_embeddings must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "thresholds" in kwargs:
            try:
                kwargs["thresholds"] = RelationThresholds(**kwargs["thresholds"])
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"bad thresholds: {exc}") from exc
        for key in ("long_axis_categories", "frontless_categories"):
            if key in kwargs:
                kwargs[key] = frozenset(kwargs[key])
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad config: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: not valid JSON") from exc
        if not isinstance(data, dict):
            raise SchemaError(f"{path}: expected a JSON object")
        return cls.from_dict(data)
