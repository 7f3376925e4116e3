"""Sparse multi-layer voxel map over labeled point observations.

Each observation carries a world position, a unit surface normal, an
instance id, a category token, and optionally an affordance token. Votes
for each label type are accumulated in independent sparse layers keyed by
integer voxel index, so the map only ever stores voxels around observed
surfaces. Instances are recovered by per-voxel plurality vote and exposed
as point sets (voxel centers) for the abstraction stage.
"""

from __future__ import annotations

import json
import math
import numbers
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import MalformedObservation

AFFORDANCE_TOKENS = frozenset(
    {"sittable", "supportable", "pushable", "openable", "leanable"}
)

NORMAL_TOLERANCE = 1e-6
DEFAULT_VOXEL_SIZE = 0.04
DEFAULT_MIN_VOXELS = 10

VoxelKey = tuple[int, int, int]


@dataclass
class LabeledObservation:
    """One labeled surface point (meters, right-handed, z-up)."""

    position: np.ndarray
    normal: np.ndarray
    instance_id: int
    category: str
    affordance: str | None = None


@dataclass
class InstanceRecord:
    """Point-level view of one recognized instance.

    `points` are occupied voxel centers in ascending voxel-key order,
    `normals` the per-voxel mean unit normals in the same order, and
    `parts` maps affordance tokens to the subset of voxel centers whose
    affordance vote resolved to that token.
    """

    instance_id: int
    category: str
    points: np.ndarray
    normals: np.ndarray
    parts: dict[str, np.ndarray] = field(default_factory=dict)


def _validate(obs: LabeledObservation, index: int) -> None:
    pos = np.asarray(obs.position, dtype=float)
    nrm = np.asarray(obs.normal, dtype=float)
    if pos.shape != (3,) or not np.all(np.isfinite(pos)):
        raise MalformedObservation(f"observation {index}: bad position {obs.position!r}")
    if nrm.shape != (3,) or not np.all(np.isfinite(nrm)):
        raise MalformedObservation(f"observation {index}: bad normal {obs.normal!r}")
    if abs(float(np.linalg.norm(nrm)) - 1.0) > NORMAL_TOLERANCE:
        raise MalformedObservation(f"observation {index}: normal is not unit length")
    if not isinstance(obs.instance_id, numbers.Integral) or obs.instance_id < 0:
        raise MalformedObservation(f"observation {index}: bad instance id {obs.instance_id!r}")
    if not obs.category:
        raise MalformedObservation(f"observation {index}: empty category")
    if obs.affordance is not None and obs.affordance not in AFFORDANCE_TOKENS:
        raise MalformedObservation(
            f"observation {index}: unknown affordance {obs.affordance!r}"
        )


def _plurality(votes: dict) -> object:
    """Winning label: highest count, ties broken by smallest label."""
    return min(votes, key=lambda label: (-votes[label], label))


class LabeledVoxelMap:
    """Single-writer sparse voxel map with independent label layers.

    Exactly one agent integrates frames; concurrent readers should work on
    the value returned by :meth:`snapshot`, which is unaffected by later
    writes.
    """

    def __init__(self, voxel_size: float = DEFAULT_VOXEL_SIZE):
        if voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        self.voxel_size = float(voxel_size)
        self._instance_votes: dict[VoxelKey, dict[int, int]] = {}
        self._category_votes: dict[VoxelKey, dict[str, int]] = {}
        self._affordance_votes: dict[VoxelKey, dict[str, int]] = {}
        self._normal_sums: dict[VoxelKey, list[float]] = {}
        self.version = 0
        self._changed: set[int] = set()

    def voxel_index(self, position) -> VoxelKey:
        """Componentwise floor(p / voxel_size)."""
        p = position
        vs = self.voxel_size
        return (
            int(math.floor(float(p[0]) / vs)),
            int(math.floor(float(p[1]) / vs)),
            int(math.floor(float(p[2]) / vs)),
        )

    def voxel_center(self, key: VoxelKey) -> tuple[float, float, float]:
        vs = self.voxel_size
        return ((key[0] + 0.5) * vs, (key[1] + 0.5) * vs, (key[2] + 0.5) * vs)

    def integrate_frame(self, frame: Iterable[LabeledObservation]) -> None:
        """Add one vote per layer for every observation in the frame.

        The frame is validated up front and rejected atomically: on
        MalformedObservation the map content, version, and changed set are
        untouched. The version is incremented by exactly 1 per call, also
        for an empty frame.
        """
        frame = list(frame)
        for i, obs in enumerate(frame):
            _validate(obs, i)
        for obs in frame:
            key = self.voxel_index(obs.position)
            instance_id = int(obs.instance_id)
            ivotes = self._instance_votes.setdefault(key, {})
            ivotes[instance_id] = ivotes.get(instance_id, 0) + 1
            cvotes = self._category_votes.setdefault(key, {})
            cvotes[obs.category] = cvotes.get(obs.category, 0) + 1
            if obs.affordance is not None:
                avotes = self._affordance_votes.setdefault(key, {})
                avotes[obs.affordance] = avotes.get(obs.affordance, 0) + 1
            sums = self._normal_sums.setdefault(key, [0.0, 0.0, 0.0])
            sums[0] += float(obs.normal[0])
            sums[1] += float(obs.normal[1])
            sums[2] += float(obs.normal[2])
            self._changed.add(instance_id)
        self.version += 1

    def drain_changed(self) -> set[int]:
        """Return and clear the ids touched since the previous drain."""
        changed, self._changed = self._changed, set()
        return changed

    def extract_instances(self, min_voxels: int = DEFAULT_MIN_VOXELS) -> list[InstanceRecord]:
        """Materialize one record per instance with at least `min_voxels` voxels.

        Voxel ownership and categories resolve by plurality vote (ties to
        the smallest id / lexicographically smallest token). Instances
        below the threshold are withheld, not deleted. Records come back
        ordered by instance id with points in ascending voxel-key order.
        """
        by_instance: dict[int, list[VoxelKey]] = {}
        for key in sorted(self._instance_votes):
            owner = _plurality(self._instance_votes[key])
            by_instance.setdefault(owner, []).append(key)

        records = []
        for instance_id in sorted(by_instance):
            keys = by_instance[instance_id]
            if len(keys) < min_voxels:
                continue
            category_votes: dict[str, int] = {}
            points = np.empty((len(keys), 3))
            normals = np.empty((len(keys), 3))
            parts: dict[str, list[int]] = {}
            for row, key in enumerate(keys):
                points[row] = self.voxel_center(key)
                normals[row] = self._mean_normal(key)
                for token, count in self._category_votes.get(key, {}).items():
                    category_votes[token] = category_votes.get(token, 0) + count
                avotes = self._affordance_votes.get(key)
                if avotes:
                    parts.setdefault(_plurality(avotes), []).append(row)
            records.append(
                InstanceRecord(
                    instance_id=instance_id,
                    category=_plurality(category_votes),
                    points=points,
                    normals=normals,
                    parts={tok: points[rows] for tok, rows in sorted(parts.items())},
                )
            )
        return records

    def _mean_normal(self, key: VoxelKey) -> np.ndarray:
        sums = self._normal_sums[key]
        norm = math.sqrt(sums[0] ** 2 + sums[1] ** 2 + sums[2] ** 2)
        if norm < 1e-12:
            # opposing normals cancelled out; default to up
            return np.array([0.0, 0.0, 1.0])
        return np.array([sums[0] / norm, sums[1] / norm, sums[2] / norm])

    def snapshot(self) -> "LabeledVoxelMap":
        """Consistent copy of the map for concurrent readers."""
        other = LabeledVoxelMap(self.voxel_size)
        other._instance_votes = {k: dict(v) for k, v in self._instance_votes.items()}
        other._category_votes = {k: dict(v) for k, v in self._category_votes.items()}
        other._affordance_votes = {k: dict(v) for k, v in self._affordance_votes.items()}
        other._normal_sums = {k: list(v) for k, v in self._normal_sums.items()}
        other.version = self.version
        other._changed = set(self._changed)
        return other

    # introspection helpers used by tests and tooling
    def occupied_voxels(self) -> set[VoxelKey]:
        return set(self._instance_votes)

    def layer_keys(self, layer: str) -> set[VoxelKey]:
        votes = {
            "instance": self._instance_votes,
            "category": self._category_votes,
            "affordance": self._affordance_votes,
        }[layer]
        return set(votes)

    def votes(self, layer: str, key: VoxelKey) -> dict:
        votes = {
            "instance": self._instance_votes,
            "category": self._category_votes,
            "affordance": self._affordance_votes,
        }[layer]
        return dict(votes.get(key, {}))


def frame_from_record(record: dict) -> tuple[int, list[LabeledObservation]]:
    """Decode one line of the observation stream format."""
    try:
        frame_id = int(record["frame_id"])
        points = record["points"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedObservation(f"bad frame record: {exc}") from exc
    observations = []
    for entry in points:
        try:
            observations.append(
                LabeledObservation(
                    position=np.asarray(entry["p"], dtype=float),
                    normal=np.asarray(entry["n"], dtype=float),
                    instance_id=int(entry["instance"]),
                    category=entry["category"],
                    affordance=entry.get("affordance"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedObservation(f"bad point in frame {frame_id}: {exc}") from exc
    return frame_id, observations


def iter_observation_frames(path) -> Iterator[tuple[int, list[LabeledObservation]]]:
    """Yield (frame_id, observations) from a line-delimited stream file."""
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedObservation(f"{path}:{lineno}: not valid JSON") from exc
            yield frame_from_record(record)


def write_observation_stream(path, frames: Iterable[tuple[int, list[LabeledObservation]]]) -> None:
    """Write frames in the line-delimited stream format (used by tools and tests)."""
    with open(path, "w", encoding="utf-8") as handle:
        for frame_id, observations in frames:
            record = {
                "frame_id": int(frame_id),
                "points": [
                    {
                        "p": [float(x) for x in obs.position],
                        "n": [float(x) for x in obs.normal],
                        "instance": int(obs.instance_id),
                        "category": obs.category,
                        "affordance": obs.affordance,
                    }
                    for obs in observations
                ],
            }
            handle.write(json.dumps(record, separators=(",", ":")) + "\n")
