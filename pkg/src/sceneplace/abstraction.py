"""Box abstraction of recognized instances.

Whole instances become upright boxes: the footprint is the minimum-area
rectangle of the XY-projected points (rotating calipers over the convex
hull) and the vertical extent spans the z range. Affordance part regions
keep a free principal-axis box instead, since seats and backrests are not
upright in general.

A facing direction is attached to instance boxes by three rules, in order:

1. seat/backrest rule: with both a sittable and a leanable part, the front
   is the horizontal face normal closest to the seat-minus-backrest offset;
2. frontless categories (tables, walls, ...) keep no front;
3. extension rule: the front/back axis is the face-normal pair
   perpendicular to the longer horizontal extent (along it for categories
   like beds), signed toward the mean of the observed surface normals.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import InsufficientPoints
from .semantic_map import InstanceRecord

logger = logging.getLogger(__name__)

EXTENT_EPSILON = 1e-4

LONG_AXIS_CATEGORIES = frozenset({"bed"})
FRONTLESS_CATEGORIES = frozenset({"table", "floor", "wall", "ceiling", "otherprops"})

Vec2 = tuple[float, float]


@dataclass(frozen=True)
class Footprint:
    """Rotated rectangle in the XY plane: center, unit axes, half extents."""

    cx: float
    cy: float
    u0: Vec2
    u1: Vec2
    h0: float
    h1: float


@dataclass(frozen=True, eq=False)
class Obb:
    """Oriented bounding box.

    Instance boxes are upright: rotated about the world z axis only, by
    `yaw` in [0, 2*pi). Part boxes carry a full right-handed orthonormal
    basis in `rotation` (columns are axes, descending point variance).
    `front`, when set, equals one of the four horizontal face normals of
    an instance box; `front_rule` records which heuristic chose it.
    """

    center: np.ndarray
    extents: np.ndarray
    kind: str = "instance"
    yaw: float = 0.0
    rotation: np.ndarray | None = None
    front: Vec2 | None = None
    front_rule: str | None = None
    affordance: str | None = None

    @cached_property
    def basis(self) -> np.ndarray:
        if self.kind == "part":
            if self.rotation is None:
                raise ValueError("part box without a rotation basis")
            return self.rotation
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def face_normals_2d(self) -> list[Vec2]:
        """The four horizontal face normals: box +x, +y, -x, -y."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return [(c, s), (-s, c), (-c, -s), (s, -c)]

    @cached_property
    def footprint(self) -> Footprint:
        if self.kind != "instance":
            raise ValueError("footprint is defined for instance boxes only")
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Footprint(
            cx=float(self.center[0]),
            cy=float(self.center[1]),
            u0=(c, s),
            u1=(-s, c),
            h0=float(self.extents[0]) / 2.0,
            h1=float(self.extents[1]) / 2.0,
        )

    def top_z(self) -> float:
        if self.kind == "instance":
            return float(self.center[2] + self.extents[2] / 2.0)
        reach = 0.5 * float(np.abs(self.basis[2]) @ self.extents)
        return float(self.center[2]) + reach

    def bottom_z(self) -> float:
        if self.kind == "instance":
            return float(self.center[2] - self.extents[2] / 2.0)
        reach = 0.5 * float(np.abs(self.basis[2]) @ self.extents)
        return float(self.center[2]) - reach

    def top_face_center(self) -> np.ndarray:
        """Center of the face whose outward normal points most upward."""
        basis = self.basis
        k = int(np.argmax(np.abs(basis[2])))
        sign = 1.0 if basis[2, k] >= 0 else -1.0
        return self.center + sign * basis[:, k] * (float(self.extents[k]) / 2.0)

    def corners(self) -> np.ndarray:
        half = self.extents / 2.0
        offsets = np.array(
            [
                [sx, sy, sz]
                for sx in (-half[0], half[0])
                for sy in (-half[1], half[1])
                for sz in (-half[2], half[2])
            ]
        )
        return self.center + offsets @ self.basis.T

    def contains(self, points, tol: float = 0.0) -> bool:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        local = (pts - self.center) @ self.basis
        return bool(np.all(np.abs(local) <= self.extents / 2.0 + tol))

    def volume(self) -> float:
        return float(np.prod(self.extents))

    def front_yaw(self) -> float | None:
        """Heading angle of the front direction in [0, 2*pi), if any."""
        if self.front is None:
            return None
        return math.atan2(self.front[1], self.front[0]) % (2.0 * math.pi)

    def to_dict(self) -> dict:
        data = {
            "center": [float(x) for x in self.center],
            "extents": [float(x) for x in self.extents],
        }
        if self.kind == "instance":
            data["yaw"] = float(self.yaw)
            data["front"] = None if self.front is None else [self.front[0], self.front[1]]
        else:
            data["rotation"] = [[float(x) for x in row] for row in self.rotation]
        return data

    @classmethod
    def from_dict(cls, data: dict, kind: str, affordance: str | None = None) -> "Obb":
        center = np.asarray(data["center"], dtype=float)
        extents = np.asarray(data["extents"], dtype=float)
        if kind == "instance":
            front = data.get("front")
            return cls(
                center=center,
                extents=extents,
                kind="instance",
                yaw=float(data.get("yaw", 0.0)),
                front=None if front is None else (float(front[0]), float(front[1])),
            )
        return cls(
            center=center,
            extents=extents,
            kind="part",
            rotation=np.asarray(data["rotation"], dtype=float),
            affordance=affordance,
        )


@dataclass(frozen=True, eq=False)
class AbstractedInstance:
    """One scene object: instance box, per-affordance part boxes, attributes."""

    instance_id: int
    category: str
    obb: Obb
    part_obbs: dict[str, Obb] = field(default_factory=dict)
    attributes: frozenset[str] = frozenset()


def fit_zobb(points) -> Obb:
    """Fit the minimum upright box around a point set.

    The footprint is the exact minimum-area enclosing rectangle of the XY
    projection: by the rotating-calipers argument one rectangle side is
    collinear with a convex hull edge, so only hull edge directions are
    tried. Yaw comes back normalized to [0, pi/2); extents are floored at
    EXTENT_EPSILON so degenerate boxes stay usable.

    Raises InsufficientPoints for fewer than 3 points or a horizontally
    collinear/coincident set.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InsufficientPoints("expected an (N, 3) point array")
    if len(pts) < 3:
        raise InsufficientPoints(f"need at least 3 points, got {len(pts)}")
    try:
        hull = ConvexHull(pts[:, :2])
    except QhullError as exc:
        raise InsufficientPoints("points are horizontally collinear or coincident") from exc

    hv = pts[hull.vertices, :2]
    edges = np.diff(np.vstack([hv, hv[:1]]), axis=0)
    angles = np.unique(np.mod(np.arctan2(edges[:, 1], edges[:, 0]), math.pi / 2.0))

    cos = np.cos(angles)
    sin = np.sin(angles)
    # hull points rotated by -angle, one column per candidate angle
    xs = hv[:, :1] * cos + hv[:, 1:] * sin
    ys = -hv[:, :1] * sin + hv[:, 1:] * cos
    areas = (xs.max(axis=0) - xs.min(axis=0)) * (ys.max(axis=0) - ys.min(axis=0))
    yaw = float(angles[int(np.argmin(areas))])

    c, s = math.cos(yaw), math.sin(yaw)
    x = hv[:, 0] * c + hv[:, 1] * s
    y = -hv[:, 0] * s + hv[:, 1] * c
    z = pts[:, 2]
    mx = (x.min() + x.max()) / 2.0
    my = (y.min() + y.max()) / 2.0
    center = np.array([mx * c - my * s, mx * s + my * c, (z.min() + z.max()) / 2.0])
    extents = np.maximum(
        [x.max() - x.min(), y.max() - y.min(), z.max() - z.min()], EXTENT_EPSILON
    )
    return Obb(center=center, extents=np.asarray(extents, dtype=float), kind="instance", yaw=yaw)


def fit_part_obb(points, affordance: str | None = None) -> Obb:
    """Fit a free box along the principal axes of the point covariance.

    The basis columns are eigenvectors in descending eigenvalue order with
    a deterministic sign (dominant component positive) and a right-handed
    third axis. Coplanar inputs are fine; the flat extent is floored.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise InsufficientPoints(f"need at least 3 points, got {0 if pts.ndim != 2 else len(pts)}")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / len(pts)
    _, evecs = np.linalg.eigh(cov)  # ascending eigenvalues
    basis = evecs[:, ::-1].copy()
    for k in range(2):
        col = basis[:, k]
        if col[int(np.argmax(np.abs(col)))] < 0:
            basis[:, k] = -col
    basis[:, 2] = np.cross(basis[:, 0], basis[:, 1])

    proj = centered @ basis
    lo = proj.min(axis=0)
    hi = proj.max(axis=0)
    center = mean + basis @ ((lo + hi) / 2.0)
    extents = np.maximum(hi - lo, EXTENT_EPSILON)
    return Obb(center=center, extents=extents, kind="part", rotation=basis, affordance=affordance)


def _best_face(obb: Obb, vx: float, vy: float) -> Vec2:
    """The horizontal face normal with the largest dot product against (vx, vy)."""
    best = None
    best_dot = -math.inf
    for nx, ny in obb.face_normals_2d():
        dot = nx * vx + ny * vy
        if dot > best_dot:
            best = (nx, ny)
            best_dot = dot
    return best


def estimate_front(
    obb: Obb,
    category: str,
    normals,
    parts: dict[str, Obb],
    *,
    long_axis_categories: frozenset[str] = LONG_AXIS_CATEGORIES,
    frontless_categories: frozenset[str] = FRONTLESS_CATEGORIES,
) -> Obb:
    """Attach a front direction to an instance box (see module docstring).

    When the extension rule is reached but the mean horizontally-projected
    normal is degenerate (below 1e-6), the front is left absent and a
    warning is logged.
    """
    if obb.kind != "instance":
        raise ValueError("front estimation applies to instance boxes")

    sittable = parts.get("sittable")
    leanable = parts.get("leanable")
    if sittable is not None and leanable is not None:
        vx = float(sittable.center[0]) - float(leanable.center[0])
        vy = float(sittable.center[1]) - float(leanable.center[1])
        if math.hypot(vx, vy) > 1e-9:
            return replace(obb, front=_best_face(obb, vx, vy), front_rule="affordance")

    if category in frontless_categories:
        return obb

    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    mean = normals[:, :2].mean(axis=0) if len(normals) else np.zeros(2)
    mx, my = float(mean[0]), float(mean[1])
    if math.hypot(mx, my) < 1e-6:
        logger.warning("degenerate normals for category %r; front left unset", category)
        return obb

    faces = obb.face_normals_2d()  # [+x, +y, -x, -y] in the box frame
    pair_along = (faces[0], faces[2]) if obb.extents[0] >= obb.extents[1] else (faces[1], faces[3])
    pair_perp = (faces[1], faces[3]) if obb.extents[0] >= obb.extents[1] else (faces[0], faces[2])
    cand, opposite = pair_along if category in long_axis_categories else pair_perp
    front = cand if (cand[0] * mx + cand[1] * my) >= (opposite[0] * mx + opposite[1] * my) else opposite
    return replace(obb, front=front, front_rule="extension")


def abstract_instance(
    record: InstanceRecord,
    *,
    long_axis_categories: frozenset[str] = LONG_AXIS_CATEGORIES,
    frontless_categories: frozenset[str] = FRONTLESS_CATEGORIES,
) -> AbstractedInstance:
    """Fit the instance box, the per-part boxes, and the front direction.

    A part whose fit fails is dropped with a warning; a failed instance
    fit propagates InsufficientPoints.
    """
    obb = fit_zobb(record.points)
    part_obbs: dict[str, Obb] = {}
    for token in sorted(record.parts):
        try:
            part_obbs[token] = fit_part_obb(record.parts[token], affordance=token)
        except InsufficientPoints as exc:
            logger.warning("instance %d: dropping part %r (%s)", record.instance_id, token, exc)
    obb = estimate_front(
        obb,
        record.category,
        record.normals,
        part_obbs,
        long_axis_categories=long_axis_categories,
        frontless_categories=frontless_categories,
    )
    return AbstractedInstance(
        instance_id=record.instance_id,
        category=record.category,
        obb=obb,
        part_obbs=part_obbs,
        attributes=frozenset(part_obbs),
    )
