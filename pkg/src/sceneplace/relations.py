"""Pairwise spatial relations between abstracted instances.

Directional labels place the subject's center in one of four bands around
the object's footprint, expressed in the frame whose +x axis is the
object's front (+y is its left). Distance labels grade the horizontal gap
between the two footprint boundaries along the center-to-center segment;
`adjacent` and `near` are exclusive tiers, adjacent being the tighter one.
Support labels compare the subject's bottom plane against the object's
support surface (its seat or shelf part box when present, the whole box
otherwise) while the subject's center sits over the object's footprint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .abstraction import AbstractedInstance, Footprint, Obb
from .errors import FrontMissing

RELATION_LABELS = frozenset(
    {
        "in_front_of",
        "behind",
        "on_left",
        "on_right",
        "near",
        "adjacent",
        "on",
        "above",
        "under",
    }
)

DIRECTIONAL_LABELS = frozenset({"in_front_of", "behind", "on_left", "on_right"})
DISTANCE_LABELS = frozenset({"near", "adjacent"})
SUPPORT_LABELS = frozenset({"on", "above", "under"})


@dataclass(frozen=True)
class RelationThresholds:
    """Engine thresholds; the band offset widens directional validity areas."""

    d_offset: float = 0.5
    d_adjacent: float = 0.1
    d_near: float = 1.0
    d_support: float = 0.1

    def __post_init__(self):
        if min(self.d_offset, self.d_adjacent, self.d_near, self.d_support) < 0:
            raise ValueError("thresholds must be non-negative")
        if self.d_adjacent >= self.d_near:
            raise ValueError("d_adjacent must be smaller than d_near")


def support_surface(instance: AbstractedInstance) -> Obb:
    """The box support is measured against: seat, else shelf part, else the box."""
    for token in ("sittable", "supportable"):
        part = instance.part_obbs.get(token)
        if part is not None:
            return part
    return instance.obb


def _half_extent_along(fp: Footprint, dx: float, dy: float) -> float:
    """Half width of the footprint along the (unit) direction (dx, dy)."""
    return fp.h0 * abs(dx * fp.u0[0] + dy * fp.u0[1]) + fp.h1 * abs(
        dx * fp.u1[0] + dy * fp.u1[1]
    )


def _contains_xy(fp: Footprint, x: float, y: float) -> bool:
    dx, dy = x - fp.cx, y - fp.cy
    return (
        abs(dx * fp.u0[0] + dy * fp.u0[1]) <= fp.h0
        and abs(dx * fp.u1[0] + dy * fp.u1[1]) <= fp.h1
    )


def _footprints_overlap(fa: Footprint, fb: Footprint) -> bool:
    # separating-axis test over both rectangles' axes
    dx, dy = fb.cx - fa.cx, fb.cy - fa.cy
    for ax, ay in (fa.u0, fa.u1, fb.u0, fb.u1):
        ra = _half_extent_along(fa, ax, ay)
        rb = _half_extent_along(fb, ax, ay)
        if abs(dx * ax + dy * ay) > ra + rb:
            return False
    return True


def _ray_exit(fp: Footprint, dx: float, dy: float) -> float:
    """Distance from the footprint center to its boundary along (dx, dy)."""
    r0 = abs(dx * fp.u0[0] + dy * fp.u0[1]) / fp.h0
    r1 = abs(dx * fp.u1[0] + dy * fp.u1[1]) / fp.h1
    return 1.0 / max(r0, r1)


def footprint_gap(fa: Footprint, fb: Footprint) -> float:
    """Horizontal surface-to-surface distance along the center segment.

    Zero when the footprints overlap; exact for these convex footprints
    since the boundary hits are found by slab clamping.
    """
    dx, dy = fb.cx - fa.cx, fb.cy - fa.cy
    dist = math.hypot(dx, dy)
    if dist < 1e-12 or _footprints_overlap(fa, fb):
        return 0.0
    ux, uy = dx / dist, dy / dist
    return max(0.0, dist - _ray_exit(fa, ux, uy) - _ray_exit(fb, -ux, -uy))


def directional(
    s: AbstractedInstance, o: AbstractedInstance, th: RelationThresholds
) -> str | None:
    """Which side of `o` the subject's center falls on, if any.

    Requires `o` to have a front. Centers inside the footprint or in the
    diagonal corner regions yield no label; the four bands are mutually
    exclusive by construction.
    """
    if o.obb.front is None:
        raise FrontMissing(f"instance {o.instance_id} has no front direction")
    fp = o.obb.footprint
    fx, fy = o.obb.front
    lx, ly = -fy, fx  # the object's left
    sx = s.obb.footprint.cx - fp.cx
    sy = s.obb.footprint.cy - fp.cy
    x = sx * fx + sy * fy
    y = sx * lx + sy * ly
    hx = _half_extent_along(fp, fx, fy)
    hy = _half_extent_along(fp, lx, ly)
    # front/back band first: beyond the x faces, within the widened y slab
    if abs(y) <= hy + th.d_offset and abs(x) > hx:
        return "in_front_of" if x > hx else "behind"
    if abs(x) <= hx + th.d_offset and abs(y) > hy:
        return "on_left" if y > hy else "on_right"
    return None


def distance(
    s: AbstractedInstance, o: AbstractedInstance, th: RelationThresholds
) -> str | None:
    """Distance tier for the pair; symmetric in its arguments."""
    gap = footprint_gap(s.obb.footprint, o.obb.footprint)
    if gap <= th.d_adjacent:
        return "adjacent"
    if gap <= th.d_near:
        return "near"
    return None


def support(
    s: AbstractedInstance, o: AbstractedInstance, th: RelationThresholds
) -> str | None:
    """Vertical relation of `s` against `o`'s support surface.

    Only evaluated when the subject's center lies over the object's
    footprint. `on`/`above` measure against the support surface box,
    `under` against the bottom of the whole object box.
    """
    sfp = s.obb.footprint
    if not _contains_xy(o.obb.footprint, sfp.cx, sfp.cy):
        return None
    surface_top = support_surface(o).top_z()
    gap = s.obb.bottom_z() - surface_top
    if abs(gap) <= th.d_support:
        return "on"
    if gap > th.d_support:
        return "above"
    if s.obb.top_z() < o.obb.bottom_z() - th.d_support:
        return "under"
    return None


def relations_for_pair(
    s: AbstractedInstance, o: AbstractedInstance, th: RelationThresholds
) -> set[tuple[int, int, str]]:
    """All relation edges between the pair, as (subject, object, label) triples.

    Runs both directional orders (when the respective object has a front),
    the symmetric distance tier in both directions, and both support
    orders. An empty set means no edge connects the pair.
    """
    edges: set[tuple[int, int, str]] = set()
    if o.obb.front is not None:
        label = directional(s, o, th)
        if label:
            edges.add((s.instance_id, o.instance_id, label))
    if s.obb.front is not None:
        label = directional(o, s, th)
        if label:
            edges.add((o.instance_id, s.instance_id, label))
    label = distance(s, o, th)
    if label:
        edges.add((s.instance_id, o.instance_id, label))
        edges.add((o.instance_id, s.instance_id, label))
    label = support(s, o, th)
    if label:
        edges.add((s.instance_id, o.instance_id, label))
    label = support(o, s, th)
    if label:
        edges.add((o.instance_id, s.instance_id, label))
    return edges
