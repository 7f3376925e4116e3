"""Embedding the content pattern into the scene and synthesizing poses.

Matching is a backtracking search for injective node mappings that respect
categories, required affordances, and edge labels. Query nodes are tried
in ascending id order with candidate instances in ascending id order, so
results come out in lexicographic order of the mapped id tuples and the
first result is the deterministic pick. An `adjacent` scene edge satisfies
a `near` requirement (the tighter distance tier subsumes the looser one).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .abstraction import AbstractedInstance, Obb
from .content import ACTION_TOKENS, ContentGraph, MatchingGraph, derive_matching_graph
from .errors import EmptyMatchingGraph, MissingActionTarget, MissingRequiredPart
from .relations import support_surface
from .scene_graph import SceneGraph

logger = logging.getLogger(__name__)

DEFAULT_EMBEDDING_LIMIT = 64
DEFAULT_STANDOFF = 0.3

Embedding = dict[str, int]


@dataclass(frozen=True)
class Placement:
    """Pose for one content node, bound to the matched anchor instance."""

    content_node_id: str
    position: tuple[float, float, float]
    yaw: float
    anchor_instance: int
    action: str

    def to_record(self) -> dict:
        return {
            "content": self.content_node_id,
            "anchor": self.anchor_instance,
            "action": self.action,
            "position": [self.position[0], self.position[1], self.position[2]],
            "yaw": self.yaw,
        }


@dataclass(frozen=True)
class Arrangement:
    """One embedding together with the placements derived from it."""

    embedding: Embedding
    placements: tuple[Placement, ...]


def _edge_satisfied(graph: SceneGraph, sub: int, obj: int, label: str) -> bool:
    if (sub, obj, label) in graph.edges:
        return True
    return label == "near" and (sub, obj, "adjacent") in graph.edges


def embedding_is_valid(embedding: Embedding, graph: SceneGraph, query: MatchingGraph) -> bool:
    """Full recheck of an embedding against the scene graph."""
    mapped = set()
    for node in query.nodes:
        instance_id = embedding.get(node.id)
        if instance_id is None or instance_id in mapped:
            return False
        mapped.add(instance_id)
        instance = graph.nodes.get(instance_id)
        if instance is None:
            return False
        if instance.category != node.category:
            return False
        if not node.required_affordances <= instance.attributes:
            return False
    return all(
        _edge_satisfied(graph, embedding[e.sub], embedding[e.obj], e.label)
        for e in query.edges
    )


def find_embeddings(
    graph: SceneGraph, query: MatchingGraph, limit: int = DEFAULT_EMBEDDING_LIMIT
) -> list[Embedding]:
    """All injective label-compatible embeddings of the query, up to `limit`.

    Deterministic order: lexicographic over the mapped instance-id tuples
    with query nodes sorted by id. Returns an empty list when there is no
    match.
    """
    if not query.nodes:
        raise EmptyMatchingGraph("cannot match an empty query")
    order = sorted(node.id for node in query.nodes)
    nodes_by_id = {node.id: node for node in query.nodes}

    candidates: dict[str, list[int]] = {}
    for query_id in order:
        node = nodes_by_id[query_id]
        candidates[query_id] = [
            instance_id
            for instance_id in sorted(graph.nodes)
            if graph.nodes[instance_id].category == node.category
            and node.required_affordances <= graph.nodes[instance_id].attributes
        ]

    # edges checkable as soon as the i-th query node is assigned
    checks: list[list[tuple[str, str, str]]] = [[] for _ in order]
    position = {query_id: i for i, query_id in enumerate(order)}
    for edge in query.edges:
        checks[max(position[edge.sub], position[edge.obj])].append(
            (edge.sub, edge.obj, edge.label)
        )

    results: list[Embedding] = []
    mapping: Embedding = {}
    used: set[int] = set()

    def backtrack(i: int) -> None:
        if len(results) >= limit:
            return
        if i == len(order):
            assert embedding_is_valid(mapping, graph, query)
            results.append(dict(mapping))
            return
        query_id = order[i]
        for instance_id in candidates[query_id]:
            if instance_id in used:
                continue
            mapping[query_id] = instance_id
            if all(
                _edge_satisfied(graph, mapping[sub], mapping[obj], label)
                for sub, obj, label in checks[i]
            ):
                used.add(instance_id)
                backtrack(i + 1)
                used.discard(instance_id)
            del mapping[query_id]
            if len(results) >= limit:
                return

    backtrack(0)
    return results


def select_embedding(embeddings: list[Embedding]) -> Embedding | None:
    """First embedding in the deterministic search order, if any."""
    return embeddings[0] if embeddings else None


def _front_yaw_or_zero(instance: AbstractedInstance, action: str) -> float:
    yaw = instance.obb.front_yaw()
    if yaw is None:
        if action in ("sitting_on",):
            logger.warning(
                "anchor %d has no front; %s placement yaw defaults to 0",
                instance.instance_id,
                action,
            )
        return 0.0
    return yaw


def _outward_axis(part: Obb, instance: AbstractedInstance) -> np.ndarray:
    """Unit normal of the part's thin face, pointing away from the instance."""
    k = int(np.argmin(part.extents))
    axis = part.basis[:, k].copy()
    toward = part.center - instance.obb.center
    side = float(axis @ toward)
    if side < 0:
        axis = -axis
    elif side == 0.0:
        front = instance.obb.front
        if front is not None and axis[0] * front[0] + axis[1] * front[1] < 0:
            axis = -axis
    return axis


def _horizontal_unit(vec) -> tuple[float, float] | None:
    norm = math.hypot(float(vec[0]), float(vec[1]))
    if norm < 1e-9:
        return None
    return float(vec[0]) / norm, float(vec[1]) / norm


def compute_placement(
    graph: SceneGraph,
    content: ContentGraph,
    embedding: Embedding,
    content_node_id: str,
    *,
    standoff: float = DEFAULT_STANDOFF,
) -> Placement:
    """Pose the content node against its first mapped action target.

    sitting_on  -> seat-part top-face center (whole box top as fallback),
                   heading along the anchor's front;
    placed_on / standing_on -> support-surface top-face center, heading
                   along the anchor's front or 0;
    pushing / opening -> the pushable/openable part center offset outward
                   by `standoff`, heading back toward the part;
    leaning_on  -> the leanable part's front-face center, heading away
                   from the part.
    """
    action_edges = [
        e for e in content.edges if e.sub == content_node_id and e.label in ACTION_TOKENS
    ]
    mapped = [e for e in action_edges if e.obj in embedding]
    if not mapped:
        raise MissingActionTarget(
            f"content node {content_node_id!r} has no action edge into the embedding"
        )
    edge = mapped[0]
    instance = graph.nodes[embedding[edge.obj]]
    action = edge.label

    if action == "sitting_on":
        box = instance.part_obbs.get("sittable", instance.obb)
        position = box.top_face_center()
        yaw = _front_yaw_or_zero(instance, action)
    elif action in ("placed_on", "standing_on"):
        position = support_surface(instance).top_face_center()
        yaw = _front_yaw_or_zero(instance, action)
    elif action in ("pushing", "opening"):
        token = "pushable" if action == "pushing" else "openable"
        part = instance.part_obbs.get(token)
        if part is None:
            raise MissingRequiredPart(
                f"instance {instance.instance_id} has no {token!r} part for {action!r}"
            )
        outward = _outward_axis(part, instance)
        position = part.center + standoff * outward
        facing = _horizontal_unit(-outward)
        yaw = 0.0 if facing is None else math.atan2(facing[1], facing[0]) % (2.0 * math.pi)
    elif action == "leaning_on":
        part = instance.part_obbs.get("leanable")
        if part is None:
            raise MissingRequiredPart(
                f"instance {instance.instance_id} has no 'leanable' part for leaning"
            )
        front2 = instance.obb.front
        if front2 is None:
            outward3 = _outward_axis(part, instance)
            front2 = _horizontal_unit(outward3) or (1.0, 0.0)
        direction = np.array([front2[0], front2[1], 0.0])
        half = 0.5 * float(np.abs(direction @ part.basis) @ part.extents)
        position = part.center + direction * half
        yaw = math.atan2(front2[1], front2[0]) % (2.0 * math.pi)
    else:  # pragma: no cover - vocabulary is closed at parse time
        raise MissingActionTarget(f"unhandled action {action!r}")

    return Placement(
        content_node_id=content_node_id,
        position=(float(position[0]), float(position[1]), float(position[2])),
        yaw=float(yaw),
        anchor_instance=instance.instance_id,
        action=action,
    )


def arrange(
    graph: SceneGraph,
    content: ContentGraph,
    *,
    limit: int = DEFAULT_EMBEDDING_LIMIT,
    standoff: float = DEFAULT_STANDOFF,
) -> Arrangement | None:
    """Match the content pattern and place every content node.

    Embeddings are tried in deterministic order; one that cannot be posed
    (say, pushing with no pushable part on the matched anchor) is skipped
    with a warning.
    """
    query = derive_matching_graph(content)
    for embedding in find_embeddings(graph, query, limit=limit):
        try:
            placements = tuple(
                compute_placement(graph, content, embedding, node.id, standoff=standoff)
                for node in content.content_nodes()
            )
        except (MissingActionTarget, MissingRequiredPart) as exc:
            logger.warning("skipping embedding %s: %s", embedding, exc)
            continue
        return Arrangement(embedding=embedding, placements=placements)
    return None


def rearrange_on_update(
    previous: Arrangement | None,
    graph: SceneGraph,
    content: ContentGraph,
    *,
    limit: int = DEFAULT_EMBEDDING_LIMIT,
    standoff: float = DEFAULT_STANDOFF,
) -> Arrangement | None:
    """Re-run matching after a graph update, preferring the standing result.

    While the previous embedding stays valid the previous placements are
    kept verbatim, so content does not drift while its context holds.
    Returns None when the content must be withdrawn.
    """
    if previous is not None and embedding_is_valid(
        previous.embedding, graph, derive_matching_graph(content)
    ):
        return previous
    return arrange(graph, content, limit=limit, standoff=standoff)
