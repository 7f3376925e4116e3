"""Directed scene graph over abstracted instances.

Nodes are instances keyed by id; edges are (subject, object, label)
triples with labels from the nine-token relation vocabulary. Graphs are
immutable values: updates return a new graph, so matching may keep
reading an old version while the next one is built.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .abstraction import AbstractedInstance, Obb
from .errors import DanglingEdge, DuplicateInstanceId, UnknownRelation, UnsupportedFormat
from .relations import RELATION_LABELS, RelationThresholds, relations_for_pair
from .semantic_map import AFFORDANCE_TOKENS
from .errors import UnknownAffordance, SchemaError

Edge = tuple[int, int, str]


@dataclass(frozen=True)
class SceneGraph:
    nodes: dict[int, AbstractedInstance]
    edges: frozenset[Edge]
    version: int = 0


def empty_graph(version: int = 0) -> SceneGraph:
    return SceneGraph(nodes={}, edges=frozenset(), version=version)


def build_graph(
    instances: Iterable[AbstractedInstance],
    thresholds: RelationThresholds,
    version: int = 0,
) -> SceneGraph:
    """Evaluate every relation over all ordered instance pairs."""
    nodes: dict[int, AbstractedInstance] = {}
    for instance in instances:
        if instance.instance_id in nodes:
            raise DuplicateInstanceId(f"instance id {instance.instance_id} appears twice")
        nodes[instance.instance_id] = instance
    edges: set[Edge] = set()
    ids = sorted(nodes)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            edges |= relations_for_pair(nodes[a], nodes[b], thresholds)
    return SceneGraph(nodes=dict(sorted(nodes.items())), edges=frozenset(edges), version=version)


def update_graph(
    graph: SceneGraph,
    changed: set[int],
    instances: Iterable[AbstractedInstance],
    thresholds: RelationThresholds,
    version: int | None = None,
) -> SceneGraph:
    """Refresh the graph after a map update.

    Every edge incident to a changed, added, or removed instance is
    re-derived; edges between two untouched instances carry over. The
    result equals build_graph over the current instances.
    """
    current: dict[int, AbstractedInstance] = {}
    for instance in instances:
        if instance.instance_id in current:
            raise DuplicateInstanceId(f"instance id {instance.instance_id} appears twice")
        current[instance.instance_id] = instance

    dirty = set(changed)
    dirty |= graph.nodes.keys() ^ current.keys()  # added or removed
    carried = {
        (a, b, label)
        for (a, b, label) in graph.edges
        if a not in dirty and b not in dirty and a in current and b in current
    }
    fresh: set[Edge] = set()
    ids = sorted(current)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            if a in dirty or b in dirty:
                fresh |= relations_for_pair(current[a], current[b], thresholds)
    return SceneGraph(
        nodes=dict(sorted(current.items())),
        edges=frozenset(carried | fresh),
        version=graph.version + 1 if version is None else version,
    )


def _node_to_dict(instance: AbstractedInstance) -> dict:
    return {
        "id": instance.instance_id,
        "kind": "real",
        "category": instance.category,
        "affordances": sorted(instance.attributes),
        "obb": instance.obb.to_dict(),
        "parts": {
            token: instance.part_obbs[token].to_dict() for token in sorted(instance.part_obbs)
        },
    }


def export_graph(graph: SceneGraph, format: str = "structured") -> str:
    """Deterministic serialization, either GraphViz DOT or structured JSON."""
    if format == "dot":
        lines = ["digraph scene {"]
        for instance_id in sorted(graph.nodes):
            node = graph.nodes[instance_id]
            lines.append(f'  "{instance_id}" [label="{instance_id}: {node.category}"];')
        for sub, obj, label in sorted(graph.edges):
            lines.append(f'  "{sub}" -> "{obj}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
    if format == "structured":
        doc = {
            "schema": "scene-graph/1",
            "version": graph.version,
            "nodes": [_node_to_dict(graph.nodes[i]) for i in sorted(graph.nodes)],
            "edges": [
                {"sub": sub, "obj": obj, "rel": label}
                for sub, obj, label in sorted(graph.edges)
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise UnsupportedFormat(f"unknown export format {format!r}")


def import_graph(text: str) -> SceneGraph:
    """Parse the structured export back into a graph (front rules are not kept)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise SchemaError("expected an object with 'nodes' and 'edges'")

    nodes: dict[int, AbstractedInstance] = {}
    for entry in doc["nodes"]:
        try:
            instance_id = int(entry["id"])
            category = entry["category"]
            obb = Obb.from_dict(entry["obb"], kind="instance")
            parts = {
                token: Obb.from_dict(part, kind="part", affordance=token)
                for token, part in sorted(entry.get("parts", {}).items())
            }
            affordances = entry.get("affordances", [])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad node entry: {exc}") from exc
        for token in affordances:
            if token not in AFFORDANCE_TOKENS:
                raise UnknownAffordance(f"unknown affordance {token!r}")
        if instance_id in nodes:
            raise DuplicateInstanceId(f"instance id {instance_id} appears twice")
        nodes[instance_id] = AbstractedInstance(
            instance_id=instance_id,
            category=category,
            obb=obb,
            part_obbs=parts,
            attributes=frozenset(affordances),
        )

    edges: set[Edge] = set()
    for entry in doc["edges"]:
        try:
            sub, obj, label = int(entry["sub"]), int(entry["obj"]), entry["rel"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad edge entry: {exc}") from exc
        if label not in RELATION_LABELS:
            raise UnknownRelation(f"unknown relation {label!r}")
        if sub not in nodes or obj not in nodes:
            raise DanglingEdge(f"edge ({sub}, {obj}) references an undeclared node")
        edges.add((sub, obj, label))

    return SceneGraph(
        nodes=dict(sorted(nodes.items())),
        edges=frozenset(edges),
        version=int(doc.get("version", 0)),
    )
