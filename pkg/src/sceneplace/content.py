"""Designer-authored content graphs and their matching form.

A content graph document is JSON:

    {
      "nodes": [
        {"id": "tv", "kind": "real", "category": "tv", "affordances": []},
        {"id": "character", "kind": "content", "category": "character"}
      ],
      "edges": [
        {"sub": "tv", "obj": "chair", "rel": "in_front_of"},
        {"sub": "character", "obj": "chair", "rel": "sitting_on"}
      ]
    }

Real-to-real edges use the nine spatial relation tokens. Edges incident to
a content node are action edges, always directed content -> real, with a
label from ACTION_TOKENS. The matching form of the graph drops content
nodes and action edges; it is the pattern searched for inside the live
scene graph. An optional per-node "attributes" object is accepted and
preserved but ignored by matching.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .abstraction import FRONTLESS_CATEGORIES
from .errors import (
    DanglingEdge,
    EmptyMatchingGraph,
    SchemaError,
    UnknownAffordance,
    UnknownRelation,
)
from .relations import RELATION_LABELS
from .semantic_map import AFFORDANCE_TOKENS

ACTION_TOKENS = frozenset(
    {"sitting_on", "standing_on", "placed_on", "pushing", "leaning_on", "opening"}
)

# affordance a given action is normally anchored to
ACTION_AFFORDANCE_HINTS = {
    "sitting_on": "sittable",
    "standing_on": "supportable",
    "placed_on": "supportable",
    "pushing": "pushable",
    "opening": "openable",
    "leaning_on": "leanable",
}

# actions whose pose is derived from the target's front direction
FRONT_DEPENDENT_ACTIONS = frozenset({"sitting_on", "leaning_on"})

# which affordances a category plausibly offers; used only for diagnostics
CATEGORY_EXPECTED_AFFORDANCES = {
    "chair": {"sittable", "leanable"},
    "sofa": {"sittable", "leanable", "supportable"},
    "bed": {"sittable", "supportable", "leanable"},
    "table": {"supportable"},
    "desk": {"supportable"},
    "shelf": {"supportable"},
    "bookshelf": {"supportable"},
    "cabinet": {"supportable", "openable"},
    "door": {"openable", "pushable"},
    "remote": {"pushable"},
}


@dataclass(frozen=True)
class ContentNode:
    id: str
    kind: str  # "real" | "content"
    category: str = ""
    required_affordances: frozenset[str] = frozenset()
    attributes: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ContentEdge:
    sub: str
    obj: str
    label: str


@dataclass(frozen=True)
class ContentGraph:
    nodes: tuple[ContentNode, ...]
    edges: tuple[ContentEdge, ...]

    def node_by_id(self, node_id: str) -> ContentNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def content_nodes(self) -> tuple[ContentNode, ...]:
        return tuple(n for n in self.nodes if n.kind == "content")

    def real_nodes(self) -> tuple[ContentNode, ...]:
        return tuple(n for n in self.nodes if n.kind == "real")

    def action_edges(self, content_node_id: str | None = None) -> tuple[ContentEdge, ...]:
        edges = tuple(e for e in self.edges if e.label in ACTION_TOKENS)
        if content_node_id is None:
            return edges
        return tuple(e for e in edges if e.sub == content_node_id)


@dataclass(frozen=True)
class MatchingGraph:
    """Real-node subgraph of a content graph; never contains action edges."""

    nodes: tuple[ContentNode, ...]
    edges: tuple[ContentEdge, ...]


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "advisory"
    subject: str
    message: str


def _parse_node(entry: dict, index: int) -> ContentNode:
    if not isinstance(entry, dict):
        raise SchemaError(f"node {index}: expected an object")
    node_id = entry.get("id")
    kind = entry.get("kind")
    if not isinstance(node_id, str) or not node_id:
        raise SchemaError(f"node {index}: missing or empty id")
    if kind not in ("real", "content"):
        raise SchemaError(f"node {node_id!r}: kind must be 'real' or 'content'")
    category = entry.get("category", "")
    if kind == "real" and (not isinstance(category, str) or not category):
        raise SchemaError(f"node {node_id!r}: real nodes need a category")
    affordances = entry.get("affordances", [])
    if not isinstance(affordances, list):
        raise SchemaError(f"node {node_id!r}: affordances must be a list")
    for token in affordances:
        if token not in AFFORDANCE_TOKENS:
            raise UnknownAffordance(f"node {node_id!r}: unknown affordance {token!r}")
    attributes = entry.get("attributes", {})
    if not isinstance(attributes, dict):
        raise SchemaError(f"node {node_id!r}: attributes must be an object")
    return ContentNode(
        id=node_id,
        kind=kind,
        category=category if isinstance(category, str) else "",
        required_affordances=frozenset(affordances),
        attributes=tuple(sorted((str(k), str(v)) for k, v in attributes.items())),
    )


def parse_content_graph(text: str) -> ContentGraph:
    """Parse and validate a content graph document.

    Raises SchemaError for structural problems, UnknownRelation /
    UnknownAffordance for bad tokens, and DanglingEdge for edges against
    undeclared nodes.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("expected a top-level object")
    if not isinstance(doc.get("nodes"), list) or not isinstance(doc.get("edges"), list):
        raise SchemaError("expected 'nodes' and 'edges' lists")

    nodes = tuple(_parse_node(entry, i) for i, entry in enumerate(doc["nodes"]))
    by_id = {}
    for node in nodes:
        if node.id in by_id:
            raise SchemaError(f"duplicate node id {node.id!r}")
        by_id[node.id] = node
    if not any(node.kind == "content" for node in nodes):
        raise SchemaError("a content graph needs at least one content node")

    edges = []
    for i, entry in enumerate(doc["edges"]):
        if not isinstance(entry, dict):
            raise SchemaError(f"edge {i}: expected an object")
        sub, obj, label = entry.get("sub"), entry.get("obj"), entry.get("rel")
        if sub not in by_id or obj not in by_id:
            raise DanglingEdge(f"edge {i}: undeclared node in ({sub!r}, {obj!r})")
        sub_node, obj_node = by_id[sub], by_id[obj]
        if sub_node.kind == "real" and obj_node.kind == "real":
            if label not in RELATION_LABELS:
                raise UnknownRelation(f"edge {i}: {label!r} is not a relation token")
        else:
            if sub_node.kind != "content" or obj_node.kind != "real":
                raise SchemaError(
                    f"edge {i}: action edges must run from a content node to a real node"
                )
            if label not in ACTION_TOKENS:
                raise UnknownRelation(f"edge {i}: {label!r} is not an action token")
        edges.append(ContentEdge(sub=sub, obj=obj, label=label))

    return ContentGraph(nodes=nodes, edges=tuple(edges))


def serialize_content_graph(graph: ContentGraph) -> str:
    doc = {
        "nodes": [
            {
                "id": node.id,
                "kind": node.kind,
                "category": node.category,
                "affordances": sorted(node.required_affordances),
                "attributes": {k: v for k, v in node.attributes},
            }
            for node in graph.nodes
        ],
        "edges": [{"sub": e.sub, "obj": e.obj, "rel": e.label} for e in graph.edges],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_content_graph(path) -> ContentGraph:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_content_graph(handle.read())


def derive_matching_graph(graph: ContentGraph) -> MatchingGraph:
    """Drop content nodes and action edges, keeping the real-node pattern."""
    real = graph.real_nodes()
    if not real:
        raise EmptyMatchingGraph("content graph has no real nodes")
    real_ids = {node.id for node in real}
    edges = tuple(
        e for e in graph.edges if e.sub in real_ids and e.obj in real_ids
    )
    return MatchingGraph(nodes=real, edges=edges)


def validate_content_graph(
    graph: ContentGraph,
    *,
    frontless_categories: frozenset[str] = FRONTLESS_CATEGORIES,
) -> list[Diagnostic]:
    """Authoring lint; returns diagnostics instead of failing.

    Error severity: a content node without any action edge can never be
    placed. Advisory severity: a front-dependent action against a
    frontless category, or an action whose usual affordance is not
    expected for the target's category.
    """
    diagnostics = []
    for node in graph.content_nodes():
        if not graph.action_edges(node.id):
            diagnostics.append(
                Diagnostic(
                    severity="error",
                    subject=node.id,
                    message=f"content node {node.id!r} has no action edge and cannot be placed",
                )
            )
    for edge in graph.action_edges():
        target = graph.node_by_id(edge.obj)
        if edge.label in FRONT_DEPENDENT_ACTIONS and target.category in frontless_categories:
            diagnostics.append(
                Diagnostic(
                    severity="advisory",
                    subject=f"{edge.sub}->{edge.obj}",
                    message=(
                        f"action {edge.label!r} uses the target front, but category "
                        f"{target.category!r} carries no front direction"
                    ),
                )
            )
        hint = ACTION_AFFORDANCE_HINTS.get(edge.label)
        expected = CATEGORY_EXPECTED_AFFORDANCES.get(target.category)
        if hint and expected is not None and hint not in expected:
            diagnostics.append(
                Diagnostic(
                    severity="advisory",
                    subject=f"{edge.sub}->{edge.obj}",
                    message=(
                        f"action {edge.label!r} prefers a {hint!r} part, but no "
                        f"{hint!r} is expected on category {target.category!r}"
                    ),
                )
            )
    return diagnostics
