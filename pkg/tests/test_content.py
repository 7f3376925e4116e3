import json
from pathlib import Path

import pytest

from sceneplace.content import (
    derive_matching_graph,
    parse_content_graph,
    serialize_content_graph,
    validate_content_graph,
)
from sceneplace.errors import (
    DanglingEdge,
    EmptyMatchingGraph,
    SchemaError,
    UnknownAffordance,
    UnknownRelation,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def context_a_text():
    return (FIXTURES / "context_a.json").read_text(encoding="utf-8")


def context_b_text():
    return (FIXTURES / "context_b.json").read_text(encoding="utf-8")


class TestParse:
    def test_context_a(self):
        graph = parse_content_graph(context_a_text())
        assert len(graph.nodes) == 3
        assert len(graph.edges) == 2
        assert {n.id for n in graph.content_nodes()} == {"character"}
        assert {(e.sub, e.obj, e.label) for e in graph.edges} == {
            ("tv", "chair", "in_front_of"),
            ("character", "chair", "sitting_on"),
        }

    def test_unknown_relation(self):
        doc = json.loads(context_a_text())
        doc["edges"][0]["rel"] = "floats_above"
        with pytest.raises(UnknownRelation):
            parse_content_graph(json.dumps(doc))

    def test_dangling_edge(self):
        doc = json.loads(context_a_text())
        doc["edges"][0]["sub"] = "ghost"
        with pytest.raises(DanglingEdge):
            parse_content_graph(json.dumps(doc))

    def test_duplicate_node_id(self):
        doc = json.loads(context_a_text())
        doc["nodes"].append({"id": "tv", "kind": "real", "category": "tv"})
        with pytest.raises(SchemaError):
            parse_content_graph(json.dumps(doc))

    def test_requires_content_node(self):
        doc = {
            "nodes": [{"id": "tv", "kind": "real", "category": "tv"}],
            "edges": [],
        }
        with pytest.raises(SchemaError):
            parse_content_graph(json.dumps(doc))

    def test_unknown_affordance(self):
        doc = json.loads(context_a_text())
        doc["nodes"][1]["affordances"] = ["bouncy"]
        with pytest.raises(UnknownAffordance):
            parse_content_graph(json.dumps(doc))

    def test_action_edge_direction_enforced(self):
        doc = json.loads(context_a_text())
        doc["edges"][1] = {"sub": "chair", "obj": "character", "rel": "sitting_on"}
        with pytest.raises(SchemaError):
            parse_content_graph(json.dumps(doc))

    def test_action_token_between_real_nodes_rejected(self):
        doc = json.loads(context_a_text())
        doc["edges"][0]["rel"] = "sitting_on"
        with pytest.raises(UnknownRelation):
            parse_content_graph(json.dumps(doc))

    def test_relation_token_on_action_edge_rejected(self):
        doc = json.loads(context_a_text())
        doc["edges"][1]["rel"] = "near"
        with pytest.raises(UnknownRelation):
            parse_content_graph(json.dumps(doc))

    def test_serialize_parse_identity(self):
        graph = parse_content_graph(context_a_text())
        assert parse_content_graph(serialize_content_graph(graph)) == graph
        graph_b = parse_content_graph(context_b_text())
        assert parse_content_graph(serialize_content_graph(graph_b)) == graph_b


class TestDeriveMatchingGraph:
    def test_context_a(self):
        query = derive_matching_graph(parse_content_graph(context_a_text()))
        assert {n.id for n in query.nodes} == {"tv", "chair"}
        assert [(e.sub, e.obj, e.label) for e in query.edges] == [
            ("tv", "chair", "in_front_of")
        ]

    def test_context_b(self):
        query = derive_matching_graph(parse_content_graph(context_b_text()))
        assert {n.id for n in query.nodes} == {"table", "sofa"}
        assert [(e.sub, e.obj, e.label) for e in query.edges] == [
            ("table", "sofa", "on_left")
        ]

    def test_only_content_node(self):
        doc = {
            "nodes": [{"id": "ghost", "kind": "content"}],
            "edges": [],
        }
        with pytest.raises(EmptyMatchingGraph):
            derive_matching_graph(parse_content_graph(json.dumps(doc)))

    def test_idempotent_in_effect(self):
        graph = parse_content_graph(context_a_text())
        query = derive_matching_graph(graph)
        real_ids = {n.id for n in query.nodes}
        assert all(e.sub in real_ids and e.obj in real_ids for e in query.edges)
        # applying the removal rule again changes nothing
        assert all(n.kind == "real" for n in query.nodes)

    def test_subgraph_property(self):
        graph = parse_content_graph(context_a_text())
        query = derive_matching_graph(graph)
        assert set(query.nodes) <= set(graph.nodes)
        assert set(query.edges) <= set(graph.edges)


class TestValidate:
    def test_context_a_clean(self):
        assert validate_content_graph(parse_content_graph(context_a_text())) == []

    def test_context_b_clean(self):
        assert validate_content_graph(parse_content_graph(context_b_text())) == []

    def test_sitting_on_table_advisory(self):
        doc = {
            "nodes": [
                {"id": "table", "kind": "real", "category": "table"},
                {"id": "character", "kind": "content"},
            ],
            "edges": [{"sub": "character", "obj": "table", "rel": "sitting_on"}],
        }
        diagnostics = validate_content_graph(parse_content_graph(json.dumps(doc)))
        assert diagnostics
        assert all(d.severity == "advisory" for d in diagnostics)
        assert any("sittable" in d.message for d in diagnostics)

    def test_content_node_without_action_is_error(self):
        doc = {
            "nodes": [
                {"id": "tv", "kind": "real", "category": "tv"},
                {"id": "fairy", "kind": "content"},
            ],
            "edges": [],
        }
        diagnostics = validate_content_graph(parse_content_graph(json.dumps(doc)))
        assert [d.severity for d in diagnostics] == ["error"]
