import itertools
import json
import math

import numpy as np
import pytest

from sceneplace.arrangement import (
    arrange,
    compute_placement,
    embedding_is_valid,
    find_embeddings,
    rearrange_on_update,
    select_embedding,
)
from sceneplace.content import parse_content_graph, derive_matching_graph
from sceneplace.errors import MissingRequiredPart
from sceneplace.relations import RelationThresholds, support_surface
from sceneplace.scene_graph import build_graph

from synth import make_instance, make_part

TH = RelationThresholds()


def content_graph(nodes, edges):
    return parse_content_graph(json.dumps({"nodes": nodes, "edges": edges}))


CONTEXT_A = content_graph(
    [
        {"id": "tv", "kind": "real", "category": "tv"},
        {"id": "chair", "kind": "real", "category": "chair"},
        {"id": "character", "kind": "content", "category": "character"},
    ],
    [
        {"sub": "tv", "obj": "chair", "rel": "in_front_of"},
        {"sub": "character", "obj": "chair", "rel": "sitting_on"},
    ],
)


def chair_instance(iid, x=0.0, y=0.0):
    seat = make_part((x, y + 0.05, 0.44), (0.4, 0.4, 0.04), affordance="sittable")
    lean = make_part((x, y - 0.2, 0.7), (0.4, 0.06, 0.5), affordance="leanable")
    return make_instance(
        iid, "chair", (x, y, 0.45), (0.5, 0.55, 0.9), front_axis=1,
        parts={"sittable": seat, "leanable": lean},
    )


def tv_instance(iid, x=0.0, y=2.5):
    return make_instance(iid, "tv", (x, y, 0.8), (1.0, 0.1, 0.6), front_axis=3)


def exhaustive_embeddings(graph, query):
    """Oracle: filter all injective mappings by the same compatibility rule."""
    order = sorted(node.id for node in query.nodes)
    nodes = {node.id: node for node in query.nodes}
    found = []
    for assignment in itertools.permutations(sorted(graph.nodes), len(order)):
        mapping = dict(zip(order, assignment))
        ok = all(
            graph.nodes[mapping[qid]].category == nodes[qid].category
            and nodes[qid].required_affordances <= graph.nodes[mapping[qid]].attributes
            for qid in order
        )
        if not ok:
            continue
        if all(
            (mapping[e.sub], mapping[e.obj], e.label) in graph.edges
            or (e.label == "near" and (mapping[e.sub], mapping[e.obj], "adjacent") in graph.edges)
            for e in query.edges
        ):
            found.append(mapping)
    return found


class TestFindEmbeddings:
    def test_context_a_single_match(self):
        graph = build_graph([chair_instance(3), tv_instance(7)], TH)
        query = derive_matching_graph(CONTEXT_A)
        embeddings = find_embeddings(graph, query)
        assert embeddings == [{"chair": 3, "tv": 7}]

    def test_two_chairs_ordered_by_id(self):
        graph = build_graph(
            [chair_instance(9), chair_instance(3, x=0.5), tv_instance(7)], TH
        )
        query = derive_matching_graph(CONTEXT_A)
        embeddings = find_embeddings(graph, query)
        assert [e["chair"] for e in embeddings] == [3, 9]

    def test_absent_label_no_match(self):
        graph = build_graph([chair_instance(3), tv_instance(7)], TH)
        query = derive_matching_graph(
            content_graph(
                [
                    {"id": "tv", "kind": "real", "category": "tv"},
                    {"id": "chair", "kind": "real", "category": "chair"},
                    {"id": "character", "kind": "content"},
                ],
                [
                    {"sub": "tv", "obj": "chair", "rel": "behind"},
                    {"sub": "character", "obj": "chair", "rel": "sitting_on"},
                ],
            )
        )
        assert find_embeddings(graph, query) == []

    def test_adjacent_satisfies_near(self):
        a = make_instance(0, "table", (0, 0, 0.35), (1.0, 1.0, 0.7))
        b = make_instance(1, "chair", (1.05, 0, 0.45), (1.0, 0.5, 0.9))
        graph = build_graph([a, b], TH)
        assert (1, 0, "adjacent") in graph.edges
        query = derive_matching_graph(
            content_graph(
                [
                    {"id": "chair", "kind": "real", "category": "chair"},
                    {"id": "table", "kind": "real", "category": "table"},
                    {"id": "character", "kind": "content"},
                ],
                [
                    {"sub": "chair", "obj": "table", "rel": "near"},
                    {"sub": "character", "obj": "chair", "rel": "sitting_on"},
                ],
            )
        )
        assert find_embeddings(graph, query) == [{"chair": 1, "table": 0}]

    def test_required_affordance_filters(self):
        bare = make_instance(1, "chair", (0, 0, 0.45), (0.5, 0.5, 0.9))
        graph = build_graph([bare, chair_instance(2, x=3.0)], TH)
        query = derive_matching_graph(
            content_graph(
                [
                    {"id": "chair", "kind": "real", "category": "chair",
                     "affordances": ["sittable"]},
                    {"id": "character", "kind": "content"},
                ],
                [{"sub": "character", "obj": "chair", "rel": "sitting_on"}],
            )
        )
        assert find_embeddings(graph, query) == [{"chair": 2}]

    def test_limit(self):
        chairs = [chair_instance(i, x=3.0 * i) for i in range(6)]
        graph = build_graph(chairs, TH)
        query = derive_matching_graph(
            content_graph(
                [
                    {"id": "chair", "kind": "real", "category": "chair"},
                    {"id": "character", "kind": "content"},
                ],
                [{"sub": "character", "obj": "chair", "rel": "sitting_on"}],
            )
        )
        assert [e["chair"] for e in find_embeddings(graph, query, limit=3)] == [0, 1, 2]

    def test_matches_exhaustive_oracle_on_random_graphs(self):
        rng = np.random.default_rng(6)
        categories = ["chair", "table", "tv"]
        labels = ["near", "on", "in_front_of"]
        for _ in range(30):
            n = int(rng.integers(2, 7))
            instances = [
                make_instance(i, str(rng.choice(categories)), (9.0 * i, 0, 0.5), (1, 1, 1))
                for i in range(n)
            ]
            graph = build_graph(instances, TH)
            extra = {
                (int(a), int(b), str(rng.choice(labels)))
                for a, b in rng.integers(0, n, size=(n * 2, 2))
                if a != b
            }
            graph = type(graph)(nodes=graph.nodes, edges=frozenset(extra), version=0)
            q_nodes = [
                {"id": f"q{k}", "kind": "real", "category": str(rng.choice(categories))}
                for k in range(int(rng.integers(1, 4)))
            ]
            q_edges = []
            if len(q_nodes) > 1:
                for _ in range(int(rng.integers(0, 3))):
                    i, j = rng.choice(len(q_nodes), size=2, replace=False)
                    q_edges.append(
                        {"sub": q_nodes[i]["id"], "obj": q_nodes[j]["id"],
                         "rel": str(rng.choice(labels))}
                    )
            q_nodes.append({"id": "zz_content", "kind": "content"})
            q_edges.append({"sub": "zz_content", "obj": q_nodes[0]["id"], "rel": "placed_on"})
            query = derive_matching_graph(content_graph(q_nodes, q_edges))
            got = find_embeddings(graph, query, limit=10_000)
            expected = exhaustive_embeddings(graph, query)
            assert sorted(got, key=lambda m: sorted(m.items())) == sorted(
                expected, key=lambda m: sorted(m.items())
            )


class TestSelectEmbedding:
    def test_rules(self):
        assert select_embedding([]) is None
        assert select_embedding([{"a": 3}]) == {"a": 3}
        assert select_embedding([{"a": 3}, {"a": 7}]) == {"a": 3}


class TestComputePlacement:
    def test_sitting_on_seat_top_center(self):
        seat = make_part((1.0, 2.0, 0.43), (0.4, 0.4, 0.04), affordance="sittable")
        lean = make_part((1.0, 1.75, 0.7), (0.4, 0.06, 0.5), affordance="leanable")
        chair = make_instance(3, "chair", (1.0, 2.0, 0.45), (0.5, 0.55, 0.9),
                              front_axis=1, parts={"sittable": seat, "leanable": lean})
        graph = build_graph([chair, tv_instance(7, x=1.0, y=4.5)], TH)
        placement = compute_placement(
            graph, CONTEXT_A, {"chair": 3, "tv": 7}, "character"
        )
        assert placement.anchor_instance == 3
        assert placement.action == "sitting_on"
        np.testing.assert_allclose(placement.position, [1.0, 2.0, 0.45], atol=1e-12)
        assert placement.yaw == pytest.approx(math.pi / 2, abs=1e-12)

    def test_placed_on_table_top(self):
        table = make_instance(4, "table", (0, 0, 0.36), (1.2, 0.8, 0.72))
        graph = build_graph([table], TH)
        content = content_graph(
            [
                {"id": "table", "kind": "real", "category": "table"},
                {"id": "lamp", "kind": "content"},
            ],
            [{"sub": "lamp", "obj": "table", "rel": "placed_on"}],
        )
        placement = compute_placement(graph, content, {"table": 4}, "lamp")
        np.testing.assert_allclose(placement.position, [0.0, 0.0, 0.72], atol=1e-12)
        assert placement.yaw == 0.0

    def test_pushing_requires_part(self):
        remote = make_instance(5, "remote", (0, 0, 0.74), (0.15, 0.05, 0.04))
        graph = build_graph([remote], TH)
        content = content_graph(
            [
                {"id": "remote", "kind": "real", "category": "remote"},
                {"id": "character", "kind": "content"},
            ],
            [{"sub": "character", "obj": "remote", "rel": "pushing"}],
        )
        with pytest.raises(MissingRequiredPart):
            compute_placement(graph, content, {"remote": 5}, "character")

    def test_pushing_offsets_outward(self):
        buttons = make_part((0.0, 0.0, 0.76), (0.12, 0.04, 0.004), affordance="pushable")
        remote = make_instance(5, "remote", (0, 0, 0.74), (0.15, 0.05, 0.05),
                               parts={"pushable": buttons})
        graph = build_graph([remote], TH)
        content = content_graph(
            [
                {"id": "remote", "kind": "real", "category": "remote"},
                {"id": "character", "kind": "content"},
            ],
            [{"sub": "character", "obj": "remote", "rel": "pushing"}],
        )
        placement = compute_placement(graph, content, {"remote": 5}, "character")
        # thin axis of the buttons is z, pointing up and away from the body
        np.testing.assert_allclose(placement.position, [0.0, 0.0, 0.76 + 0.3], atol=1e-12)

    def test_placement_inside_support_footprint(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            chair = chair_instance(1, x=float(rng.uniform(-2, 2)), y=float(rng.uniform(-2, 2)))
            graph = build_graph([chair, tv_instance(7, x=chair.obb.center[0],
                                                    y=chair.obb.center[1] + 2.5)], TH)
            placement = compute_placement(
                graph, CONTEXT_A, {"chair": 1, "tv": 7}, "character"
            )
            surface = support_surface(chair)
            local = (np.asarray(placement.position) - surface.center) @ surface.basis
            assert abs(local[0]) <= surface.extents[0] / 2 + 1e-9
            assert abs(local[1]) <= surface.extents[1] / 2 + 1e-9


class TestRearrange:
    def _scene(self, chair_ids=(3,)):
        instances = [tv_instance(7)] + [chair_instance(i, x=0.5 * k)
                                        for k, i in enumerate(chair_ids)]
        return build_graph(instances, TH)

    def test_stable_when_unchanged(self):
        graph = self._scene()
        first = rearrange_on_update(None, graph, CONTEXT_A)
        second = rearrange_on_update(first, graph, CONTEXT_A)
        assert second is first

    def test_reanchors_when_match_removed(self):
        graph = self._scene(chair_ids=(3, 9))
        first = rearrange_on_update(None, graph, CONTEXT_A)
        assert first.embedding["chair"] == 3
        without_3 = build_graph(
            [inst for iid, inst in graph.nodes.items() if iid != 3], TH
        )
        second = rearrange_on_update(first, without_3, CONTEXT_A)
        assert second.embedding["chair"] == 9

    def test_withdrawn_when_no_match(self):
        graph = self._scene()
        first = rearrange_on_update(None, graph, CONTEXT_A)
        empty = build_graph([tv_instance(7)], TH)
        assert rearrange_on_update(first, empty, CONTEXT_A) is None

    def test_every_embedding_self_checks(self):
        graph = self._scene(chair_ids=(3, 9))
        query = derive_matching_graph(CONTEXT_A)
        for embedding in find_embeddings(graph, query):
            assert embedding_is_valid(embedding, graph, query)

    def test_two_content_nodes_share_one_match(self):
        table = make_instance(4, "table", (1.5, 0.0, 0.36), (1.2, 0.8, 0.72))
        graph = build_graph([chair_instance(3), tv_instance(7), table], TH)
        content = content_graph(
            [
                {"id": "chair", "kind": "real", "category": "chair"},
                {"id": "table", "kind": "real", "category": "table"},
                {"id": "character", "kind": "content"},
                {"id": "lamp", "kind": "content"},
            ],
            [
                {"sub": "chair", "obj": "table", "rel": "near"},
                {"sub": "character", "obj": "chair", "rel": "sitting_on"},
                {"sub": "lamp", "obj": "table", "rel": "placed_on"},
            ],
        )
        arrangement = arrange(graph, content)
        assert arrangement is not None
        by_content = {p.content_node_id: p for p in arrangement.placements}
        assert by_content["character"].anchor_instance == 3
        assert by_content["lamp"].anchor_instance == 4
        np.testing.assert_allclose(by_content["lamp"].position, [1.5, 0.0, 0.72], atol=1e-12)

    def test_arrange_skips_unplaceable_embedding(self):
        # two remotes match, only the second carries a pushable part
        bare = make_instance(1, "remote", (0, 0, 0.74), (0.15, 0.05, 0.04))
        buttons = make_part((5.0, 0.0, 0.76), (0.12, 0.04, 0.004), affordance="pushable")
        usable = make_instance(2, "remote", (5.0, 0.0, 0.74), (0.15, 0.05, 0.05),
                               parts={"pushable": buttons})
        graph = build_graph([bare, usable], TH)
        content = content_graph(
            [
                {"id": "remote", "kind": "real", "category": "remote"},
                {"id": "character", "kind": "content"},
            ],
            [{"sub": "character", "obj": "remote", "rel": "pushing"}],
        )
        arrangement = arrange(graph, content)
        assert arrangement.embedding == {"remote": 2}
