import math

import numpy as np
import pytest

from sceneplace.errors import (
    DanglingEdge,
    DuplicateInstanceId,
    UnknownRelation,
    UnsupportedFormat,
)
from sceneplace.relations import RelationThresholds
from sceneplace.scene_graph import (
    build_graph,
    empty_graph,
    export_graph,
    import_graph,
    update_graph,
)

from synth import make_instance, make_part

TH = RelationThresholds()


def random_scene(rng, n):
    instances = []
    for iid in range(n):
        parts = {}
        if rng.random() < 0.3:
            center = rng.uniform(-3, 3, 3)
            parts["sittable"] = make_part(center, (0.4, 0.4, 0.05), affordance="sittable")
        instances.append(
            make_instance(
                iid,
                str(rng.choice(["chair", "table", "tv", "sofa"])),
                (rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.2, 1.2)),
                (rng.uniform(0.2, 1.6), rng.uniform(0.2, 1.6), rng.uniform(0.2, 1.6)),
                yaw=rng.uniform(0, math.pi / 2),
                front_axis=int(rng.integers(0, 4)) if rng.random() < 0.7 else None,
                parts=parts,
            )
        )
    return instances


class TestBuildGraph:
    def test_one_directed_edge(self):
        chair = make_instance(0, "chair", (0, 0, 0.45), (0.5, 0.5, 0.9), front_axis=1)
        tv = make_instance(7, "tv", (0, 2.5, 0.8), (1.0, 0.1, 0.6))
        graph = build_graph([chair, tv], TH)
        assert set(graph.nodes) == {0, 7}
        assert graph.edges == frozenset({(7, 0, "in_front_of")})

    def test_unrelated_pair_no_edges(self):
        a = make_instance(0, "chair", (0, 0, 0.5), (1, 1, 1))
        b = make_instance(1, "chair", (9, 9, 0.5), (1, 1, 1))
        graph = build_graph([a, b], TH)
        assert len(graph.nodes) == 2 and graph.edges == frozenset()

    def test_on_plus_adjacent_fixture(self):
        table = make_instance(1, "table", (0, 0, 0.35), (1.0, 1.0, 0.7))
        lamp = make_instance(2, "lamp", (0.2, 0.1, 0.9), (0.2, 0.2, 0.4))
        loner = make_instance(3, "chair", (9, 9, 0.5), (1, 1, 1))
        graph = build_graph([table, lamp, loner], TH)
        assert graph.edges == frozenset(
            {(2, 1, "on"), (2, 1, "adjacent"), (1, 2, "adjacent")}
        )

    def test_duplicate_id_raises(self):
        a = make_instance(0, "chair", (0, 0, 0.5), (1, 1, 1))
        b = make_instance(0, "table", (2, 0, 0.5), (1, 1, 1))
        with pytest.raises(DuplicateInstanceId):
            build_graph([a, b], TH)

    def test_no_self_edges_and_labels_closed(self):
        rng = np.random.default_rng(0)
        from sceneplace.relations import RELATION_LABELS

        graph = build_graph(random_scene(rng, 10), TH)
        for sub, obj, label in graph.edges:
            assert sub != obj
            assert label in RELATION_LABELS


class TestUpdateGraph:
    def test_empty_change_set_is_identity(self):
        rng = np.random.default_rng(1)
        instances = random_scene(rng, 8)
        graph = build_graph(instances, TH, version=5)
        updated = update_graph(graph, set(), instances, TH)
        assert updated.edges == graph.edges
        assert updated.nodes.keys() == graph.nodes.keys()
        assert updated.version == 6

    def test_moved_instance_localized(self):
        rng = np.random.default_rng(2)
        instances = random_scene(rng, 8)
        graph = build_graph(instances, TH)
        moved = make_instance(
            3,
            instances[3].category,
            np.asarray(instances[3].obb.center) + [2.0, 0.0, 0.0],
            instances[3].obb.extents,
            yaw=instances[3].obb.yaw,
        )
        current = [moved if inst.instance_id == 3 else inst for inst in instances]
        updated = update_graph(graph, {3}, current, TH)
        unchanged_prev = {e for e in graph.edges if 3 not in (e[0], e[1])}
        unchanged_new = {e for e in updated.edges if 3 not in (e[0], e[1])}
        assert unchanged_prev == unchanged_new

    def test_equals_batch_rebuild_on_random_mutations(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            instances = {i.instance_id: i for i in random_scene(rng, int(rng.integers(3, 9)))}
            graph = build_graph(instances.values(), TH)
            changed = set()
            # mutate: move one, remove one, add one
            victim = int(rng.choice(sorted(instances)))
            moved = instances[victim]
            instances[victim] = make_instance(
                victim,
                moved.category,
                np.asarray(moved.obb.center) + rng.uniform(-1, 1, 3),
                moved.obb.extents,
                yaw=moved.obb.yaw,
            )
            changed.add(victim)
            if rng.random() < 0.5 and len(instances) > 2:
                gone = int(rng.choice(sorted(instances)))
                del instances[gone]
                changed.add(gone)
            if rng.random() < 0.5:
                new_id = max(instances) + 1
                instances[new_id] = random_scene(rng, 1)[0]
                instances[new_id] = make_instance(
                    new_id,
                    instances[new_id].category,
                    instances[new_id].obb.center,
                    instances[new_id].obb.extents,
                    yaw=instances[new_id].obb.yaw,
                )
                changed.add(new_id)
            updated = update_graph(graph, changed, instances.values(), TH)
            rebuilt = build_graph(instances.values(), TH)
            assert updated.edges == rebuilt.edges
            assert updated.nodes.keys() == rebuilt.nodes.keys()


class TestExport:
    def test_empty_documents(self):
        graph = empty_graph()
        assert export_graph(graph, "dot") == "digraph scene {\n}\n"
        reparsed = import_graph(export_graph(graph, "structured"))
        assert reparsed.nodes == {} and reparsed.edges == frozenset()

    def test_dot_single_edge(self):
        chair = make_instance(0, "chair", (0, 0, 0.45), (0.5, 0.5, 0.9), front_axis=1)
        tv = make_instance(7, "tv", (0, 2.5, 0.8), (1.0, 0.1, 0.6))
        dot = export_graph(build_graph([chair, tv], TH), "dot")
        assert dot.count("->") == 1
        assert '"7" -> "0" [label="in_front_of"];' in dot

    def test_structured_round_trip_bytes(self):
        rng = np.random.default_rng(4)
        graph = build_graph(random_scene(rng, 7), TH, version=3)
        text = export_graph(graph, "structured")
        again = export_graph(import_graph(text), "structured")
        assert text == again

    def test_determinism_under_input_order(self):
        rng = np.random.default_rng(5)
        instances = random_scene(rng, 7)
        a = export_graph(build_graph(instances, TH), "structured")
        b = export_graph(build_graph(list(reversed(instances)), TH), "structured")
        assert a == b
        assert export_graph(build_graph(instances, TH), "dot") == export_graph(
            build_graph(list(reversed(instances)), TH), "dot"
        )

    def test_unsupported_format(self):
        with pytest.raises(UnsupportedFormat):
            export_graph(empty_graph(), "yaml")

    def test_import_validations(self):
        with pytest.raises(UnknownRelation):
            import_graph(
                '{"nodes": [{"id": 1, "category": "chair", "obb": {"center": [0,0,0], '
                '"extents": [1,1,1], "yaw": 0, "front": null}}, {"id": 2, "category": "tv", '
                '"obb": {"center": [2,0,0], "extents": [1,1,1], "yaw": 0, "front": null}}], '
                '"edges": [{"sub": 1, "obj": 2, "rel": "orbits"}]}'
            )
        with pytest.raises(DanglingEdge):
            import_graph(
                '{"nodes": [{"id": 1, "category": "chair", "obb": {"center": [0,0,0], '
                '"extents": [1,1,1], "yaw": 0, "front": null}}], '
                '"edges": [{"sub": 1, "obj": 9, "rel": "near"}]}'
            )
