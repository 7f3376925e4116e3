"""Online pipeline driver: integrate, abstract, relate, match, place.

Frames stream into the single-writer voxel map. Every `rebuild_every`
frames (plus a final flush at end of stream) the driver drains the
changed-instance set, extracts current records, and processes them:
changed instances are re-abstracted, the scene graph is updated with the
dirty set, and the arrangement is re-derived.

In pipelined mode the processing runs on a one-worker executor so that
frame integration overlaps the previous rebuild; the worker owns all
rebuild state and the event log, so both modes emit byte-identical logs.
Events are timestamped with frame indices, not wall-clock time, which
keeps runs reproducible.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .abstraction import AbstractedInstance, abstract_instance
from .arrangement import Arrangement, rearrange_on_update
from .config import EngineConfig
from .content import ContentGraph, load_content_graph
from .errors import InsufficientPoints
from .scene_graph import SceneGraph, empty_graph, export_graph, update_graph
from .semantic_map import InstanceRecord, LabeledVoxelMap, iter_observation_frames

logger = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    frames: int
    rebuilds: int
    graph: SceneGraph
    arrangement: Arrangement | None
    events: list[dict] = field(default_factory=list)


class _RebuildWorker:
    """Owns abstraction cache, graph, arrangement, and the event sink."""

    def __init__(self, config: EngineConfig, content: ContentGraph | None, sink, dot_dir):
        self.config = config
        self.content = content
        self.sink = sink
        self.dot_dir = Path(dot_dir) if dot_dir else None
        self.cache: dict[int, AbstractedInstance] = {}
        self.graph = empty_graph()
        self.arrangement: Arrangement | None = None
        self.rebuilds = 0
        self.events: list[dict] = []

    def emit(self, event: dict) -> None:
        self.events.append(event)
        if self.sink is not None:
            self.sink.write(json.dumps(event, separators=(",", ":")) + "\n")
            self.sink.flush()

    def rebuild(self, records: list[InstanceRecord], changed: set[int], frame: int, version: int) -> None:
        present = {record.instance_id for record in records}
        records_by_id = {record.instance_id: record for record in records}
        for instance_id in sorted(changed | (present - self.cache.keys())):
            record = records_by_id.get(instance_id)
            if record is None:
                continue
            try:
                self.cache[instance_id] = abstract_instance(
                    record,
                    long_axis_categories=self.config.long_axis_categories,
                    frontless_categories=self.config.frontless_categories,
                )
            except InsufficientPoints as exc:
                logger.warning("instance %d not abstractable: %s", instance_id, exc)
                self.cache.pop(instance_id, None)
        for instance_id in set(self.cache) - present:
            del self.cache[instance_id]

        instances = [self.cache[i] for i in sorted(self.cache)]
        dirty = changed & (self.graph.nodes.keys() | self.cache.keys())
        self.graph = update_graph(
            self.graph, dirty, instances, self.config.thresholds, version=version
        )
        self.rebuilds += 1
        self.emit(
            {
                "event": "graph",
                "frame": frame,
                "rebuild": self.rebuilds,
                "version": self.graph.version,
                "nodes": len(self.graph.nodes),
                "edges": len(self.graph.edges),
            }
        )
        if self.dot_dir is not None:
            path = self.dot_dir / f"graph_{self.rebuilds:04d}.dot"
            path.write_text(export_graph(self.graph, "dot"), encoding="utf-8")

        if self.content is None:
            return
        previous = self.arrangement
        self.arrangement = rearrange_on_update(
            previous,
            self.graph,
            self.content,
            limit=self.config.limit_embeddings,
            standoff=self.config.standoff,
        )
        if self.arrangement is not None:
            for placement in self.arrangement.placements:
                self.emit(
                    {
                        "event": "placement",
                        "frame": frame,
                        "rebuild": self.rebuilds,
                        **placement.to_record(),
                    }
                )
        elif previous is not None:
            for placement in previous.placements:
                self.emit(
                    {
                        "event": "withdrawn",
                        "frame": frame,
                        "rebuild": self.rebuilds,
                        "content": placement.content_node_id,
                    }
                )


def run_pipeline(
    stream_path,
    content_path=None,
    config: EngineConfig | None = None,
    *,
    log_sink=None,
    sequential: bool = False,
    export_dot_dir=None,
) -> PipelineResult:
    """Replay an observation stream and drive the full loop over it.

    `log_sink` is any text file object; one JSON event per line is
    written as rebuilds complete, so a partial log survives a crash.
    """
    config = config or EngineConfig()
    content = load_content_graph(content_path) if content_path is not None else None
    if export_dot_dir is not None:
        Path(export_dot_dir).mkdir(parents=True, exist_ok=True)

    vmap = LabeledVoxelMap(config.voxel_size)
    worker = _RebuildWorker(config, content, log_sink, export_dot_dir)
    executor = None if sequential else ThreadPoolExecutor(max_workers=1)
    futures: list[Future] = []

    def schedule(frame_id: int) -> None:
        records = vmap.extract_instances(config.min_voxels)
        changed = vmap.drain_changed()
        version = vmap.version
        if executor is None:
            worker.rebuild(records, changed, frame_id, version)
        else:
            futures.append(executor.submit(worker.rebuild, records, changed, frame_id, version))

    frames = 0
    last_frame_id = 0
    try:
        since_rebuild = 0
        for frame_id, observations in iter_observation_frames(stream_path):
            vmap.integrate_frame(observations)
            frames += 1
            since_rebuild += 1
            last_frame_id = frame_id
            if since_rebuild >= config.rebuild_every:
                schedule(frame_id)
                since_rebuild = 0
        if since_rebuild > 0:
            schedule(last_frame_id)
        for future in futures:
            future.result()
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    return PipelineResult(
        frames=frames,
        rebuilds=worker.rebuilds,
        graph=worker.graph,
        arrangement=worker.arrangement,
        events=worker.events,
    )
