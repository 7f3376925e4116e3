"""Online 3D scene-graph engine.

Labeled point observations stream into a sparse multi-layer voxel map;
recognized instances are abstracted into oriented bounding boxes with
estimated front directions; pairwise spatial relations form a directed
scene graph; and designer-authored content graphs are matched against it
to place virtual content where its context holds.
"""

from .abstraction import (
    AbstractedInstance,
    Obb,
    abstract_instance,
    estimate_front,
    fit_part_obb,
    fit_zobb,
)
from .arrangement import (
    Arrangement,
    Placement,
    compute_placement,
    embedding_is_valid,
    find_embeddings,
    rearrange_on_update,
    select_embedding,
)
from .config import EngineConfig
from .content import (
    ContentGraph,
    MatchingGraph,
    derive_matching_graph,
    load_content_graph,
    parse_content_graph,
    serialize_content_graph,
    validate_content_graph,
)
from .evaluation import (
    EvalReport,
    ObbAnnotation,
    ObbAnnotationSet,
    box_iou,
    eval_obbs,
    evaluate_annotations,
)
from .pipeline import PipelineResult, run_pipeline
from .relations import (
    RELATION_LABELS,
    RelationThresholds,
    directional,
    distance,
    relations_for_pair,
    support,
)
from .scene_graph import SceneGraph, build_graph, export_graph, import_graph, update_graph
from .semantic_map import (
    AFFORDANCE_TOKENS,
    InstanceRecord,
    LabeledObservation,
    LabeledVoxelMap,
    iter_observation_frames,
    write_observation_stream,
)

__version__ = "0.1.0"

__all__ = [
    "AFFORDANCE_TOKENS",
    "AbstractedInstance",
    "Arrangement",
    "ContentGraph",
    "EngineConfig",
    "EvalReport",
    "InstanceRecord",
    "LabeledObservation",
    "LabeledVoxelMap",
    "MatchingGraph",
    "Obb",
    "ObbAnnotation",
    "ObbAnnotationSet",
    "PipelineResult",
    "Placement",
    "RELATION_LABELS",
    "RelationThresholds",
    "SceneGraph",
    "abstract_instance",
    "box_iou",
    "build_graph",
    "compute_placement",
    "derive_matching_graph",
    "directional",
    "distance",
    "embedding_is_valid",
    "estimate_front",
    "eval_obbs",
    "evaluate_annotations",
    "export_graph",
    "find_embeddings",
    "fit_part_obb",
    "fit_zobb",
    "import_graph",
    "iter_observation_frames",
    "load_content_graph",
    "parse_content_graph",
    "rearrange_on_update",
    "relations_for_pair",
    "run_pipeline",
    "select_embedding",
    "serialize_content_graph",
    "support",
    "update_graph",
    "validate_content_graph",
    "write_observation_stream",
]
