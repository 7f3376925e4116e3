"""Command-line driver and evaluation harness.

Subcommands:
    run          replay a stream against a content graph, log events
    build-graph  replay a stream and export the final scene graph
    match        match a content graph against an exported scene graph
    eval         score predicted box annotations against ground truth
    export       replay a stream and write all requested artifacts
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .arrangement import find_embeddings
from .config import EngineConfig
from .content import derive_matching_graph, load_content_graph, validate_content_graph
from .errors import EngineError
from .evaluation import (
    ObbAnnotationSet,
    annotation_from_instance,
    dump_annotations,
    evaluate_annotations,
    parse_annotations,
)
from .pipeline import run_pipeline
from .scene_graph import export_graph, import_graph


def _load_config(args) -> EngineConfig:
    config = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    overrides = {}
    if getattr(args, "rebuild_every", None) is not None:
        overrides["rebuild_every"] = args.rebuild_every
    if getattr(args, "limit_embeddings", None) is not None:
        overrides["limit_embeddings"] = args.limit_embeddings
    if overrides:
        config = EngineConfig.from_dict({**_config_as_dict(config), **overrides})
    return config


def _config_as_dict(config: EngineConfig) -> dict:
    return {
        "voxel_size": config.voxel_size,
        "min_voxels": config.min_voxels,
        "thresholds": {
            "d_offset": config.thresholds.d_offset,
            "d_adjacent": config.thresholds.d_adjacent,
            "d_near": config.thresholds.d_near,
            "d_support": config.thresholds.d_support,
        },
        "rebuild_every": config.rebuild_every,
        "limit_embeddings": config.limit_embeddings,
        "long_axis_categories": sorted(config.long_axis_categories),
        "frontless_categories": sorted(config.frontless_categories),
        "standoff": config.standoff,
    }


def _dump_final_obbs(result, path) -> None:
    annotations = ObbAnnotationSet(
        instances=tuple(
            annotation_from_instance(result.graph.nodes[i]) for i in sorted(result.graph.nodes)
        )
    )
    Path(path).write_text(dump_annotations(annotations), encoding="utf-8")


def _cmd_run(args) -> int:
    config = _load_config(args)
    sink = open(args.log, "w", encoding="utf-8") if args.log else sys.stdout
    try:
        result = run_pipeline(
            args.stream,
            args.content,
            config,
            log_sink=sink,
            sequential=args.seq,
            export_dot_dir=args.export_dot,
        )
    finally:
        if args.log:
            sink.close()
    if args.export_obbs:
        _dump_final_obbs(result, args.export_obbs)
    return 0


def _cmd_build_graph(args) -> int:
    config = _load_config(args)
    # a single rebuild at end of stream is enough to export the final graph
    config = EngineConfig.from_dict({**_config_as_dict(config), "rebuild_every": 10**9})
    result = run_pipeline(args.stream, None, config, sequential=True)
    text = export_graph(result.graph, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_match(args) -> int:
    config = _load_config(args)
    graph = import_graph(Path(args.graph).read_text(encoding="utf-8"))
    content = load_content_graph(args.content)
    for diagnostic in validate_content_graph(
        content, frontless_categories=config.frontless_categories
    ):
        print(f"{diagnostic.severity}: {diagnostic.message}", file=sys.stderr)
    embeddings = find_embeddings(
        graph, derive_matching_graph(content), limit=config.limit_embeddings
    )
    for embedding in embeddings:
        sys.stdout.write(json.dumps({"embedding": embedding}, sort_keys=True) + "\n")
    return 0


def _cmd_eval(args) -> int:
    predicted = parse_annotations(Path(args.predictions).read_text(encoding="utf-8"))
    truth = parse_annotations(Path(args.truth).read_text(encoding="utf-8"))
    report = evaluate_annotations(predicted, truth)
    sys.stdout.write(report.render_text())
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_export(args) -> int:
    config = _load_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "events.jsonl", "w", encoding="utf-8") as sink:
        result = run_pipeline(
            args.stream,
            args.content,
            config,
            log_sink=sink,
            sequential=args.seq,
            export_dot_dir=out_dir if args.export_dot else None,
        )
    if args.export_obbs:
        _dump_final_obbs(result, out_dir / "obbs.json")
    if args.export_structured:
        (out_dir / "scene_graph.json").write_text(
            export_graph(result.graph, "structured"), encoding="utf-8"
        )
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="engine config file (JSON)")
    parser.add_argument("--rebuild-every", type=int, dest="rebuild_every")
    parser.add_argument("--limit-embeddings", type=int, dest="limit_embeddings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sceneplace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="replay a stream against a content graph")
    p_run.add_argument("stream")
    p_run.add_argument("content")
    p_run.add_argument("--log", help="event log path (default: stdout)")
    p_run.add_argument("--export-dot", help="directory for one DOT file per rebuild")
    p_run.add_argument("--export-obbs", help="write final box annotations here")
    p_run.add_argument("--seq", action="store_true", help="strictly sequential mode")
    _add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_bg = sub.add_parser("build-graph", help="replay a stream, export the scene graph")
    p_bg.add_argument("stream")
    p_bg.add_argument("--format", choices=("dot", "structured"), default="structured")
    p_bg.add_argument("--out")
    _add_common(p_bg)
    p_bg.set_defaults(func=_cmd_build_graph)

    p_match = sub.add_parser("match", help="match a content graph against a scene graph")
    p_match.add_argument("graph", help="structured scene-graph export")
    p_match.add_argument("content")
    _add_common(p_match)
    p_match.set_defaults(func=_cmd_match)

    p_eval = sub.add_parser("eval", help="score predictions against ground truth")
    p_eval.add_argument("predictions")
    p_eval.add_argument("truth")
    p_eval.add_argument("--out", help="also write the report as JSON")
    _add_common(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_export = sub.add_parser("export", help="replay a stream and write artifacts")
    p_export.add_argument("stream")
    p_export.add_argument("--content", default=None)
    p_export.add_argument("--out-dir", default="exports")
    p_export.add_argument("--export-dot", action="store_true")
    p_export.add_argument("--export-obbs", action="store_true")
    p_export.add_argument("--export-structured", action="store_true")
    p_export.add_argument("--seq", action="store_true")
    _add_common(p_export)
    p_export.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc.strerror or exc} ({exc.filename})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
