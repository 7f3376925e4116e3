"""Regenerate demo_stream.jsonl: a chair facing a TV, scanned over 12 frames.

Run from the repository root:

    python3 fixtures/make_demo_stream.py

Objects are sampled one observation per 4 cm voxel so the replayed map is
exactly reproducible. The chair's seat top votes `sittable` and its
backrest votes `leanable`, which is what gives the chair its front.
"""

from pathlib import Path

import numpy as np

from sceneplace.semantic_map import LabeledObservation, write_observation_stream

VOXEL = 0.04


def grid(instance_id, category, i_range, j_range, k_range, normal, affordance=None):
    observations = []
    for i in range(i_range[0], i_range[1] + 1):
        for j in range(j_range[0], j_range[1] + 1):
            for k in range(k_range[0], k_range[1] + 1):
                observations.append(
                    LabeledObservation(
                        position=np.array([(i + 0.5) * VOXEL, (j + 0.5) * VOXEL, (k + 0.5) * VOXEL]),
                        normal=np.asarray(normal, dtype=float),
                        instance_id=instance_id,
                        category=category,
                        affordance=affordance,
                    )
                )
    return observations


def main():
    up = (0.0, 0.0, 1.0)
    chair = (
        grid(3, "chair", (0, 9), (0, 9), (10, 10), up)
        + grid(3, "chair", (0, 9), (0, 9), (11, 11), up, affordance="sittable")
        + grid(3, "chair", (0, 9), (-1, -1), (12, 22), (0.0, 1.0, 0.0), affordance="leanable")
    )
    tv = grid(7, "tv", (0, 14), (32, 33), (15, 24), (0.0, -1.0, 0.0))
    frames = [(1, chair), (2, tv)] + [(n, []) for n in range(3, 13)]
    out = Path(__file__).parent / "demo_stream.jsonl"
    write_observation_stream(out, frames)
    print(f"wrote {out} ({out.stat().st_size} bytes, {len(frames)} frames)")


if __name__ == "__main__":
    main()
