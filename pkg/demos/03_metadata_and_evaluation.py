"""
Dataset metadata, prediction manifests and the leaderboard score
================================================================

Write a tiny two-expression dataset, fabricate predictions for it, and
run the full evaluation: per-expression J and F, the two existence
accuracies, and the blended final score.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from refvos.masks import BinaryMask, MaskTrajectory
from refvos.metadata import (
    PredictionRecord,
    load_expressions,
    load_predictions,
    write_predictions,
)
from refvos.metrics import evaluate_predictions, format_report

workdir = Path(tempfile.mkdtemp(prefix="refvos_demo_"))

# Two expressions on one 4-frame video: one target present, one absent.
dataset = {
    "videos": {
        "clip_a": {
            "frame_count": 4,
            "height": 12,
            "width": 16,
            "expressions": {
                "e0": {"exp": "the brown dog",
                       "presence_info": {"target_exists": True}},
                "e1": {"exp": "the purple elephant",
                       "presence_info": {"target_exists": False}},
            },
        }
    }
}
exp_path = workdir / "expressions.json"
exp_path.write_text(json.dumps(dataset), encoding="utf-8")
expressions = load_expressions(exp_path)
print("loaded:", [(e.video_id, e.expression_id) for e in expressions])


def disc(cy, cx, r):
    yy, xx = np.mgrid[0:12, 0:16]
    return BinaryMask.from_dense((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r)


ground_truth = {
    ("clip_a", "e0"): MaskTrajectory([disc(6, 4 + t, 3) for t in range(4)]),
    ("clip_a", "e1"): MaskTrajectory.all_zero(((12, 16),) * 4),
}

# Predictions: the present target is found but slightly misplaced; the
# absent one is correctly declared absent via the meta line.
predictions = [
    PredictionRecord(
        video_id="clip_a", expression_id="e0", meta_text="",
        trajectory=MaskTrajectory([disc(6, 5 + t, 3) for t in range(4)]),
    ),
    PredictionRecord(
        video_id="clip_a", expression_id="e1",
        meta_text="[META:NO_OBJ] target_exists=false",
        trajectory=MaskTrajectory.all_zero(((12, 16),) * 4),
    ),
]

gt_records = [
    PredictionRecord(v, e, "" if (v, e) == ("clip_a", "e0") else
                     "[META:NO_OBJ] target_exists=false", t)
    for (v, e), t in sorted(ground_truth.items())
]

# Manifests are canonical JSON: writing then reloading gives back the
# same records, byte-stable across runs.
write_predictions(predictions, workdir / "pred")
reloaded = load_predictions(workdir / "pred" / "manifest.json")
print("manifest entries:", len(reloaded))

result = evaluate_predictions(reloaded, gt_records)
print()
print(format_report(result))
