"""
Running the staged pipeline against scripted backends
=====================================================

The orchestrator talks to four endpoints (asr, judge, segment, refine).
Here every endpoint is a fixture file, so the whole run is hermetic:
one expression passes the existence gate and gets segmented, one is
gated off and comes back all zero with the standard meta line.
"""

import json
import tempfile
from pathlib import Path

from refvos.backends import BackendEndpoint
from refvos.metadata import load_expressions
from refvos.pipeline import PipelineConfig, run_expression

workdir = Path(tempfile.mkdtemp(prefix="refvos_demo_"))

H, W, T = 8, 10, 3
# a 2x2 block at row 1, col 1; runs cover the whole 8x10 grid
square_runs = [W + 1, 2, W - 2, 2, H * W - 2 * W - 3]

fixtures = {
    "asr": [],
    "judge": [
        {"request": {"video_ref": "clip", "phrase": "the brown dog"},
         "response": {"exists": True}},
        {"request": {"video_ref": "clip", "phrase": "the purple elephant"},
         "response": {"exists": False}},
    ],
    "segment": [
        {"request": {"video_ref": "clip",
                     "prompt": "<image>\nPlease segment the brown dog."},
         "response": {"frames": [{"height": H, "width": W, "runs": square_runs}] * T}},
    ],
    "refine": [],
}
fixture_path = workdir / "fixtures.json"
fixture_path.write_text(json.dumps(fixtures), encoding="utf-8")

endpoints = {
    kind: BackendEndpoint(kind=kind, transport="scripted", address=str(fixture_path))
    for kind in ("asr", "judge", "segment", "refine")
}
# always_judge sends every expression to the existence judge, even when
# the metadata already carries a presence flag.
config = PipelineConfig(endpoints=endpoints, gate_policy="always_judge",
                        refine_policy="never")

dataset = {
    "videos": {
        "clip": {
            "frame_count": T, "height": H, "width": W,
            "expressions": {
                "e0": {"exp": "the brown dog"},
                "e1": {"exp": "the purple elephant"},
            },
        }
    }
}
exp_path = workdir / "expressions.json"
exp_path.write_text(json.dumps(dataset), encoding="utf-8")

for expression in load_expressions(exp_path):
    record, trace = run_expression(expression, config)
    print(f"{record.expression_id}: meta={record.meta_text!r}")
    print(f"    stages: {[e.stage for e in trace.events]}")
    print(f"    gate verdict: {trace.gate_verdict}")
    print(f"    mask area frame 0: {record.trajectory.frame(0).to_dense().sum()}")
