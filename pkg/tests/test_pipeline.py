"""Unit tests for the staged orchestrator: gating, fail-safety, determinism."""

import threading
from collections import Counter

import numpy as np
import pytest

from refvos.backends import BackendEndpoint, ScriptedTransport
from refvos.errors import ConfigError
from refvos.masks import BinaryMask, mask_to_json
from refvos.metadata import NO_OBJECT_META, ExpressionRecord
from refvos.pipeline import (
    PipelineConfig,
    acquire_transcript,
    gate_decision,
    run_dataset,
    run_expression,
)

H, W, T = 6, 8, 4


def endpoints():
    return {
        k: BackendEndpoint(kind=k, transport="scripted", address="unset")
        for k in ("asr", "judge", "segment", "refine")
    }


def square(size, at=(1, 1)):
    grid = np.zeros((H, W), dtype=bool)
    r, c = at
    grid[r : r + size, c : c + size] = True
    return BinaryMask.from_dense(grid)


def record(eid, *, exp="", audio_ref=None, known=False, exists=None, vid="v1"):
    return ExpressionRecord(
        video_id=vid,
        expression_id=eid,
        transcript=exp,
        presence_known=known,
        target_exists=exists,
        frame_count=T,
        height=H,
        width=W,
        audio_ref=audio_ref,
    )


def fixtures_data():
    coarse = {"frames": [mask_to_json(square(3))] * T}
    refined = {
        "anchor": 0,
        "frames": [
            {"frame_index": t, "confidence": 1.0, "mask": mask_to_json(square(4))}
            for t in range(T)
        ],
    }
    return {
        "asr": [
            {"request": {"audio_ref": "spoken.wav"}, "response": {"transcript": "the red car"}},
            {"request": {"audio_ref": "silence.wav"}, "response": {"transcript": ""}},
        ],
        "judge": [
            {
                "request": {"video_ref": "v1", "phrase": "the red car"},
                "response": {"exists": True},
            },
            {
                "request": {"video_ref": "v1", "phrase": "the unicorn"},
                "response": {"exists": False},
            },
        ],
        "segment": [
            {
                "request": {"video_ref": "v1", "prompt": "<image>\nPlease segment the red car."},
                "response": coarse,
            }
        ],
        "refine": [{"request": {"video_ref": "v1", "anchor": 0}, "response": refined}],
    }


class CountingTransport:
    """Wraps a transport and counts posts per path; safe under threads."""

    def __init__(self, inner):
        self.inner = inner
        self.counts = Counter()
        self._lock = threading.Lock()

    def post(self, path, payload):
        with self._lock:
            self.counts[path] += 1
        return self.inner.post(path, payload)


def make_env(**cfg_kwargs):
    transport = CountingTransport(ScriptedTransport(data=fixtures_data()))
    transports = {k: transport for k in ("asr", "judge", "segment", "refine")}
    cfg = PipelineConfig(endpoints=endpoints(), **cfg_kwargs)
    return cfg, transports, transport


# ---------------------------------------------------------------------------
# Config validation


def test_config_requires_all_endpoint_kinds():
    eps = endpoints()
    del eps["refine"]
    with pytest.raises(ConfigError):
        PipelineConfig(endpoints=eps)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"gate_policy": "sometimes"},
        {"anchor_policy": "middle"},
        {"refine_policy": "maybe"},
        {"parallelism": 0},
        {"judge_sample_count": 0},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        PipelineConfig(endpoints=endpoints(), **kwargs)


# ---------------------------------------------------------------------------
# Transcript acquisition and gate decisions


def test_transcript_prefers_metadata_over_audio():
    cfg, transports, counting = make_env()
    text, source = acquire_transcript(record("e", exp="the red car", audio_ref="spoken.wav"), cfg, transports)
    assert (text, source) == ("the red car", "metadata")
    assert counting.counts["/asr"] == 0


def test_transcript_falls_back_to_asr_then_none():
    cfg, transports, counting = make_env()
    text, source = acquire_transcript(record("e", audio_ref="spoken.wav"), cfg, transports)
    assert (text, source) == ("the red car", "asr")
    assert counting.counts["/asr"] == 1
    text, source = acquire_transcript(record("e"), cfg, transports)
    assert (text, source) == ("", "none")


def test_gate_metadata_first_skips_judge_when_presence_known():
    cfg, transports, counting = make_env()
    exists, source, sampled = gate_decision(
        record("e", exp="the red car", known=True, exists=True), "the red car", cfg, transports
    )
    assert (exists, source, sampled) == (True, "metadata", ())
    assert counting.counts["/judge"] == 0


def test_gate_always_judge_consults_judge_despite_metadata():
    cfg, transports, counting = make_env(gate_policy="always_judge")
    exists, source, sampled = gate_decision(
        record("e", exp="the red car", known=True, exists=False), "the red car", cfg, transports
    )
    assert exists and source == "judge"
    assert sampled == (0, 1, 2, 3)  # short video: every frame sampled
    assert counting.counts["/judge"] == 1


def test_gate_unknown_presence_consults_judge():
    cfg, transports, counting = make_env()
    exists, source, _ = gate_decision(
        record("e", exp="the unicorn"), "the unicorn", cfg, transports
    )
    assert not exists and source == "judge"
    assert counting.counts["/judge"] == 1


def test_empty_transcript_gates_off_even_with_gate_disabled():
    cfg, transports, counting = make_env(gate_enabled=False)
    exists, source, _ = gate_decision(record("e"), "   ", cfg, transports)
    assert not exists and source == "empty_transcript"


def test_gate_disabled_passes_everything_else():
    cfg, transports, counting = make_env(gate_enabled=False)
    exists, source, _ = gate_decision(
        record("e", exp="the unicorn", known=True, exists=False), "the unicorn", cfg, transports
    )
    assert exists and source == "disabled"
    assert counting.counts["/judge"] == 0


# ---------------------------------------------------------------------------
# run_expression


def test_gated_off_expression_short_circuits():
    cfg, transports, counting = make_env()
    rec = record("e_absent", exp="the cat", known=True, exists=False)
    pred, trace = run_expression(rec, cfg, transports)
    assert pred.meta_text == NO_OBJECT_META
    assert pred.trajectory.frame_count == T
    assert pred.trajectory.is_all_empty
    assert pred.trajectory.dims == ((H, W),) * T
    # No model backend was touched at all.
    assert counting.counts == Counter()
    assert trace.gate_verdict is False
    assert not trace.failed and not trace.refine_invoked
    assert [e.stage for e in trace.events] == ["transcript", "gate"]


def test_present_expression_runs_full_pipeline_without_refine():
    cfg, transports, counting = make_env()
    rec = record("e_present", exp="the red car", known=True, exists=True)
    pred, trace = run_expression(rec, cfg, transports)
    assert pred.meta_text == ""
    assert pred.trajectory.frame(0) == square(3)
    # Clean coarse trajectory: recommended policy does not refine.
    assert not trace.refine_invoked
    assert counting.counts["/segment"] == 1
    assert counting.counts["/refine"] == 0
    assert [e.stage for e in trace.events] == ["transcript", "gate", "prompt", "segment", "assess"]


def test_refine_policy_always_invokes_refiner_and_fuses():
    cfg, transports, counting = make_env(refine_policy="always")
    rec = record("e_present", exp="the red car", known=True, exists=True)
    pred, trace = run_expression(rec, cfg, transports)
    assert trace.refine_invoked
    assert trace.anchor == 0
    assert counting.counts["/refine"] == 1
    # Confidence 1.0 >= 0.5 on every frame: fused output is the refined mask.
    assert all(m == square(4) for m in pred.trajectory.masks)
    assert [e.stage for e in trace.events][-2:] == ["refine", "fuse"]


def test_audio_only_expression_uses_asr_and_judge():
    cfg, transports, counting = make_env()
    pred, trace = run_expression(record("e_audio", audio_ref="spoken.wav"), cfg, transports)
    assert pred.meta_text == ""
    assert counting.counts["/asr"] == 1
    assert counting.counts["/judge"] == 1
    assert counting.counts["/segment"] == 1


def test_silent_audio_yields_no_object():
    cfg, transports, counting = make_env()
    pred, trace = run_expression(record("e_mute", audio_ref="silence.wav"), cfg, transports)
    assert pred.meta_text == NO_OBJECT_META
    assert counting.counts["/asr"] == 1
    assert counting.counts["/judge"] == 0
    assert counting.counts["/segment"] == 0


def test_backend_failure_yields_fail_safe_record():
    cfg, transports, counting = make_env()
    # No segment fixture matches this phrase, so the backend reports a miss.
    rec = record("e_broken", exp="the unfixtured thing", known=True, exists=True)
    pred, trace = run_expression(rec, cfg, transports)
    assert trace.failed
    assert pred.meta_text == "[META:ERROR] segment"
    assert pred.trajectory.is_all_empty
    assert pred.trajectory.frame_count == T
    assert trace.events[-1].status == "failed"


def test_asr_failure_names_transcript_stage():
    cfg, transports, counting = make_env()
    pred, trace = run_expression(record("e", audio_ref="missing.wav"), cfg, transports)
    assert trace.failed
    assert pred.meta_text == "[META:ERROR] transcript"


# ---------------------------------------------------------------------------
# run_dataset


def dataset_records():
    return [
        record("e_absent", exp="the cat", known=True, exists=False),
        record("e_present", exp="the red car", known=True, exists=True),
        record("e_audio", audio_ref="spoken.wav"),
        record("e_mute", audio_ref="silence.wav"),
        record("e_gone", exp="the unicorn"),
    ]


def test_run_dataset_orders_and_counts():
    cfg, transports, _ = make_env()
    result = run_dataset(dataset_records(), cfg, transports=transports)
    assert [p.expression_id for p in result.predictions] == [
        "e_absent",
        "e_audio",
        "e_gone",
        "e_mute",
        "e_present",
    ]
    metas = {p.expression_id: p.meta_text for p in result.predictions}
    assert metas["e_absent"] == NO_OBJECT_META
    assert metas["e_mute"] == NO_OBJECT_META
    assert metas["e_gone"] == NO_OBJECT_META
    assert metas["e_present"] == "" and metas["e_audio"] == ""
    assert result.failed_count == 0
    # Every trajectory spans the full video regardless of the gate.
    assert all(p.trajectory.frame_count == T for p in result.predictions)


def test_run_dataset_parallel_output_is_byte_identical(tmp_path):
    cfg1, transports1, _ = make_env(parallelism=1)
    cfg8, transports8, _ = make_env(parallelism=8)
    a = tmp_path / "serial"
    b = tmp_path / "threaded"
    run_dataset(dataset_records(), cfg1, out=a, transports=transports1)
    run_dataset(dataset_records(), cfg8, out=b, transports=transports8)
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    for path in sorted((a / "masks").iterdir()):
        assert path.read_bytes() == (b / "masks" / path.name).read_bytes()


def test_run_dataset_failed_count(tmp_path):
    cfg, transports, _ = make_env()
    records = dataset_records() + [
        record("e_broken", exp="the unfixtured thing", known=True, exists=True)
    ]
    result = run_dataset(records, cfg, out=tmp_path / "out", transports=transports)
    assert result.failed_count == 1
    # Failed expressions still appear in the manifest with the error meta.
    entries = {e.expression_id: e.meta_text for e in result.manifest.entries}
    assert entries["e_broken"] == "[META:ERROR] segment"


def test_run_dataset_emits_trace_logs(caplog):
    cfg, transports, _ = make_env()
    with caplog.at_level("INFO", logger="refvos.pipeline"):
        run_dataset(dataset_records()[:2], cfg, transports=transports)
    assert sum("trace" in r.message for r in caplog.records) == 2
