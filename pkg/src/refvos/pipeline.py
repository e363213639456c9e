"""Staged pipeline: transcript -> existence gate -> prompt -> coarse
segmentation -> reliability assessment -> optional refinement -> fusion.

Expressions are independent units of work.  A run builds one transport
per backend kind up front, maps expressions through
:func:`run_expression` with bounded parallelism, and collects results
in deterministic (video_id, expression_id) order, so the written
manifest is byte-identical regardless of the parallelism setting.

Failure policy: a backend error that survives its retry marks the
expression failed and emits an all-zero trajectory with meta text
"[META:ERROR] <stage>".  A batch run must always produce a complete
submission, so errors never abort the run.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import backends
from .agentic import (
    AgenticConfig,
    assess,
    derive_prompt,
    first_nonempty_anchor,
    fuse,
    report_to_json,
)
from .backends import BackendEndpoint, Transport
from .errors import BackendError, ConfigError, ProtocolError
from .masks import MaskTrajectory
from .metadata import (
    NO_OBJECT_META,
    ExpressionRecord,
    Manifest,
    PredictionRecord,
    canonical_json,
    write_predictions,
)
from .prompts import build_prompt
from . import protocol

__all__ = [
    "GATE_POLICIES",
    "ANCHOR_POLICIES",
    "REFINE_POLICIES",
    "PipelineConfig",
    "StageEvent",
    "StageTrace",
    "RunResult",
    "make_transports",
    "acquire_transcript",
    "gate_decision",
    "run_expression",
    "run_dataset",
    "trace_to_json",
]

log = logging.getLogger("refvos.pipeline")

GATE_POLICIES = ("metadata_first", "always_judge")
ANCHOR_POLICIES = ("scored", "first_nonempty")
REFINE_POLICIES = ("recommended", "always", "never")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs: backends, thresholds, and policies.

    gate_policy picks where the existence verdict comes from:
    metadata_first trusts presence info when the document carries it
    and consults the judge only otherwise; always_judge asks the judge
    regardless.  gate_enabled=False bypasses the gate entirely (for
    ablations); anchor_policy/refine_policy select the refinement
    strategy the same way.
    """

    endpoints: Mapping[str, BackendEndpoint]
    agentic: AgenticConfig = AgenticConfig()
    gate_policy: str = "metadata_first"
    gate_enabled: bool = True
    anchor_policy: str = "scored"
    refine_policy: str = "recommended"
    parallelism: int = 1
    judge_sample_count: int = 8

    def __post_init__(self):
        object.__setattr__(self, "endpoints", dict(self.endpoints))
        missing = [k for k in protocol.ENDPOINT_KINDS if k not in self.endpoints]
        if missing:
            raise ConfigError(f"endpoints missing for kinds: {', '.join(missing)}")
        if self.gate_policy not in GATE_POLICIES:
            raise ConfigError(f"unknown gate_policy {self.gate_policy!r}")
        if self.anchor_policy not in ANCHOR_POLICIES:
            raise ConfigError(f"unknown anchor_policy {self.anchor_policy!r}")
        if self.refine_policy not in REFINE_POLICIES:
            raise ConfigError(f"unknown refine_policy {self.refine_policy!r}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.judge_sample_count < 1:
            raise ConfigError(
                f"judge_sample_count must be >= 1, got {self.judge_sample_count}"
            )


@dataclass(frozen=True)
class StageEvent:
    stage: str
    status: str  # "ok" | "skipped" | "failed"
    duration_s: float
    detail: dict


@dataclass(frozen=True)
class StageTrace:
    video_id: str
    expression_id: str
    events: tuple[StageEvent, ...]
    failed: bool
    gate_verdict: bool | None
    anchor: int | None
    refine_invoked: bool


@dataclass(frozen=True)
class RunResult:
    predictions: tuple[PredictionRecord, ...]
    traces: tuple[StageTrace, ...]
    manifest: Manifest | None

    @property
    def failed_count(self) -> int:
        return sum(1 for t in self.traces if t.failed)


def make_transports(cfg: PipelineConfig) -> dict[str, Transport]:
    return {kind: backends.make_transport(ep) for kind, ep in cfg.endpoints.items()}


class _Tracer:
    def __init__(self):
        self.events: list[StageEvent] = []
        self._t0 = 0.0

    def start(self):
        self._t0 = time.perf_counter()

    def done(self, stage: str, status: str = "ok", **detail):
        elapsed = time.perf_counter() - self._t0
        self.events.append(StageEvent(stage, status, elapsed, detail))
        self._t0 = time.perf_counter()


def acquire_transcript(
    rec: ExpressionRecord,
    cfg: PipelineConfig,
    transports: Mapping[str, Transport],
) -> tuple[str, str]:
    """Return (transcript, source); source is metadata | asr | none."""
    if rec.transcript.strip():
        return rec.transcript, "metadata"
    if rec.audio_ref is not None:
        text = backends.asr_transcribe(
            cfg.endpoints["asr"], rec.audio_ref, transport=transports["asr"]
        )
        return text, "asr"
    return "", "none"


def gate_decision(
    rec: ExpressionRecord,
    transcript: str,
    cfg: PipelineConfig,
    transports: Mapping[str, Transport],
) -> tuple[bool, str, tuple[int, ...]]:
    """Decide effective existence; returns (exists, source, sampled_frames).

    An empty transcript is never groundable and always gates off, even
    with the gate disabled.
    """
    if not transcript.strip():
        return False, "empty_transcript", ()
    if not cfg.gate_enabled:
        return True, "disabled", ()
    if cfg.gate_policy == "metadata_first" and rec.presence_known:
        return bool(rec.target_exists), "metadata", ()
    frames = backends.sample_frames(rec.frame_count, cfg.judge_sample_count)
    verdict = backends.judge_exists(
        cfg.endpoints["judge"],
        rec.video_id,
        frames,
        transcript,
        transport=transports["judge"],
    )
    return verdict.exists, "judge", frames


def run_expression(
    rec: ExpressionRecord,
    cfg: PipelineConfig,
    transports: Mapping[str, Transport] | None = None,
) -> tuple[PredictionRecord, StageTrace]:
    """Run the full staged pipeline for one expression.

    Gated-off expressions short-circuit: the all-zero trajectory and
    the exact no-object meta text are emitted without any segment or
    refine backend call.
    """
    if transports is None:
        transports = make_transports(cfg)
    tracer = _Tracer()
    tracer.start()
    stage = "transcript"
    gate_verdict: bool | None = None
    anchor: int | None = None
    refine_invoked = False

    def finish(record: PredictionRecord, failed: bool = False):
        trace = StageTrace(
            video_id=rec.video_id,
            expression_id=rec.expression_id,
            events=tuple(tracer.events),
            failed=failed,
            gate_verdict=gate_verdict,
            anchor=anchor,
            refine_invoked=refine_invoked,
        )
        log.info("trace %s", canonical_json(trace_to_json(trace)).rstrip("\n"))
        return record, trace

    def all_zero(meta_text: str) -> PredictionRecord:
        return PredictionRecord(
            video_id=rec.video_id,
            expression_id=rec.expression_id,
            meta_text=meta_text,
            trajectory=MaskTrajectory.all_zero(rec.frame_dims),
        )

    try:
        # Stage: transcript acquisition.
        transcript, source = acquire_transcript(rec, cfg, transports)
        tracer.done("transcript", "ok", source=source)

        # Stage: existence gate.
        stage = "gate"
        gate_verdict, source, sampled = gate_decision(rec, transcript, cfg, transports)
        detail = {"source": source, "exists": gate_verdict}
        if sampled:
            detail["sampled_frames"] = list(sampled)
        tracer.done("gate", "skipped" if source == "disabled" else "ok", **detail)
        if not gate_verdict:
            return finish(all_zero(NO_OBJECT_META))

        # Stage: prompt construction.
        stage = "prompt"
        prompt = build_prompt(transcript)
        tracer.done("prompt", "ok", template_id=prompt.template_id)

        # Stage: coarse segmentation over the full video.
        stage = "segment"
        coarse = backends.segment_video(
            cfg.endpoints["segment"],
            rec.video_id,
            prompt,
            rec.frame_dims,
            transport=transports["segment"],
        )
        tracer.done("segment", "ok", frames=coarse.frame_count)

        # Stage: reliability assessment and refinement decision.
        stage = "assess"
        report = assess(coarse, cfg.agentic)
        if cfg.anchor_policy == "first_nonempty":
            anchor = first_nonempty_anchor(coarse)
        else:
            anchor = report.anchor
        if cfg.refine_policy == "never":
            do_refine = False
        elif cfg.refine_policy == "always":
            do_refine = anchor is not None
        else:
            do_refine = report.refine_recommended and anchor is not None
        tracer.done("assess", "ok", report=report_to_json(report), anchor=anchor,
                    refine=do_refine)

        final = coarse
        if do_refine:
            # Stage: geometric-prompt refinement plus fusion.
            stage = "refine"
            refine_invoked = True
            gprompt = derive_prompt(coarse, anchor)
            result = backends.refine(
                cfg.endpoints["refine"],
                rec.video_id,
                gprompt,
                rec.frame_dims,
                transport=transports["refine"],
            )
            tracer.done("refine", "ok", window=list(result.frame_indices))
            stage = "fuse"
            final = fuse(coarse, result, cfg.agentic.confidence_min)
            tracer.done("fuse", "ok")

        return finish(
            PredictionRecord(
                video_id=rec.video_id,
                expression_id=rec.expression_id,
                meta_text="",
                trajectory=final,
            )
        )
    except (BackendError, ProtocolError) as exc:
        tracer.done(stage, "failed", error=str(exc))
        return finish(all_zero(f"[META:ERROR] {stage}"), failed=True)


def run_dataset(
    records: Sequence[ExpressionRecord],
    cfg: PipelineConfig,
    out=None,
    transports: Mapping[str, Transport] | None = None,
) -> RunResult:
    """Run every expression and optionally write the manifest to ``out``.

    Output order is (video_id, expression_id) regardless of
    parallelism; all shared state is immutable during the run.
    """
    if transports is None:
        transports = make_transports(cfg)
    ordered = sorted(records, key=lambda r: (r.video_id, r.expression_id))

    if cfg.parallelism == 1 or len(ordered) <= 1:
        results = [run_expression(r, cfg, transports) for r in ordered]
    else:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(lambda r: run_expression(r, cfg, transports), ordered))

    predictions = tuple(pred for pred, _ in results)
    traces = tuple(trace for _, trace in results)
    manifest = write_predictions(predictions, out) if out is not None else None
    return RunResult(predictions=predictions, traces=traces, manifest=manifest)


def trace_to_json(trace: StageTrace) -> dict:
    return {
        "video_id": trace.video_id,
        "expression_id": trace.expression_id,
        "failed": trace.failed,
        "gate_verdict": trace.gate_verdict,
        "anchor": trace.anchor,
        "refine_invoked": trace.refine_invoked,
        "events": [
            {
                "stage": e.stage,
                "status": e.status,
                "duration_s": e.duration_s,
                "detail": e.detail,
            }
            for e in trace.events
        ],
    }
