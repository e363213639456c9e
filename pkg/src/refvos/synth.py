"""Synthetic scenario generator and ablation harness.

Scenarios are parametric moving shapes (discs and axis-aligned squares)
on otherwise empty frames, chosen so boundary metrics have checkable
closed-form baselines.  Each scenario yields a ground-truth trajectory,
a corrupted "coarse segmenter" trajectory, and a possibly garbled
transcript; :func:`build_dataset` writes these as an expression
document, a scripted backend fixture file, and a ground-truth manifest,
so the orchestrator consumes them through its normal interfaces.

All randomness flows from the scenario seed through
``numpy.random.default_rng``; the same scenario always produces
identical bytes.
"""

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .backends import BackendEndpoint
from .errors import ConfigError
from .masks import (
    BinaryMask,
    MaskTrajectory,
    jaccard,
    mask_to_json,
    rle_encode,
)
from .metadata import (
    NO_OBJECT_META,
    PredictionRecord,
    canonical_json,
    load_expressions,
    load_predictions,
    write_predictions,
)
from .metrics import EvalResult, evaluate_predictions
from .pipeline import AgenticConfig, PipelineConfig, run_dataset
from .prompts import build_prompt
from . import protocol

__all__ = [
    "GARBLE_WORDS",
    "ShapeTrack",
    "CorruptionSpec",
    "Scenario",
    "make_scenario",
    "default_scenarios",
    "generate",
    "DatasetPaths",
    "build_dataset",
    "scripted_endpoints",
    "default_variants",
    "AblationEntry",
    "AblationReport",
    "run_ablation",
    "format_ablation",
]

# Substitution vocabulary for simulated transcription errors; disjoint
# from every word the phrase builder can emit.
GARBLE_WORDS = (
    "umbrella",
    "cactus",
    "trombone",
    "waffle",
    "lantern",
    "pickle",
    "gazebo",
    "marmalade",
)

_COLORS = ("red", "blue", "green", "amber", "violet")


@dataclass(frozen=True)
class ShapeTrack:
    """A shape of fixed size moving linearly between two centers.

    ``size`` is the radius for a disc and the half-side for a square
    block; centers are (row, col) and interpolate over the video.
    """

    kind: str  # "disc" | "rect"
    size: int
    start: tuple[int, int]
    end: tuple[int, int]

    def __post_init__(self):
        if self.kind not in ("disc", "rect"):
            raise ConfigError(f"unknown shape kind {self.kind!r}")
        if self.size < 1:
            raise ConfigError(f"shape size must be >= 1, got {self.size}")

    def center_at(self, t: int, frames: int) -> tuple[int, int]:
        if frames == 1:
            return self.start
        frac = t / (frames - 1)
        row = round(self.start[0] + (self.end[0] - self.start[0]) * frac)
        col = round(self.start[1] + (self.end[1] - self.start[1]) * frac)
        return row, col


@dataclass(frozen=True)
class CorruptionSpec:
    """Noise knobs applied between ground truth and the coarse fixture.

    boundary_jitter perturbs the shape size per frame by a nonzero
    delta in [-j, j]; dropout empties frames; distractor_swap replaces
    frames with the first distractor's shape; asr_word_sub garbles
    transcript words; hallucination_rate is the chance that a
    target-absent scenario still gets a (distractor) trajectory from
    the coarse segmenter.  The default spec is the identity.
    """

    boundary_jitter: int = 0
    dropout_rate: float = 0.0
    distractor_swap_rate: float = 0.0
    asr_word_sub_rate: float = 0.0
    hallucination_rate: float = 0.0

    def __post_init__(self):
        if self.boundary_jitter < 0:
            raise ConfigError(f"boundary_jitter must be >= 0, got {self.boundary_jitter}")
        for name in ("dropout_rate", "distractor_swap_rate", "asr_word_sub_rate",
                     "hallucination_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class Scenario:
    seed: int
    frames: int
    dims: tuple[int, int]
    object_track: ShapeTrack
    phrase: str
    distractors: tuple[ShapeTrack, ...] = ()
    gt_present: bool = True
    corruption: CorruptionSpec = CorruptionSpec()

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigError(f"frames must be >= 1, got {self.frames}")
        if not self.phrase.strip():
            raise ConfigError("phrase must be non-empty")


def _rasterize(track: ShapeTrack, t: int, frames: int, dims: tuple[int, int],
               size: int | None = None) -> BinaryMask:
    height, width = dims
    size = track.size if size is None else max(1, size)
    row, col = track.center_at(t, frames)
    yy, xx = np.ogrid[:height, :width]
    if track.kind == "disc":
        dense = (yy - row) ** 2 + (xx - col) ** 2 <= size * size
    else:
        dense = (np.abs(yy - row) <= size) & (np.abs(xx - col) <= size)
    return rle_encode(dense)


def _check_fits(track: ShapeTrack, dims: tuple[int, int], slack: int, label: str):
    height, width = dims
    reach = track.size + slack
    for row, col in (track.start, track.end):
        if not (reach <= row <= height - 1 - reach and reach <= col <= width - 1 - reach):
            raise ConfigError(
                f"dims {height}x{width} too small for {label} "
                f"(size {track.size} + jitter {slack} at center ({row}, {col}))"
            )


def make_scenario(
    seed: int,
    *,
    frames: int = 24,
    dims: tuple[int, int] = (48, 64),
    gt_present: bool = True,
    corruption: CorruptionSpec = CorruptionSpec(),
) -> Scenario:
    """Build a randomized but fully seed-determined scenario.

    The object is a disc or square of size 5-7 on a random linear
    track; one distractor of size 2 always exists so swap and
    hallucination corruptions are well defined.  The size gap is
    deliberate: even at jitter 2 the object's area range never overlaps
    the distractor's, so area-based anchor scoring can tell them apart,
    and a merely jittered frame always stays above the refiner's
    faithfulness threshold.  The phrase describes the object and never
    shares words with :data:`GARBLE_WORDS`.
    """
    rng = np.random.default_rng([seed, 1])
    height, width = dims
    kind = "disc" if rng.random() < 0.5 else "rect"
    size = int(rng.integers(5, 8))
    margin = size + corruption.boundary_jitter

    def pick_center(reach: int) -> tuple[int, int]:
        if height - reach <= reach or width - reach <= reach:
            raise ConfigError(f"dims {height}x{width} too small for shape reach {reach}")
        return (
            int(rng.integers(reach, height - reach)),
            int(rng.integers(reach, width - reach)),
        )

    start = pick_center(margin)
    end = pick_center(margin)
    track = ShapeTrack(kind=kind, size=size, start=start, end=end)
    dsize = 2
    distractor = ShapeTrack(kind=kind, size=dsize,
                            start=pick_center(dsize), end=pick_center(dsize))

    color = _COLORS[int(rng.integers(0, len(_COLORS)))]
    shape_word = "disc" if kind == "disc" else "block"
    dcol = end[1] - start[1]
    if dcol > 0:
        direction = "right"
    elif dcol < 0:
        direction = "left"
    else:
        direction = "down" if end[0] >= start[0] else "up"
    phrase = f"the {color} {shape_word} moving {direction}"

    return Scenario(
        seed=seed,
        frames=frames,
        dims=dims,
        object_track=track,
        phrase=phrase,
        distractors=(distractor,),
        gt_present=gt_present,
        corruption=corruption,
    )


def default_scenarios(
    count: int,
    *,
    base_seed: int = 0,
    gt_absent_fraction: float = 0.3,
    frames: int = 24,
    dims: tuple[int, int] = (48, 64),
    corruption: CorruptionSpec | None = None,
) -> list[Scenario]:
    """The standard noise regime: jitter 2, word subs 0.2, swaps,
    light dropout, guaranteed hallucination on absent targets."""
    if corruption is None:
        corruption = CorruptionSpec(
            boundary_jitter=2,
            dropout_rate=0.05,
            distractor_swap_rate=0.15,
            asr_word_sub_rate=0.2,
            hallucination_rate=1.0,
        )
    absent_every = max(1, round(1 / gt_absent_fraction)) if gt_absent_fraction > 0 else 0
    scenarios = []
    for i in range(count):
        # deterministic stride keeps the absent fraction exact-ish
        absent = absent_every > 0 and i % absent_every == absent_every - 1
        scenarios.append(
            make_scenario(
                base_seed + i,
                frames=frames,
                dims=dims,
                gt_present=not absent,
                corruption=corruption,
            )
        )
    return scenarios


def generate(scenario: Scenario) -> tuple[MaskTrajectory, MaskTrajectory, str]:
    """Produce (gt, coarse_fixture, transcript) for a scenario.

    The coarse fixture models an imperfect segmenter: per-frame size
    jitter (nonzero delta up to boundary_jitter), frame dropout, and
    distractor swaps on present targets; on absent targets it
    hallucinates the distractor track with probability
    hallucination_rate.  The transcript garbles each phrase word with
    probability asr_word_sub_rate.
    """
    spec = scenario.corruption
    frames, dims = scenario.frames, scenario.dims
    _check_fits(scenario.object_track, dims, spec.boundary_jitter, "object track")
    for i, d in enumerate(scenario.distractors):
        _check_fits(d, dims, 0, f"distractor {i}")
    needs_distractor = spec.distractor_swap_rate > 0 or (
        not scenario.gt_present and spec.hallucination_rate > 0
    )
    if needs_distractor and not scenario.distractors:
        raise ConfigError("corruption needs at least one distractor track")

    rng = np.random.default_rng([scenario.seed, 2])
    track = scenario.object_track

    if scenario.gt_present:
        gt_masks = [_rasterize(track, t, frames, dims) for t in range(frames)]
    else:
        gt_masks = [BinaryMask.empty(*dims) for _ in range(frames)]
    gt = MaskTrajectory(tuple(gt_masks))

    # Corruption draws happen in a fixed order so seeds stay stable.
    if spec.boundary_jitter > 0:
        magnitudes = rng.integers(1, spec.boundary_jitter + 1, size=frames)
        signs = rng.integers(0, 2, size=frames) * 2 - 1
        deltas = magnitudes * signs
    else:
        deltas = np.zeros(frames, dtype=int)
    drops = rng.random(frames) < spec.dropout_rate
    swaps = rng.random(frames) < spec.distractor_swap_rate
    hallucinate = rng.random() < spec.hallucination_rate

    coarse_masks: list[BinaryMask] = []
    if scenario.gt_present:
        for t in range(frames):
            if drops[t]:
                coarse_masks.append(BinaryMask.empty(*dims))
            elif swaps[t]:
                coarse_masks.append(_rasterize(scenario.distractors[0], t, frames, dims))
            else:
                coarse_masks.append(
                    _rasterize(track, t, frames, dims, size=track.size + int(deltas[t]))
                )
    elif scenario.distractors and hallucinate:
        coarse_masks = [
            _rasterize(scenario.distractors[0], t, frames, dims) for t in range(frames)
        ]
    else:
        coarse_masks = [BinaryMask.empty(*dims) for _ in range(frames)]
    coarse = MaskTrajectory(tuple(coarse_masks))

    words = scenario.phrase.split()
    out_words = []
    for word in words:
        if rng.random() < spec.asr_word_sub_rate:
            out_words.append(GARBLE_WORDS[int(rng.integers(0, len(GARBLE_WORDS)))])
        else:
            out_words.append(word)
    transcript = " ".join(out_words)

    return gt, coarse, transcript


@dataclass(frozen=True)
class DatasetPaths:
    root: Path
    expressions: Path
    fixtures: Path
    gt_manifest: Path


def build_dataset(
    scenarios: Sequence[Scenario],
    out,
    *,
    refiner: str = "anchor_faithful",
    faithful_iou: float = 0.3,
) -> DatasetPaths:
    """Materialize scenarios as orchestrator-ready artifacts.

    Writes expressions.json (one video/expression per scenario),
    fixtures.json (judge/segment/refine entries in the scripted-fixture
    format), and a ground-truth manifest under gt/.

    The scripted refiner comes in two flavors.  "perfect" returns the
    ground-truth trajectory at confidence 1 from any anchor.
    "anchor_faithful" propagates whatever object the anchor's coarse
    mask actually overlaps (IoU >= faithful_iou against ground truth
    picks the object, otherwise the distractor), so a badly chosen
    anchor poisons the refinement, which is what makes anchor policies
    comparable.
    """
    if refiner not in ("perfect", "anchor_faithful"):
        raise ConfigError(f"unknown refiner model {refiner!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    videos: dict = {}
    judge_entries = []
    segment_entries = []
    refine_entries = []
    gt_records = []

    for i, scenario in enumerate(scenarios):
        vid = f"video_{i:04d}"
        eid = f"expr_{i:04d}"
        gt, coarse, transcript = generate(scenario)
        height, width = scenario.dims

        videos[vid] = {
            "frame_count": scenario.frames,
            "height": height,
            "width": width,
            "expressions": {
                eid: {
                    "exp": transcript,
                    "presence_info": {"target_exists": scenario.gt_present},
                }
            },
        }
        judge_entries.append({
            "request": {"video_ref": vid, "phrase": transcript},
            "response": {"exists": scenario.gt_present},
        })
        segment_entries.append({
            "request": {"video_ref": vid, "prompt": build_prompt(transcript).text},
            "response": {"frames": [mask_to_json(m) for m in coarse.masks]},
        })

        if scenario.distractors:
            distractor_masks = [
                _rasterize(scenario.distractors[0], t, scenario.frames, scenario.dims)
                for t in range(scenario.frames)
            ]
        else:
            distractor_masks = [BinaryMask.empty(height, width)] * scenario.frames
        for t in range(scenario.frames):
            if coarse.frame(t).is_empty:
                continue  # an empty frame can never be an anchor
            if refiner == "perfect":
                target = gt.masks
            elif jaccard(coarse.frame(t), gt.frame(t)) >= faithful_iou:
                target = gt.masks
            else:
                target = distractor_masks
            refine_entries.append({
                "request": {"video_ref": vid, "anchor": t},
                "response": {
                    "anchor": t,
                    "frames": [
                        {"frame_index": u, "confidence": 1.0, "mask": mask_to_json(m)}
                        for u, m in enumerate(target)
                    ],
                },
            })

        gt_records.append(
            PredictionRecord(
                video_id=vid,
                expression_id=eid,
                meta_text="" if scenario.gt_present else NO_OBJECT_META,
                trajectory=gt,
            )
        )

    expressions_path = out / "expressions.json"
    expressions_path.write_text(
        canonical_json({"videos": videos}, indent=2), encoding="utf-8"
    )
    fixtures_path = out / "fixtures.json"
    fixtures_path.write_text(
        canonical_json(
            {
                "asr": [],
                "judge": judge_entries,
                "segment": segment_entries,
                "refine": refine_entries,
            },
            indent=2,
        ),
        encoding="utf-8",
    )
    gt_dir = out / "gt"
    write_predictions(gt_records, gt_dir)
    return DatasetPaths(
        root=out,
        expressions=expressions_path,
        fixtures=fixtures_path,
        gt_manifest=gt_dir / "manifest.json",
    )


def scripted_endpoints(fixture_path) -> dict[str, BackendEndpoint]:
    return {
        kind: BackendEndpoint(kind=kind, transport="scripted", address=str(fixture_path))
        for kind in protocol.ENDPOINT_KINDS
    }


def _placeholder_endpoints() -> dict[str, BackendEndpoint]:
    return {
        kind: BackendEndpoint(kind=kind, transport="scripted", address="unset")
        for kind in protocol.ENDPOINT_KINDS
    }


def default_variants() -> list[tuple[str, PipelineConfig]]:
    """The four staged configurations, weakest first.

    no_gate segments everything; gate_only adds the judge; gate_refine
    adds refinement from a naive first-non-empty anchor; the planner
    variant scores anchors and refines only on weak reliability
    (smoothness_min 0.95 so jittered trajectories reliably qualify).
    Endpoint addresses are placeholders; :func:`run_ablation` swaps in
    the generated fixtures.
    """
    eps = _placeholder_endpoints()
    return [
        ("no_gate", PipelineConfig(
            endpoints=eps, gate_enabled=False, refine_policy="never")),
        ("gate_only", PipelineConfig(
            endpoints=eps, gate_policy="always_judge", refine_policy="never")),
        ("gate_refine", PipelineConfig(
            endpoints=eps, gate_policy="always_judge", refine_policy="always",
            anchor_policy="first_nonempty")),
        ("gate_refine_planner", PipelineConfig(
            endpoints=eps, gate_policy="always_judge", refine_policy="recommended",
            anchor_policy="scored", agentic=AgenticConfig(smoothness_min=0.95))),
    ]


@dataclass(frozen=True)
class AblationEntry:
    name: str
    result: EvalResult


@dataclass(frozen=True)
class AblationReport:
    entries: tuple[AblationEntry, ...]
    scenario_count: int

    @property
    def finals(self) -> dict[str, float]:
        return {e.name: e.result.final for e in self.entries}

    @property
    def strictly_increasing(self) -> bool:
        finals = [e.result.final for e in self.entries]
        return all(a < b for a, b in zip(finals, finals[1:]))


def run_ablation(
    variants: Sequence[tuple[str, PipelineConfig]],
    scenarios: Sequence[Scenario],
    workdir,
    *,
    refiner: str = "anchor_faithful",
) -> AblationReport:
    """Run every variant over the same generated dataset and score it.

    Endpoint addresses in the given configs are replaced by the
    freshly built scripted fixtures; everything else (policies,
    thresholds, parallelism) is taken as given.  Entries keep the
    variant order, so ordering assertions read naturally.
    """
    if len(variants) < 2:
        raise ConfigError("ablation needs at least two variants")
    workdir = Path(workdir)
    paths = build_dataset(scenarios, workdir / "data", refiner=refiner)
    records = load_expressions(paths.expressions)
    gt_records = load_predictions(paths.gt_manifest)
    endpoints = scripted_endpoints(paths.fixtures)

    entries = []
    for name, cfg in variants:
        run_cfg = dataclasses.replace(cfg, endpoints=endpoints)
        result = run_dataset(records, run_cfg)
        eval_result = evaluate_predictions(result.predictions, gt_records)
        entries.append(AblationEntry(name=name, result=eval_result))
    return AblationReport(entries=tuple(entries), scenario_count=len(scenarios))


def format_ablation(report: AblationReport) -> str:
    lines = [f"# {report.scenario_count} scenarios"]
    width = max(len(e.name) for e in report.entries)
    for e in report.entries:
        r = e.result
        lines.append(
            f"{e.name:<{width}}  final={r.final:.4f}  jf={r.jf:.4f} "
            f"n_acc={r.n_acc:.4f} t_acc={r.t_acc:.4f}"
        )
    marker = "strictly increasing" if report.strictly_increasing else "ORDER VIOLATION"
    lines.append(f"# {marker}")
    return "\n".join(lines)
