"""Reliability scoring and anchor-based refinement planning.

A coarse trajectory is judged on four signals: how many frames have a
mask at all (coverage), how smoothly the mask area changes between
adjacent frames, how fragmented the masks are, and how solid they are
relative to their bounding boxes.  Weak signals trigger the geometric
refinement pass; the anchor frame that seeds it is chosen by a scored
vote over solidity, local smoothness, and area typicality.

All functions here are pure over immutable trajectories.
"""

from dataclasses import dataclass
from statistics import median

from .errors import AlignmentError, UsageError
from .masks import (
    BinaryMask,
    GeometricPrompt,
    MaskTrajectory,
    area,
    bbox,
    center,
    connected_components,
)

__all__ = [
    "AgenticConfig",
    "ReliabilityReport",
    "assess",
    "select_anchor",
    "first_nonempty_anchor",
    "derive_prompt",
    "fuse",
    "report_to_json",
]


@dataclass(frozen=True)
class AgenticConfig:
    """Thresholds and weights for reliability scoring.

    Defaults are tuned so that a clean constant-shape trajectory never
    triggers refinement while heavy jitter, fragmentation, or hollow
    masks do:

    - coverage_min 0.05: below this the trajectory is too empty for an
      anchor to be trustworthy; pass it through unrefined.
    - smoothness_min 0.7: adjacent-frame area swings above 30% on
      average indicate unstable tracking.
    - fragmentation_max 1.5: a single object should yield about one
      component per frame.
    - solidity_min 0.3: masks filling under 30% of their bbox are
      likely speckle.
    - confidence_min 0.5: refined frames below this keep the coarse
      mask during fusion.
    """

    coverage_min: float = 0.05
    smoothness_min: float = 0.7
    fragmentation_max: float = 1.5
    solidity_min: float = 0.3
    confidence_min: float = 0.5
    w_solidity: float = 1 / 3
    w_smoothness: float = 1 / 3
    w_typicality: float = 1 / 3


@dataclass(frozen=True)
class ReliabilityReport:
    coverage: float
    area_smoothness: float
    fragmentation: float
    solidity: float
    anchor: int | None
    refine_recommended: bool


def _pair_smoothness(a1: int, a2: int) -> float:
    return 1.0 - abs(a2 - a1) / max(a2, a1)


def _solidity(mask: BinaryMask) -> float:
    box = bbox(mask)
    if box is None:
        return 0.0
    r0, c0, r1, c1 = box
    return area(mask) / ((r1 - r0 + 1) * (c1 - c0 + 1))


def assess(traj: MaskTrajectory, cfg: AgenticConfig = AgenticConfig()) -> ReliabilityReport:
    """Score a coarse trajectory and decide whether to refine it.

    area_smoothness averages ``1 - |dA| / max(A)`` over adjacent frame
    pairs where both masks are non-empty; with no such pair it is 1.
    fragmentation and solidity average over non-empty frames (0 when
    there are none).  refine_recommended requires minimum coverage plus
    at least one weak signal.
    """
    masks = traj.masks
    areas = [area(m) for m in masks]
    nonempty = [t for t, a in enumerate(areas) if a > 0]
    total = len(masks)
    coverage = len(nonempty) / total

    pair_terms = [
        _pair_smoothness(areas[t], areas[t + 1])
        for t in range(total - 1)
        if areas[t] > 0 and areas[t + 1] > 0
    ]
    smoothness = sum(pair_terms) / len(pair_terms) if pair_terms else 1.0

    if nonempty:
        fragmentation = sum(connected_components(masks[t]) for t in nonempty) / len(nonempty)
        solidity = sum(_solidity(masks[t]) for t in nonempty) / len(nonempty)
    else:
        fragmentation = 0.0
        solidity = 0.0

    anchor = select_anchor(traj, cfg)
    recommended = coverage >= cfg.coverage_min and (
        smoothness < cfg.smoothness_min
        or fragmentation > cfg.fragmentation_max
        or solidity < cfg.solidity_min
    )
    return ReliabilityReport(
        coverage=coverage,
        area_smoothness=smoothness,
        fragmentation=fragmentation,
        solidity=solidity,
        anchor=anchor,
        refine_recommended=recommended,
    )


def select_anchor(traj: MaskTrajectory, cfg: AgenticConfig = AgenticConfig()) -> int | None:
    """Pick the most trustworthy non-empty frame, or None if all empty.

    score(t) = w1*solidity(t) + w2*local_smoothness(t) + w3*typicality(t)
    where local_smoothness averages the pairwise term against the two
    temporal neighbors (a missing or empty neighbor contributes 1) and
    typicality = 1 - |A_t - median(A)| / max(A) over non-empty areas.
    Ties break toward the earliest frame, so appending empty frames
    never changes the choice.
    """
    masks = traj.masks
    areas = [area(m) for m in masks]
    nonempty = [t for t, a in enumerate(areas) if a > 0]
    if not nonempty:
        return None

    med = median(areas[t] for t in nonempty)
    max_area = max(areas[t] for t in nonempty)

    def local_smoothness(t: int) -> float:
        terms = []
        for u in (t - 1, t + 1):
            if 0 <= u < len(masks) and areas[u] > 0:
                terms.append(_pair_smoothness(areas[t], areas[u]))
            else:
                terms.append(1.0)
        return sum(terms) / len(terms)

    best_t = None
    best_score = -1.0
    for t in nonempty:
        score = (
            cfg.w_solidity * _solidity(masks[t])
            + cfg.w_smoothness * local_smoothness(t)
            + cfg.w_typicality * (1.0 - abs(areas[t] - med) / max_area)
        )
        if score > best_score:  # strict: ties keep the earliest frame
            best_score = score
            best_t = t
    return best_t


def first_nonempty_anchor(traj: MaskTrajectory) -> int | None:
    """Naive anchor policy: the first frame with any mask."""
    for t, mask in enumerate(traj.masks):
        if not mask.is_empty:
            return t
    return None


def derive_prompt(traj: MaskTrajectory, anchor: int) -> GeometricPrompt:
    """Turn the anchor mask into box and point prompts for the refiner."""
    if not 0 <= anchor < traj.frame_count:
        raise UsageError(f"anchor {anchor} out of range [0, {traj.frame_count})")
    mask = traj.frame(anchor)
    box = bbox(mask)
    if box is None:
        raise UsageError(f"anchor frame {anchor} has an empty mask")
    return GeometricPrompt(frame_index=anchor, bbox=box, point=center(mask))


def fuse(coarse: MaskTrajectory, refined, conf_min: float) -> MaskTrajectory:
    """Overlay refined masks onto the coarse trajectory.

    Each frame keeps the refined mask when one is present with
    confidence >= conf_min, otherwise the coarse mask.  Idempotent:
    fusing the same result twice changes nothing.
    """
    total = coarse.frame_count
    out = list(coarse.masks)
    for t, mask in refined.masks.items():
        if not 0 <= t < total:
            raise AlignmentError(f"refined frame {t} out of range [0, {total})")
        if mask.shape != out[t].shape:
            raise AlignmentError(
                f"refined frame {t} has dims {mask.shape}, expected {out[t].shape}"
            )
        if refined.confidence.get(t, 0.0) >= conf_min:
            out[t] = mask
    return MaskTrajectory(tuple(out))


def report_to_json(report: ReliabilityReport) -> dict:
    return {
        "coverage": report.coverage,
        "area_smoothness": report.area_smoothness,
        "fragmentation": report.fragmentation,
        "solidity": report.solidity,
        "anchor": report.anchor,
        "refine_recommended": report.refine_recommended,
    }
