"""Expression-level and dataset-level scoring.

Reproduces the leaderboard arithmetic: per-expression J and F means,
their average J&F, presence accuracies N-acc (absence predicted on
target-absent expressions) and T-acc (presence predicted on
target-present expressions), and Final = mean(J&F, N-acc, T-acc).

J and F are averaged only over ground-truth-present expressions;
absent expressions are fully captured by N-acc.  An empty denominator
class scores 1.0 and is flagged in ``EvalResult.warnings`` so small
synthetic suites stay runnable.
"""

from dataclasses import dataclass

from .errors import AlignmentError, UsageError
from .masks import MaskTrajectory, boundary_f, jaccard

__all__ = [
    "ExpressionScore",
    "EvalResult",
    "score_expression",
    "aggregate",
    "evaluate_predictions",
    "jf_of",
    "final_of",
    "format_report",
    "result_to_json",
]

REPORT_COLUMNS = ("J&F", "J", "F", "N-acc.", "T-acc.", "Final")


@dataclass(frozen=True)
class ExpressionScore:
    """Frame-averaged scores for one expression."""

    expression_id: str
    j_mean: float
    f_mean: float
    gt_present: bool
    pred_present: bool


@dataclass(frozen=True)
class EvalResult:
    """Aggregate scores in leaderboard column order."""

    j: float
    f: float
    jf: float
    n_acc: float
    t_acc: float
    final: float
    per_expression: tuple[ExpressionScore, ...]
    warnings: tuple[str, ...] = ()


def jf_of(j: float, f: float) -> float:
    """J&F is the arithmetic mean of region and boundary scores."""
    return (j + f) / 2.0


def final_of(jf: float, n_acc: float, t_acc: float) -> float:
    """Final is the arithmetic mean of J&F, N-acc and T-acc."""
    return (jf + n_acc + t_acc) / 3.0


def score_expression(
    pred: MaskTrajectory,
    gt: MaskTrajectory,
    gt_present: bool,
    *,
    expression_id: str = "",
    tol: float | None = None,
) -> ExpressionScore:
    """Score one expression frame by frame.

    ``j_mean`` / ``f_mean`` average :func:`refvos.masks.jaccard` and
    :func:`refvos.masks.boundary_f` over all frames (the both-empty
    frame convention applies).  ``pred_present`` is true iff any
    predicted frame is non-empty.  ``tol=None`` uses the per-frame
    default boundary band.
    """
    if pred.frame_count != gt.frame_count:
        raise AlignmentError(
            f"trajectory lengths differ: pred {pred.frame_count}, gt {gt.frame_count}"
        )
    for t, (p, g) in enumerate(zip(pred.masks, gt.masks)):
        if p.shape != g.shape:
            raise AlignmentError(
                f"frame {t} dims differ: pred {p.shape}, gt {g.shape}"
            )
    if pred.frame_count == 0:
        raise AlignmentError("cannot score an empty trajectory")
    j_vals = [jaccard(p, g) for p, g in zip(pred.masks, gt.masks)]
    f_vals = [boundary_f(p, g, tol) for p, g in zip(pred.masks, gt.masks)]
    return ExpressionScore(
        expression_id=expression_id,
        j_mean=sum(j_vals) / len(j_vals),
        f_mean=sum(f_vals) / len(f_vals),
        gt_present=bool(gt_present),
        pred_present=not pred.is_all_empty,
    )


def aggregate(scores) -> EvalResult:
    """Fold per-expression scores into an :class:`EvalResult`."""
    scores = tuple(scores)
    if not scores:
        raise UsageError("aggregate requires at least one expression score")
    present = [s for s in scores if s.gt_present]
    absent = [s for s in scores if not s.gt_present]
    warnings = []
    if present:
        j = sum(s.j_mean for s in present) / len(present)
        f = sum(s.f_mean for s in present) / len(present)
        t_acc = sum(1 for s in present if s.pred_present) / len(present)
    else:
        j = f = t_acc = 1.0
        warnings.append("no gt-present expressions: J, F, T-acc. vacuously 1.0")
    if absent:
        n_acc = sum(1 for s in absent if not s.pred_present) / len(absent)
    else:
        n_acc = 1.0
        warnings.append("no gt-absent expressions: N-acc. vacuously 1.0")
    jf = jf_of(j, f)
    return EvalResult(
        j=j,
        f=f,
        jf=jf,
        n_acc=n_acc,
        t_acc=t_acc,
        final=final_of(jf, n_acc, t_acc),
        per_expression=scores,
        warnings=tuple(warnings),
    )


def evaluate_predictions(preds, gts, *, tol: float | None = None) -> EvalResult:
    """Score prediction records against ground-truth records.

    Both arguments are sequences of records carrying video_id,
    expression_id and trajectory (see :mod:`refvos.metadata`).  Records
    are aligned by (video_id, expression_id); any mismatch raises an
    :class:`AlignmentError` listing the offending ids.  An expression
    counts as gt-present iff any ground-truth frame is non-empty.
    """
    pred_map = {(p.video_id, p.expression_id): p for p in preds}
    gt_map = {(g.video_id, g.expression_id): g for g in gts}
    missing = sorted(k for k in gt_map if k not in pred_map)
    extra = sorted(k for k in pred_map if k not in gt_map)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing predictions for {missing[:5]}")
        if extra:
            parts.append(f"predictions without ground truth for {extra[:5]}")
        raise AlignmentError("; ".join(parts))
    scores = []
    for key in sorted(gt_map):
        pred, gt = pred_map[key], gt_map[key]
        scores.append(
            score_expression(
                pred.trajectory,
                gt.trajectory,
                gt_present=not gt.trajectory.is_all_empty,
                expression_id=key[1],
                tol=tol,
            )
        )
    return aggregate(scores)


def format_report(result: EvalResult) -> str:
    """Text table mirroring the leaderboard column order."""
    values = (result.jf, result.j, result.f, result.n_acc, result.t_acc)
    header = "".join(f"{name:>8}" for name in REPORT_COLUMNS[:-1])
    header += f"{REPORT_COLUMNS[-1]:>10}"
    row = "".join(f"{v:>8.4f}" for v in values) + f"{result.final:>10.6f}"
    lines = [header, row]
    for note in result.warnings:
        lines.append(f"# {note}")
    return "\n".join(lines)


def result_to_json(result: EvalResult) -> dict:
    """Machine-readable form: one record per expression plus an aggregate."""
    return {
        "aggregate": {
            "j": result.j,
            "f": result.f,
            "jf": result.jf,
            "n_acc": result.n_acc,
            "t_acc": result.t_acc,
            "final": result.final,
            "warnings": list(result.warnings),
        },
        "expressions": [
            {
                "expression_id": s.expression_id,
                "j_mean": s.j_mean,
                "f_mean": s.f_mean,
                "gt_present": s.gt_present,
                "pred_present": s.pred_present,
            }
            for s in result.per_expression
        ],
    }
