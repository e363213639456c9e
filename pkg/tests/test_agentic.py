"""Unit tests for reliability scoring, anchor selection, and fusion."""

import numpy as np
import pytest

from refvos.agentic import (
    AgenticConfig,
    assess,
    derive_prompt,
    first_nonempty_anchor,
    fuse,
    report_to_json,
    select_anchor,
)
from refvos.backends import RefineResult
from refvos.errors import AlignmentError, UsageError
from refvos.masks import BinaryMask, MaskTrajectory
from tests.oracles import oracle_smoothness


def frame(area_shape, h=16, w=16, at=(0, 0)):
    """Dense frame with a filled rectangle of the given (rows, cols)."""
    grid = np.zeros((h, w), dtype=bool)
    r, c = at
    dr, dc = area_shape
    grid[r : r + dr, c : c + dc] = True
    return grid


def traj(*frames):
    return MaskTrajectory.from_dense(frames)


EMPTY16 = np.zeros((16, 16), dtype=bool)


# ---------------------------------------------------------------------------
# assess


def test_smoothness_hand_value():
    # Areas 100, 100, 10, 100: pair terms 1.0, 0.1, 0.1 -> mean 0.4.
    t = traj(frame((10, 10)), frame((10, 10)), frame((10, 1)), frame((10, 10)))
    r = assess(t)
    assert r.area_smoothness == pytest.approx(0.4)
    assert r.area_smoothness == pytest.approx(oracle_smoothness([100, 100, 10, 100]))
    assert r.coverage == 1.0
    assert r.fragmentation == 1.0
    assert r.solidity == 1.0
    # 0.4 < 0.7 smoothness floor, so refinement is recommended.
    assert r.refine_recommended


def test_smoothness_skips_pairs_with_an_empty_side():
    t = traj(frame((10, 10)), EMPTY16, frame((10, 10)))
    r = assess(t)
    assert r.area_smoothness == 1.0
    assert r.coverage == pytest.approx(2 / 3)


def test_assess_all_empty_trajectory():
    t = traj(EMPTY16, EMPTY16)
    r = assess(t)
    assert r.coverage == 0.0
    assert r.area_smoothness == 1.0
    assert r.fragmentation == 0.0
    assert r.solidity == 0.0
    assert r.anchor is None
    assert not r.refine_recommended


def test_assess_clean_trajectory_not_recommended():
    t = traj(*[frame((6, 6)) for _ in range(5)])
    r = assess(t)
    assert r.area_smoothness == 1.0
    assert r.solidity == 1.0
    assert r.fragmentation == 1.0
    assert not r.refine_recommended
    assert r.anchor == 0


def test_fragmentation_triggers_recommendation():
    grid = np.zeros((16, 16), dtype=bool)
    grid[0, 0] = grid[8, 8] = True  # two separated pixels
    r = assess(MaskTrajectory.from_dense([grid] * 4))
    assert r.fragmentation == 2.0
    assert r.refine_recommended


def test_low_solidity_triggers_recommendation():
    grid = np.zeros((16, 16), dtype=bool)
    for i in range(8):
        grid[i, i] = True  # diagonal: area 8 in an 8x8 box
    r = assess(MaskTrajectory.from_dense([grid] * 4))
    assert r.solidity == pytest.approx(8 / 64)
    assert r.refine_recommended


def test_coverage_floor_blocks_recommendation():
    grid = np.zeros((16, 16), dtype=bool)
    grid[0, 0] = grid[8, 8] = True
    frames = [grid] + [EMPTY16] * 29  # coverage 1/30 < 0.05
    r = assess(MaskTrajectory.from_dense(frames))
    assert r.coverage < AgenticConfig().coverage_min
    assert not r.refine_recommended


def test_report_to_json_round_trips_fields():
    r = assess(traj(frame((6, 6)), frame((6, 6))))
    doc = report_to_json(r)
    assert doc == {
        "coverage": 1.0,
        "area_smoothness": 1.0,
        "fragmentation": 1.0,
        "solidity": 1.0,
        "anchor": 0,
        "refine_recommended": False,
    }


# ---------------------------------------------------------------------------
# anchor selection


def test_anchor_ties_break_earliest():
    t = traj(*[frame((6, 6)) for _ in range(4)])
    assert select_anchor(t) == 0


def test_anchor_ignores_appended_empty_frames():
    base = traj(frame((10, 10)), frame((8, 8)), frame((10, 10)))
    extended = MaskTrajectory(base.masks + (BinaryMask.empty(16, 16),) * 3)
    assert select_anchor(base) == select_anchor(extended)


def test_anchor_prefers_smooth_typical_frame():
    # Thin unstable ends around a stable solid middle: frame 2 wins.
    t = traj(
        frame((10, 1)),
        frame((10, 10)),
        frame((10, 10)),
        frame((10, 10)),
        frame((10, 1)),
    )
    assert select_anchor(t) == 2


def test_anchor_none_when_all_empty():
    assert select_anchor(traj(EMPTY16, EMPTY16)) is None
    assert first_nonempty_anchor(traj(EMPTY16, EMPTY16)) is None


def test_first_nonempty_anchor():
    t = traj(EMPTY16, frame((2, 2)), frame((6, 6)))
    assert first_nonempty_anchor(t) == 1


# ---------------------------------------------------------------------------
# derive_prompt


def test_derive_prompt_single_pixel():
    grid = np.zeros((8, 8), dtype=bool)
    grid[3, 5] = True
    p = derive_prompt(MaskTrajectory.from_dense([grid]), anchor=0)
    assert p.frame_index == 0
    assert p.bbox == (3, 5, 3, 5)
    assert p.point == (3, 5)


def test_derive_prompt_box_and_center():
    t = traj(frame((4, 6), at=(2, 3)))
    p = derive_prompt(t, anchor=0)
    assert p.bbox == (2, 3, 5, 8)
    r0, c0, r1, c1 = p.bbox
    assert r0 <= p.point[0] <= r1 and c0 <= p.point[1] <= c1


def test_derive_prompt_errors():
    t = traj(EMPTY16, frame((2, 2)))
    with pytest.raises(UsageError):
        derive_prompt(t, anchor=5)
    with pytest.raises(UsageError):
        derive_prompt(t, anchor=0)  # empty anchor frame


# ---------------------------------------------------------------------------
# fuse


def full(h=2, w=2):
    return BinaryMask.from_dense(np.ones((h, w), dtype=bool))


def top(h=2, w=2):
    grid = np.zeros((h, w), dtype=bool)
    grid[0, :] = True
    return BinaryMask.from_dense(grid)


def test_fuse_selects_by_confidence_threshold():
    coarse = MaskTrajectory((top(), top(), top()))
    refined = RefineResult(
        anchor=1,
        masks={0: full(), 1: full(), 2: full()},
        confidence={0: 0.4, 1: 0.9, 2: 0.5},
    )
    fused = fuse(coarse, refined, conf_min=0.5)
    assert fused.frame(0) == top()  # below threshold
    assert fused.frame(1) == full()
    assert fused.frame(2) == full()  # threshold is inclusive


def test_fuse_keeps_uncovered_frames():
    coarse = MaskTrajectory((top(), top(), top()))
    refined = RefineResult(anchor=1, masks={1: full()}, confidence={1: 1.0})
    fused = fuse(coarse, refined, conf_min=0.5)
    assert fused.frame(0) == top() and fused.frame(2) == top()


def test_fuse_missing_confidence_counts_as_zero():
    coarse = MaskTrajectory((top(),))
    refined = RefineResult(anchor=0, masks={0: full()}, confidence={})
    assert fuse(coarse, refined, conf_min=0.5).frame(0) == top()


def test_fuse_is_idempotent():
    coarse = MaskTrajectory((top(), top(), top()))
    refined = RefineResult(
        anchor=1, masks={0: full(), 1: full()}, confidence={0: 0.6, 1: 0.9}
    )
    once = fuse(coarse, refined, conf_min=0.5)
    assert fuse(once, refined, conf_min=0.5) == once


def test_fuse_alignment_errors():
    coarse = MaskTrajectory((top(), top()))
    with pytest.raises(AlignmentError):
        fuse(coarse, RefineResult(anchor=5, masks={5: full()}, confidence={5: 1.0}), 0.5)
    with pytest.raises(AlignmentError):
        fuse(
            coarse,
            RefineResult(anchor=0, masks={0: full(3, 3)}, confidence={0: 1.0}),
            0.5,
        )


# ---------------------------------------------------------------------------
# config validation


def test_config_defaults_are_self_consistent():
    cfg = AgenticConfig()
    assert cfg.coverage_min == 0.05
    assert cfg.smoothness_min == 0.7
    assert cfg.fragmentation_max == 1.5
    assert cfg.solidity_min == 0.3
    assert cfg.confidence_min == 0.5
    assert cfg.w_solidity + cfg.w_smoothness + cfg.w_typicality == pytest.approx(1.0)
