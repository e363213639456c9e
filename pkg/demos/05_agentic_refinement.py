"""
Reliability scoring, anchor selection and confidence fusion
===========================================================

Take a clean trajectory, corrupt a few frames the way a coarse
segmenter does (dropouts, area spikes), and watch the agentic layer
diagnose it, pick the most trustworthy frame as an anchor, and fuse a
refinement pass back in.
"""

import numpy as np

from refvos.agentic import AgenticConfig, assess, derive_prompt, fuse, select_anchor
from refvos.backends import RefineResult
from refvos.masks import BinaryMask, MaskTrajectory, jaccard

H, W, T = 24, 32, 8


def disc(cy, cx, r):
    yy, xx = np.mgrid[0:H, 0:W]
    return BinaryMask.from_dense((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r)


ground_truth = MaskTrajectory([disc(12, 8 + 2 * t, 5) for t in range(T)])

# Corrupt: drop frame 2 entirely, shrink frame 5 to a sliver.
frames = list(ground_truth.masks)
frames[2] = BinaryMask.empty(H, W)
frames[5] = disc(12, 18, 1)
coarse = MaskTrajectory(frames)

config = AgenticConfig()
report = assess(coarse, config)
print("coverage:", round(report.coverage, 3))
print("area smoothness:", round(report.area_smoothness, 3))
print("refine recommended:", report.refine_recommended)

anchor = select_anchor(coarse, config)
print("anchor frame:", anchor)
prompt = derive_prompt(coarse, anchor)
print("geometric prompt: point =", prompt.point, " bbox =", prompt.bbox)

# A refinement pass returns per-frame masks with confidences; fusion
# replaces a frame only when the confidence clears the threshold.
refined = RefineResult(
    anchor=anchor,
    masks={t: ground_truth.frame(t) for t in range(T)},
    confidence={t: 1.0 for t in range(T)},
)
fused = fuse(coarse, refined, config.confidence_min)

mean_j_before = np.mean([jaccard(coarse.frame(t), ground_truth.frame(t)) for t in range(T)])
mean_j_after = np.mean([jaccard(fused.frame(t), ground_truth.frame(t)) for t in range(T)])
print(f"mean J before fusion: {mean_j_before:.4f}")
print(f"mean J after fusion:  {mean_j_after:.4f}")
