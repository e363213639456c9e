"""Binary masks, run-length coding, geometry, and frame comparison kernels.

A mask is stored as row-major run-length counts: ``runs`` alternates
lengths of 0-runs and 1-runs over the flattened grid, starting with a
0-run (which may have length zero when the first pixel is 1).  This is
the COCO ``counts`` convention except that the scan order is row-major
rather than column-major.  The encoding is canonical: every run except
the first has length >= 1, so two masks are pixel-identical iff their
``(height, width, runs)`` triples are equal.

Frame comparison follows the DAVIS benchmark conventions: region
similarity J is intersection-over-union, boundary accuracy F is an
F-measure over boundary pixels matched within a Euclidean tolerance
band.  Boundaries and connected components both use 4-connectivity.
A frame where prediction and ground truth are both empty scores
J = F = 1; expression-level absence is scored separately (see
:mod:`refvos.metrics`).
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionError, UsageError

__all__ = [
    "BinaryMask",
    "MaskTrajectory",
    "GeometricPrompt",
    "rle_encode",
    "rle_decode",
    "area",
    "bbox",
    "center",
    "jaccard",
    "boundary_f",
    "connected_components",
    "default_boundary_tolerance",
    "mask_to_json",
    "mask_from_json",
    "trajectory_to_json",
    "trajectory_from_json",
    "write_pgm",
]


@dataclass(frozen=True)
class BinaryMask:
    """Single-frame binary segmentation backed by row-major RLE runs."""

    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DimensionError(
                f"mask dims must be positive, got {self.height}x{self.width}"
            )
        runs = tuple(int(r) for r in self.runs)
        object.__setattr__(self, "runs", runs)
        if not runs:
            raise DimensionError("runs may not be empty")
        if runs[0] < 0 or any(r < 1 for r in runs[1:]):
            raise DimensionError(
                "every run must be >= 1 except the first, which may be 0"
            )
        if sum(runs) != self.height * self.width:
            raise DimensionError(
                f"runs sum to {sum(runs)}, expected {self.height * self.width}"
            )

    @classmethod
    def from_dense(cls, dense) -> "BinaryMask":
        """Encode a dense 2-D grid (any array-like; nonzero means 1)."""
        return rle_encode(dense)

    @classmethod
    def empty(cls, height: int, width: int) -> "BinaryMask":
        """All-zero mask of the given dims."""
        return cls(height, width, (height * width,))

    def to_dense(self) -> np.ndarray:
        """Decode to a boolean ``(height, width)`` array."""
        values = np.arange(len(self.runs)) % 2 == 1
        flat = np.repeat(values, self.runs)
        return flat.reshape(self.height, self.width)

    @property
    def is_empty(self) -> bool:
        return area(self) == 0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class MaskTrajectory:
    """Ordered per-frame mask sequence for one expression.

    Frames may have different dims (the source video may change
    resolution); most pipelines use a constant size throughout.
    """

    masks: tuple[BinaryMask, ...]

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))

    @classmethod
    def from_dense(cls, frames: Sequence) -> "MaskTrajectory":
        return cls(tuple(rle_encode(f) for f in frames))

    @classmethod
    def all_zero(cls, dims: Sequence[tuple[int, int]]) -> "MaskTrajectory":
        """All-empty trajectory with the given per-frame ``(h, w)`` dims."""
        return cls(tuple(BinaryMask.empty(h, w) for h, w in dims))

    @property
    def frame_count(self) -> int:
        return len(self.masks)

    @property
    def dims(self) -> tuple[tuple[int, int], ...]:
        return tuple(m.shape for m in self.masks)

    def frame(self, t: int) -> BinaryMask:
        return self.masks[t]

    @property
    def is_all_empty(self) -> bool:
        return all(m.is_empty for m in self.masks)


@dataclass(frozen=True)
class GeometricPrompt:
    """Box-plus-point prompt derived from one trajectory frame.

    ``bbox`` is ``(row_min, col_min, row_max, col_max)`` with inclusive
    bounds; ``point`` lies inside ``bbox``.
    """

    frame_index: int
    bbox: tuple[int, int, int, int]
    point: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "bbox", tuple(int(v) for v in self.bbox))
        object.__setattr__(self, "point", tuple(int(v) for v in self.point))
        if self.frame_index < 0:
            raise UsageError(f"frame_index must be >= 0, got {self.frame_index}")
        r0, c0, r1, c1 = self.bbox
        if r0 > r1 or c0 > c1:
            raise UsageError(f"degenerate bbox {self.bbox}")
        r, c = self.point
        if not (r0 <= r <= r1 and c0 <= c <= c1):
            raise UsageError(f"point {self.point} outside bbox {self.bbox}")


def rle_encode(dense) -> BinaryMask:
    """Encode a dense binary grid into a :class:`BinaryMask`.

    Parameters
    ----------
    dense : array-like, shape (H, W)
        Anything numpy can coerce; nonzero entries count as 1.
    """
    arr = np.asarray(dense)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D grid, got shape {arr.shape}")
    flat = (arr != 0).ravel()
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return BinaryMask(arr.shape[0], arr.shape[1], tuple(runs))


def rle_decode(mask: BinaryMask) -> np.ndarray:
    """Inverse of :func:`rle_encode`; returns a boolean grid."""
    return mask.to_dense()


def area(mask: BinaryMask) -> int:
    """Number of 1-pixels (computed from the runs, no decode)."""
    return int(sum(mask.runs[1::2]))


def bbox(mask: BinaryMask) -> tuple[int, int, int, int] | None:
    """Tight inclusive bounds ``(row_min, col_min, row_max, col_max)``.

    Returns ``None`` for an all-zero mask (empty is a value, not an
    error).
    """
    rows, cols = np.nonzero(mask.to_dense())
    if rows.size == 0:
        return None
    return (int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))


def center(mask: BinaryMask) -> tuple[int, int] | None:
    """Centroid of the 1-pixels, snapped onto the object.

    The centroid is rounded half-up to the nearest pixel; if that pixel
    is 0 (non-convex masks), the nearest 1-pixel wins, ties broken by
    smaller row then smaller column.  Returns ``None`` for an all-zero
    mask.
    """
    dense = mask.to_dense()
    rows, cols = np.nonzero(dense)
    if rows.size == 0:
        return None
    r = int(math.floor(float(rows.mean()) + 0.5))
    c = int(math.floor(float(cols.mean()) + 0.5))
    if dense[r, c]:
        return (r, c)
    d2 = (rows.astype(np.int64) - r) ** 2 + (cols.astype(np.int64) - c) ** 2
    best = np.lexsort((cols, rows, d2))[0]
    return (int(rows[best]), int(cols[best]))


def _require_same_dims(a: BinaryMask, b: BinaryMask):
    if a.shape != b.shape:
        raise DimensionError(f"mask dims differ: {a.shape} vs {b.shape}")


def jaccard(pred: BinaryMask, gt: BinaryMask) -> float:
    """Region similarity J = |pred & gt| / |pred | gt|.

    Both masks empty scores 1.0 (absence correctly predicted).
    """
    _require_same_dims(pred, gt)
    a = pred.to_dense()
    b = gt.to_dense()
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(a & b))
    return inter / union


def default_boundary_tolerance(height: int, width: int) -> int:
    """DAVIS-style tolerance band: ceil(0.008 * image diagonal)."""
    return int(math.ceil(0.008 * math.hypot(height, width)))


def _boundary_map(dense: np.ndarray) -> np.ndarray:
    """1-pixels 4-adjacent to a 0-pixel or to the image border."""
    padded = np.pad(dense, 1)
    interior = (
        padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    return dense & ~interior


def _disc_footprint(tol: float) -> np.ndarray:
    r = int(math.floor(tol))
    yy, xx = np.ogrid[-r : r + 1, -r : r + 1]
    return (yy * yy + xx * xx) <= tol * tol


def boundary_f(pred: BinaryMask, gt: BinaryMask, tol: float | None = None) -> float:
    """Boundary F-measure within a Euclidean tolerance band.

    Precision is the fraction of predicted boundary pixels lying within
    distance ``tol`` of some ground-truth boundary pixel; recall is the
    symmetric quantity; F = 2PR / (P + R).  Matching is exact integer
    arithmetic (dilation by a squared-distance disc), so there is no
    floating-point fuzz at the band edge.

    Conventions: both boundaries empty -> 1.0, exactly one empty -> 0.0,
    P + R = 0 -> 0.0.  ``tol=None`` uses the DAVIS-style default band
    for the mask dims.
    """
    _require_same_dims(pred, gt)
    if tol is None:
        tol = default_boundary_tolerance(pred.height, pred.width)
    if tol < 0:
        raise UsageError(f"tolerance must be >= 0, got {tol}")
    pb = _boundary_map(pred.to_dense())
    gb = _boundary_map(gt.to_dense())
    n_p = int(np.count_nonzero(pb))
    n_g = int(np.count_nonzero(gb))
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0 or n_g == 0:
        return 0.0
    foot = _disc_footprint(tol)
    gb_band = ndimage.binary_dilation(gb, structure=foot)
    pb_band = ndimage.binary_dilation(pb, structure=foot)
    precision = int(np.count_nonzero(pb & gb_band)) / n_p
    recall = int(np.count_nonzero(gb & pb_band)) / n_g
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def connected_components(mask: BinaryMask) -> int:
    """Number of 4-connected components of 1-pixels."""
    _, count = ndimage.label(mask.to_dense())
    return int(count)


# --- serialization -------------------------------------------------------
#
# The on-disk / on-wire form of a mask is the JSON object
#   {"height": H, "width": W, "runs": [...]}
# and a trajectory is {"frames": [mask, ...]}.  See docs/masks.md.


def mask_to_json(mask: BinaryMask) -> dict:
    return {"height": mask.height, "width": mask.width, "runs": list(mask.runs)}


def mask_from_json(obj) -> BinaryMask:
    if not isinstance(obj, dict):
        raise ValueError(f"mask object must be a dict, got {type(obj).__name__}")
    for key in ("height", "width", "runs"):
        if key not in obj:
            raise ValueError(f"mask object missing key {key!r}")
    for key in ("height", "width"):
        if not isinstance(obj[key], int) or isinstance(obj[key], bool):
            raise ValueError(f"mask {key} must be an integer")
    runs = obj["runs"]
    if not isinstance(runs, list) or not all(
        isinstance(r, int) and not isinstance(r, bool) for r in runs
    ):
        raise ValueError("mask runs must be a list of integers")
    return BinaryMask(int(obj["height"]), int(obj["width"]), tuple(runs))


def trajectory_to_json(traj: MaskTrajectory) -> dict:
    return {"frames": [mask_to_json(m) for m in traj.masks]}


def trajectory_from_json(obj) -> MaskTrajectory:
    if not isinstance(obj, dict) or not isinstance(obj.get("frames"), list):
        raise ValueError("trajectory object must be {'frames': [...]}")
    return MaskTrajectory(tuple(mask_from_json(f) for f in obj["frames"]))


def write_pgm(mask: BinaryMask, path) -> None:
    """Dump a mask as a binary (P5) portable graymap, 1-pixels white."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    payload = (mask.to_dense().astype(np.uint8) * 255).tobytes()
    Path(path).write_bytes(header + payload)
