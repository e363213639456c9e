"""Expression metadata ingest and prediction serialization.

The input document mirrors the meta-expressions layout (videos ->
expressions) with per-video frame geometry added so that all-zero
trajectories can be materialized without touching pixel data; the full
schema is documented in docs/schema.md.

Predictions are written as a manifest plus one trajectory file per
expression.  Output is byte-stable: entries are sorted by (video_id,
expression_id) and JSON is dumped canonically, so identical inputs
produce identical bytes regardless of record order or parallelism
upstream.
"""

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import IntegrityError, ParseError, WriteError
from .masks import MaskTrajectory, trajectory_from_json, trajectory_to_json

__all__ = [
    "NO_OBJECT_META",
    "ExpressionRecord",
    "PredictionRecord",
    "ManifestEntry",
    "Manifest",
    "canonical_json",
    "load_expressions",
    "write_predictions",
    "load_manifest",
    "load_predictions",
    "save_trajectory",
    "load_trajectory",
]

# Exact text emitted for a gated-off expression.  Consumers string-match
# it, so it must never vary by a byte.
NO_OBJECT_META = "[META:NO_OBJ] target_exists=false"


@dataclass(frozen=True)
class ExpressionRecord:
    """One referring expression over one video.

    ``transcript`` holds the ASR-derived query text; it may be empty
    when only ``audio_ref`` is given and transcription happens at run
    time.  ``target_exists`` is None when the document carries no
    presence information, in which case ``presence_known`` is False and
    the caller must consult the judge backend.
    """

    video_id: str
    expression_id: str
    transcript: str
    presence_known: bool
    target_exists: bool | None
    frame_count: int
    height: int
    width: int
    audio_ref: str | None = None

    def __post_init__(self):
        if self.frame_count < 1:
            raise ParseError(f"frame_count must be >= 1, got {self.frame_count}")
        if self.height < 1 or self.width < 1:
            raise ParseError(f"dims must be positive, got {self.height}x{self.width}")
        if self.presence_known and self.target_exists is None:
            raise ParseError("presence_known=True requires a target_exists value")

    @property
    def frame_dims(self) -> tuple[tuple[int, int], ...]:
        return ((self.height, self.width),) * self.frame_count


@dataclass(frozen=True)
class PredictionRecord:
    """Final output for one expression: meta text plus mask trajectory."""

    video_id: str
    expression_id: str
    meta_text: str
    trajectory: MaskTrajectory


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    expression_id: str
    meta_text: str
    mask_path: str  # relative to the manifest's directory


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]


def canonical_json(obj, *, indent: int | None = None) -> str:
    """Deterministic JSON text: sorted keys, stable separators, one
    trailing newline."""
    if indent is None:
        text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    else:
        text = json.dumps(obj, sort_keys=True, indent=indent)
    return text + "\n"


def _node(path_parts: Sequence[str]) -> str:
    return "/".join(path_parts)


def _require(doc: dict, key: str, kind, path_parts: Sequence[str]):
    node = _node(list(path_parts) + [key])
    if key not in doc:
        raise ParseError(f"{node}: missing required field")
    value = doc[key]
    if kind is int:
        # bool is an int subclass; counts must be real integers
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{node}: expected integer, got {type(value).__name__}")
    elif not isinstance(value, kind):
        raise ParseError(f"{node}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_expressions(path) -> list[ExpressionRecord]:
    """Parse an expression-metadata document into records.

    Returns records sorted by (video_id, expression_id).  Raises
    :class:`ParseError` naming the offending node on any structural
    problem, :class:`IntegrityError` on a duplicate expression_id.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}")

    if not isinstance(doc, dict):
        raise ParseError("document root: expected object")
    videos = _require(doc, "videos", dict, [])

    records: list[ExpressionRecord] = []
    seen_expr_ids: set[str] = set()
    for video_id, video in sorted(videos.items()):
        vpath = ["videos", video_id]
        if not isinstance(video, dict):
            raise ParseError(f"{_node(vpath)}: expected object")
        frame_count = _require(video, "frame_count", int, vpath)
        height = _require(video, "height", int, vpath)
        width = _require(video, "width", int, vpath)
        if frame_count < 1:
            raise ParseError(f"{_node(vpath + ['frame_count'])}: must be >= 1")
        if height < 1 or width < 1:
            raise ParseError(f"{_node(vpath)}: dims must be positive")
        expressions = _require(video, "expressions", dict, vpath)
        for expression_id, expr in sorted(expressions.items()):
            epath = vpath + ["expressions", expression_id]
            if not isinstance(expr, dict):
                raise ParseError(f"{_node(epath)}: expected object")
            if expression_id in seen_expr_ids:
                raise IntegrityError(
                    f"duplicate expression_id {expression_id!r} at {_node(epath)}"
                )
            seen_expr_ids.add(expression_id)

            transcript = expr.get("exp", "")
            if not isinstance(transcript, str):
                raise ParseError(f"{_node(epath + ['exp'])}: expected string")
            audio_ref = expr.get("audio_ref")
            if audio_ref is not None and not isinstance(audio_ref, str):
                raise ParseError(f"{_node(epath + ['audio_ref'])}: expected string")
            if "exp" not in expr and audio_ref is None:
                raise ParseError(f"{_node(epath)}: needs either exp or audio_ref")

            presence_known = False
            target_exists = None
            if "presence_info" in expr:
                presence = expr["presence_info"]
                ppath = epath + ["presence_info"]
                if not isinstance(presence, dict):
                    raise ParseError(f"{_node(ppath)}: expected object")
                flag = _require(presence, "target_exists", bool, ppath)
                presence_known = True
                target_exists = flag

            records.append(
                ExpressionRecord(
                    video_id=video_id,
                    expression_id=expression_id,
                    transcript=transcript,
                    presence_known=presence_known,
                    target_exists=target_exists,
                    frame_count=frame_count,
                    height=height,
                    width=width,
                    audio_ref=audio_ref,
                )
            )
    records.sort(key=lambda r: (r.video_id, r.expression_id))
    return records


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", text)


def write_predictions(records: Sequence[PredictionRecord], out) -> Manifest:
    """Write trajectory files plus ``manifest.json`` under ``out``.

    The manifest lists entries sorted by (video_id, expression_id) with
    mask paths relative to the manifest, so moving the directory keeps
    it valid.  Byte-stable across repeated runs on identical input.
    """
    out = Path(out)
    ordered = sorted(records, key=lambda r: (r.video_id, r.expression_id))
    seen: set[tuple[str, str]] = set()
    for rec in ordered:
        key = (rec.video_id, rec.expression_id)
        if key in seen:
            raise IntegrityError(f"duplicate prediction for {key}")
        seen.add(key)

    mask_dir = out / "masks"
    try:
        mask_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteError(f"cannot create {mask_dir}: {exc}")

    entries: list[ManifestEntry] = []
    used_names: set[str] = set()
    for rec in ordered:
        name = f"{_safe_name(rec.video_id)}__{_safe_name(rec.expression_id)}.json"
        if name in used_names:
            raise IntegrityError(f"mask file name collision after sanitizing: {name}")
        used_names.add(name)
        mask_path = mask_dir / name
        save_trajectory(rec.trajectory, mask_path)
        entries.append(
            ManifestEntry(
                video_id=rec.video_id,
                expression_id=rec.expression_id,
                meta_text=rec.meta_text,
                mask_path=f"masks/{name}",
            )
        )

    manifest_doc = {
        "predictions": [
            {
                "video_id": e.video_id,
                "expression_id": e.expression_id,
                "meta_text": e.meta_text,
                "mask_path": e.mask_path,
            }
            for e in entries
        ]
    }
    manifest_path = out / "manifest.json"
    try:
        manifest_path.write_text(canonical_json(manifest_doc, indent=2), encoding="utf-8")
    except OSError as exc:
        raise WriteError(f"cannot write {manifest_path}: {exc}")
    return Manifest(entries=tuple(entries))


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ParseError("manifest root: expected object")
    items = _require(doc, "predictions", list, [])
    entries = []
    for i, item in enumerate(items):
        ipath = ["predictions", str(i)]
        if not isinstance(item, dict):
            raise ParseError(f"{_node(ipath)}: expected object")
        entries.append(
            ManifestEntry(
                video_id=_require(item, "video_id", str, ipath),
                expression_id=_require(item, "expression_id", str, ipath),
                meta_text=_require(item, "meta_text", str, ipath),
                mask_path=_require(item, "mask_path", str, ipath),
            )
        )
    return Manifest(entries=tuple(entries))


def load_predictions(manifest_path) -> list[PredictionRecord]:
    """Load a manifest and every trajectory it references."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    records = []
    for entry in manifest.entries:
        trajectory = load_trajectory(base / entry.mask_path)
        records.append(
            PredictionRecord(
                video_id=entry.video_id,
                expression_id=entry.expression_id,
                meta_text=entry.meta_text,
                trajectory=trajectory,
            )
        )
    return records


def save_trajectory(trajectory: MaskTrajectory, path) -> None:
    path = Path(path)
    try:
        path.write_text(canonical_json(trajectory_to_json(trajectory)), encoding="utf-8")
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}")


def load_trajectory(path) -> MaskTrajectory:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}")
    try:
        return trajectory_from_json(doc)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}")
