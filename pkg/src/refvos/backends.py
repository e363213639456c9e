"""Typed clients for the four model backends.

Real deployments put model servers behind HTTP; offline runs and tests
use scripted transports that answer from fixture files.  Both speak the
protocol in docs/protocol.md.  Every client validates the response
(JSON schema plus the semantic checks the schema cannot express) before
returning, so malformed backend output never propagates.

Retry policy: exactly one retry on a transport failure (connection
error, timeout, HTTP 5xx), none on a protocol error -- model servers
are expensive, malformed output is a bug.

Clients hold no shared mutable state; a transport instance built from
an endpoint may serve concurrent requests.
"""

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import jsonschema
import requests

from .errors import BackendError, ConfigError, ProtocolError
from .masks import BinaryMask, MaskTrajectory, GeometricPrompt, mask_from_json
from .prompts import Prompt
from . import protocol

__all__ = [
    "BackendEndpoint",
    "JudgeVerdict",
    "RefineResult",
    "Transport",
    "HttpTransport",
    "ScriptedTransport",
    "make_transport",
    "sample_frames",
    "asr_transcribe",
    "judge_exists",
    "segment_video",
    "refine",
]

TRANSPORTS = ("http", "scripted")


@dataclass(frozen=True)
class BackendEndpoint:
    """Where one backend kind lives and how to reach it."""

    kind: str
    transport: str
    address: str  # base URL for http, fixture-file path for scripted
    timeout: float = 10.0

    def __post_init__(self):
        if self.kind not in protocol.ENDPOINT_KINDS:
            raise ConfigError(f"unknown endpoint kind {self.kind!r}")
        if self.transport not in TRANSPORTS:
            raise ConfigError(f"unknown transport {self.transport!r}")
        if self.timeout <= 0:
            raise ConfigError(f"timeout must be positive, got {self.timeout}")


@dataclass(frozen=True)
class JudgeVerdict:
    """Existence judgment for one (video, phrase) pair."""

    exists: bool
    rationale: str | None
    sampled_frames: tuple[int, ...]


@dataclass(frozen=True)
class RefineResult:
    """Partial trajectory produced by a geometric-prompt refiner.

    Covers a contiguous frame window that includes the anchor; the
    per-frame confidence drives fusion.
    """

    anchor: int
    masks: Mapping[int, BinaryMask]
    confidence: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "masks", dict(self.masks))
        object.__setattr__(self, "confidence", dict(self.confidence))

    @property
    def frame_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.masks))


class Transport(Protocol):
    def post(self, path: str, payload: dict) -> dict: ...


class HttpTransport:
    """POSTs JSON over HTTP; no connection state is shared."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def post(self, path: str, payload: dict) -> dict:
        url = self.base_url + path
        try:
            resp = requests.post(url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"POST {url} failed: {exc}", retryable=True)
        if resp.status_code >= 500:
            raise BackendError(
                f"POST {url} -> {resp.status_code}", retryable=True
            )
        if resp.status_code != 200:
            raise BackendError(
                f"POST {url} -> {resp.status_code}: {resp.text[:200]}",
                retryable=False,
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(f"POST {url} returned non-JSON body: {exc}")


class ScriptedTransport:
    """Answers from a fixture document; bit-deterministic.

    Entries are matched in file order with the canonical field rules of
    :mod:`refvos.protocol`; the first match wins.  A miss raises a
    non-retryable :class:`BackendError`, mirroring a server 404.
    """

    def __init__(self, fixture_path=None, *, data: dict | None = None):
        if data is None:
            if fixture_path is None:
                raise ConfigError("scripted transport needs a fixture path or data")
            data = json.loads(Path(fixture_path).read_text(encoding="utf-8"))
        self._fixtures = data

    def post(self, path: str, payload: dict) -> dict:
        kind = protocol.kind_for_path(path)
        response = protocol.find_fixture_response(self._fixtures, kind, payload)
        if response is None:
            key = protocol.canonical_request(kind, payload)
            raise BackendError(f"no fixture entry for {kind} request {key}")
        return copy.deepcopy(response)


def make_transport(endpoint: BackendEndpoint) -> Transport:
    if endpoint.transport == "http":
        return HttpTransport(endpoint.address, endpoint.timeout)
    fixture = Path(endpoint.address)
    if not fixture.is_file():
        raise ConfigError(f"scripted fixture not found: {fixture}")
    return ScriptedTransport(fixture)


def _call(transport: Transport, kind: str, payload: dict) -> dict:
    path = protocol.ENDPOINT_PATHS[kind]
    attempts = 0
    while True:
        attempts += 1
        try:
            doc = transport.post(path, payload)
            break
        except BackendError as err:
            if err.retryable and attempts == 1:
                continue
            raise
    try:
        jsonschema.validate(doc, protocol.RESPONSE_SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        raise ProtocolError(f"{kind} response failed schema check: {exc.message}")
    return doc


def sample_frames(frame_count: int, k: int = 8) -> tuple[int, ...]:
    """Uniformly sample ``k`` distinct frame indices from ``[0, T)``.

    Deterministic; returns all frames when the video is shorter than
    ``k``.
    """
    if frame_count < 1:
        raise ConfigError(f"frame_count must be >= 1, got {frame_count}")
    if k < 1:
        raise ConfigError(f"sample count must be >= 1, got {k}")
    if frame_count <= k:
        return tuple(range(frame_count))
    step = (frame_count - 1) / (k - 1)
    return tuple(round(i * step) for i in range(k))


def asr_transcribe(
    endpoint: BackendEndpoint, audio_ref: str, *, transport: Transport | None = None
) -> str:
    """Transcribe an audio reference; "" signals an empty transcript."""
    transport = transport or make_transport(endpoint)
    doc = _call(transport, "asr", {"audio_ref": audio_ref})
    return doc["transcript"]


def judge_exists(
    endpoint: BackendEndpoint,
    video_ref: str,
    frame_indices: Sequence[int],
    phrase: str,
    *,
    transport: Transport | None = None,
) -> JudgeVerdict:
    """Ask the visual judge whether ``phrase`` appears in the video."""
    if not frame_indices:
        raise ConfigError("judge needs at least one sampled frame")
    if not phrase.strip():
        raise ConfigError("judge needs a non-empty phrase")
    transport = transport or make_transport(endpoint)
    payload = {
        "video_ref": video_ref,
        "phrase": phrase,
        "frame_indices": [int(i) for i in frame_indices],
    }
    doc = _call(transport, "judge", payload)
    return JudgeVerdict(
        exists=doc["exists"],
        rationale=doc.get("rationale"),
        sampled_frames=tuple(int(i) for i in frame_indices),
    )


def segment_video(
    endpoint: BackendEndpoint,
    video_ref: str,
    prompt: Prompt,
    frame_dims: Sequence[tuple[int, int]],
    *,
    transport: Transport | None = None,
) -> MaskTrajectory:
    """Fetch the coarse full-video trajectory for a prompt.

    The response must contain exactly one mask per frame with the
    expected dims; anything else is a protocol error.
    """
    transport = transport or make_transport(endpoint)
    payload = {
        "video_ref": video_ref,
        "prompt": prompt.text,
        "template_id": prompt.template_id,
    }
    doc = _call(transport, "segment", payload)
    frames = doc["frames"]
    if len(frames) != len(frame_dims):
        raise ProtocolError(
            f"segment returned {len(frames)} frames, expected {len(frame_dims)}"
        )
    masks = []
    for t, (obj, dims) in enumerate(zip(frames, frame_dims)):
        try:
            mask = mask_from_json(obj)
        except ValueError as exc:
            raise ProtocolError(f"segment frame {t} is not a valid mask: {exc}")
        if mask.shape != tuple(dims):
            raise ProtocolError(
                f"segment frame {t} has dims {mask.shape}, expected {tuple(dims)}"
            )
        masks.append(mask)
    return MaskTrajectory(tuple(masks))


def refine(
    endpoint: BackendEndpoint,
    video_ref: str,
    prompt: GeometricPrompt,
    frame_dims: Sequence[tuple[int, int]],
    *,
    transport: Transport | None = None,
) -> RefineResult:
    """Run the geometric-prompt refiner from an anchor frame.

    The response must cover a contiguous frame window containing the
    anchor, with in-range indices and masks matching the frame dims.
    """
    transport = transport or make_transport(endpoint)
    payload = {
        "video_ref": video_ref,
        "anchor": prompt.frame_index,
        "bbox": list(prompt.bbox),
        "point": list(prompt.point),
    }
    doc = _call(transport, "refine", payload)
    anchor = doc["anchor"]
    total = len(frame_dims)
    masks: dict[int, BinaryMask] = {}
    confidence: dict[int, float] = {}
    for entry in doc["frames"]:
        idx = entry["frame_index"]
        if idx >= total:
            raise ProtocolError(f"refine frame index {idx} out of range [0, {total})")
        if idx in masks:
            raise ProtocolError(f"refine returned frame {idx} twice")
        try:
            mask = mask_from_json(entry["mask"])
        except ValueError as exc:
            raise ProtocolError(f"refine frame {idx} is not a valid mask: {exc}")
        if mask.shape != tuple(frame_dims[idx]):
            raise ProtocolError(
                f"refine frame {idx} has dims {mask.shape}, "
                f"expected {tuple(frame_dims[idx])}"
            )
        masks[idx] = mask
        confidence[idx] = float(entry["confidence"])
    indices = sorted(masks)
    if anchor not in masks:
        raise ProtocolError(f"refine response missing the anchor frame {anchor}")
    if indices != list(range(indices[0], indices[-1] + 1)):
        raise ProtocolError(f"refine window {indices} is not contiguous")
    return RefineResult(anchor=anchor, masks=masks, confidence=confidence)
