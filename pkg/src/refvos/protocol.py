"""Wire protocol shared by the backend clients and any conforming server.

One JSON request/response pair per endpoint kind, POSTed to /asr,
/judge, /segment or /refine.  Masks travel RLE-encoded inline (see
docs/masks.md); frames are passed by reference (video id plus frame
indices), never by pixels.  The normative description lives in
docs/protocol.md; the schemas below are its machine-readable half and
every client validates responses against them before returning.

Scripted (fixture-file) transports and the reference mock server match
requests against canned entries with the same rules: text fields are
compared whitespace-trimmed, mandatory key fields must be present in
the fixture entry, and optional fields constrain the match only when
the entry carries them.
"""

from .errors import ProtocolError

__all__ = [
    "ENDPOINT_KINDS",
    "ENDPOINT_PATHS",
    "RESPONSE_SCHEMAS",
    "REQUEST_SCHEMAS",
    "kind_for_path",
    "canonical_request",
    "request_matches",
    "find_fixture_response",
]

ENDPOINT_KINDS = ("asr", "judge", "segment", "refine")

ENDPOINT_PATHS = {kind: f"/{kind}" for kind in ENDPOINT_KINDS}

_PATH_TO_KIND = {path: kind for kind, path in ENDPOINT_PATHS.items()}

MASK_SCHEMA = {
    "type": "object",
    "required": ["height", "width", "runs"],
    "properties": {
        "height": {"type": "integer", "minimum": 1},
        "width": {"type": "integer", "minimum": 1},
        "runs": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "integer", "minimum": 0},
        },
    },
    "additionalProperties": False,
}

REQUEST_SCHEMAS = {
    "asr": {
        "type": "object",
        "required": ["audio_ref"],
        "properties": {"audio_ref": {"type": "string"}},
        "additionalProperties": False,
    },
    "judge": {
        "type": "object",
        "required": ["video_ref", "phrase", "frame_indices"],
        "properties": {
            "video_ref": {"type": "string"},
            "phrase": {"type": "string"},
            "frame_indices": {
                "type": "array",
                "minItems": 1,
                "items": {"type": "integer", "minimum": 0},
            },
        },
        "additionalProperties": False,
    },
    "segment": {
        "type": "object",
        "required": ["video_ref", "prompt", "template_id"],
        "properties": {
            "video_ref": {"type": "string"},
            "prompt": {"type": "string"},
            "template_id": {"type": "integer", "enum": [1, 2]},
        },
        "additionalProperties": False,
    },
    "refine": {
        "type": "object",
        "required": ["video_ref", "anchor", "bbox", "point"],
        "properties": {
            "video_ref": {"type": "string"},
            "anchor": {"type": "integer", "minimum": 0},
            "bbox": {
                "type": "array",
                "minItems": 4,
                "maxItems": 4,
                "items": {"type": "integer", "minimum": 0},
            },
            "point": {
                "type": "array",
                "minItems": 2,
                "maxItems": 2,
                "items": {"type": "integer", "minimum": 0},
            },
        },
        "additionalProperties": False,
    },
}

RESPONSE_SCHEMAS = {
    "asr": {
        "type": "object",
        "required": ["transcript"],
        "properties": {"transcript": {"type": "string"}},
        "additionalProperties": False,
    },
    "judge": {
        "type": "object",
        "required": ["exists"],
        "properties": {
            "exists": {"type": "boolean"},
            "rationale": {"type": "string"},
        },
        "additionalProperties": False,
    },
    "segment": {
        "type": "object",
        "required": ["frames"],
        "properties": {"frames": {"type": "array", "items": MASK_SCHEMA}},
        "additionalProperties": False,
    },
    "refine": {
        "type": "object",
        "required": ["anchor", "frames"],
        "properties": {
            "anchor": {"type": "integer", "minimum": 0},
            "frames": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["frame_index", "confidence", "mask"],
                    "properties": {
                        "frame_index": {"type": "integer", "minimum": 0},
                        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
                        "mask": MASK_SCHEMA,
                    },
                    "additionalProperties": False,
                },
            },
        },
        "additionalProperties": False,
    },
}

# Per endpoint: (field, mandatory-in-fixture-entry).  Optional fields
# constrain a match only when the fixture entry includes them, which
# lets e.g. a judge fixture ignore the sampled frame indices.
_MATCH_FIELDS = {
    "asr": (("audio_ref", True),),
    "judge": (("video_ref", True), ("phrase", True), ("frame_indices", False)),
    "segment": (("video_ref", True), ("prompt", True), ("template_id", False)),
    "refine": (
        ("video_ref", True),
        ("anchor", True),
        ("bbox", False),
        ("point", False),
    ),
}

_TEXT_FIELDS = {"phrase", "prompt", "audio_ref", "video_ref"}


def kind_for_path(path: str) -> str:
    """Map a request path onto an endpoint kind."""
    kind = _PATH_TO_KIND.get(path)
    if kind is None:
        raise ProtocolError(f"unknown endpoint path {path!r}")
    return kind


def _canonical_value(field: str, value):
    if field in _TEXT_FIELDS and isinstance(value, str):
        return value.strip()
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return value


def canonical_request(kind: str, payload: dict) -> dict:
    """Canonicalize the matchable fields of a request payload."""
    fields = _MATCH_FIELDS[kind]
    return {
        name: _canonical_value(name, payload[name])
        for name, _ in fields
        if name in payload
    }


def request_matches(kind: str, entry_request: dict, payload: dict) -> bool:
    """Does a fixture entry's request pattern match an actual payload?"""
    actual = canonical_request(kind, payload)
    for name, mandatory in _MATCH_FIELDS[kind]:
        if name not in entry_request:
            if mandatory:
                return False
            continue
        wanted = _canonical_value(name, entry_request[name])
        if name not in actual or actual[name] != wanted:
            return False
    return True


def find_fixture_response(fixtures: dict, kind: str, payload: dict):
    """First matching canned response for ``payload``, or ``None``.

    ``fixtures`` is the parsed fixture document: a map from endpoint
    kind to a list of ``{"request": ..., "response": ...}`` entries.
    """
    for entry in fixtures.get(kind, []):
        if request_matches(kind, entry.get("request", {}), payload):
            return entry.get("response")
    return None
