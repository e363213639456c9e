"""Audio-referred video object segmentation: orchestration and evaluation.

The package stages a referring-segmentation pipeline over pluggable
model backends (transcription, existence judging, coarse segmentation,
geometric refinement) and ships the mask/metric core needed to score
the results: run-length masks, region and boundary measures, the
leaderboard arithmetic, and a synthetic harness for end-to-end checks
without any real model.
"""

from .errors import (
    RefvosError,
    DimensionError,
    AlignmentError,
    ParseError,
    IntegrityError,
    UsageError,
    ConfigError,
    WriteError,
    BackendError,
    ProtocolError,
)
from .masks import (
    BinaryMask,
    MaskTrajectory,
    GeometricPrompt,
    rle_encode,
    rle_decode,
    area,
    bbox,
    center,
    jaccard,
    boundary_f,
    default_boundary_tolerance,
    connected_components,
    mask_to_json,
    mask_from_json,
    trajectory_to_json,
    trajectory_from_json,
    write_pgm,
)
from .metrics import (
    ExpressionScore,
    EvalResult,
    score_expression,
    aggregate,
    evaluate_predictions,
    jf_of,
    final_of,
    format_report,
    result_to_json,
)
from .metadata import (
    NO_OBJECT_META,
    ExpressionRecord,
    PredictionRecord,
    ManifestEntry,
    Manifest,
    load_expressions,
    write_predictions,
    load_manifest,
    load_predictions,
)
from .prompts import IMAGE_TOKEN, QUESTION_WORDS, Prompt, build_prompt, is_question
from .backends import (
    BackendEndpoint,
    JudgeVerdict,
    RefineResult,
    HttpTransport,
    ScriptedTransport,
    make_transport,
    sample_frames,
    asr_transcribe,
    judge_exists,
    segment_video,
    refine,
)
from .agentic import (
    AgenticConfig,
    ReliabilityReport,
    assess,
    select_anchor,
    derive_prompt,
    fuse,
)
from .pipeline import (
    PipelineConfig,
    StageTrace,
    RunResult,
    run_expression,
    run_dataset,
)

__version__ = "0.1.0"
