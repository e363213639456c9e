"""Command-line entry point.

Subcommands: run (batch pipeline -> manifest), eval (score predictions
against ground truth), gate (existence verdicts only), inspect
(reliability reports per expression), simulate (synthetic ablation).

Exit codes are a stable contract: 0 success, 1 one or more expressions
failed during a run, 2 usage or configuration errors.  Backend
addresses may be overridden by environment variables REFVOS_ASR_URL,
REFVOS_JUDGE_URL, REFVOS_SEGMENT_URL and REFVOS_REFINE_URL, which force
the corresponding endpoint onto HTTP; everything else comes from the
config file plus flags.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import synth
from .agentic import AgenticConfig
from .backends import BackendEndpoint
from .errors import RefvosError, ConfigError, UsageError
from .metadata import (
    canonical_json,
    load_expressions,
    load_predictions,
)
from .metrics import (
    ExpressionScore,
    aggregate,
    evaluate_predictions,
    format_report,
    result_to_json,
)
from .pipeline import (
    PipelineConfig,
    acquire_transcript,
    gate_decision,
    make_transports,
    run_dataset,
)
from . import protocol

__all__ = ["main", "build_pipeline_config"]

ENV_URLS = {kind: f"REFVOS_{kind.upper()}_URL" for kind in protocol.ENDPOINT_KINDS}


def _load_json(path, what: str):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}")


def build_pipeline_config(
    doc: dict,
    *,
    env=None,
    parallel: int | None = None,
    gate_policy: str | None = None,
) -> PipelineConfig:
    """Turn a config document into a PipelineConfig.

    Precedence: file < environment URL overrides < flags.
    """
    env = os.environ if env is None else env
    if not isinstance(doc, dict):
        raise ConfigError("config root: expected object")
    raw_endpoints = doc.get("endpoints")
    if not isinstance(raw_endpoints, dict):
        raise ConfigError("config endpoints: expected object with all four kinds")
    endpoints = {}
    for kind in protocol.ENDPOINT_KINDS:
        url = env.get(ENV_URLS[kind])
        entry = raw_endpoints.get(kind)
        if url:
            timeout = 10.0
            if isinstance(entry, dict) and "timeout" in entry:
                timeout = float(entry["timeout"])
            endpoints[kind] = BackendEndpoint(
                kind=kind, transport="http", address=url, timeout=timeout
            )
            continue
        if not isinstance(entry, dict):
            raise ConfigError(f"config endpoints/{kind}: missing or not an object")
        try:
            endpoints[kind] = BackendEndpoint(
                kind=kind,
                transport=entry.get("transport", "http"),
                address=entry.get("address", ""),
                timeout=float(entry.get("timeout", 10.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config endpoints/{kind}: {exc}")

    agentic_doc = doc.get("agentic", {})
    if not isinstance(agentic_doc, dict):
        raise ConfigError("config agentic: expected object")
    try:
        agentic = AgenticConfig(**agentic_doc)
    except TypeError as exc:
        raise ConfigError(f"config agentic: {exc}")

    kwargs = {}
    for key in ("gate_policy", "gate_enabled", "anchor_policy", "refine_policy",
                "parallelism", "judge_sample_count"):
        if key in doc:
            kwargs[key] = doc[key]
    if gate_policy is not None:
        kwargs["gate_policy"] = gate_policy
    if parallel is not None:
        kwargs["parallelism"] = parallel
    try:
        return PipelineConfig(endpoints=endpoints, agentic=agentic, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}")


def _config_from_args(args) -> PipelineConfig:
    doc = _load_json(args.config, "config")
    return build_pipeline_config(
        doc,
        parallel=getattr(args, "parallel", None),
        gate_policy=getattr(args, "gate_policy", None),
    )


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    records = load_expressions(args.expressions)
    result = run_dataset(records, cfg, out=args.out)
    print(f"wrote {len(result.predictions)} predictions to {Path(args.out) / 'manifest.json'}")
    if result.failed_count:
        print(f"{result.failed_count} expression(s) failed; see [META:ERROR] entries",
              file=sys.stderr)
        return 1
    return 0


def _scores_from_file(path) -> list[ExpressionScore]:
    doc = _load_json(path, "scores file")
    if not isinstance(doc, dict) or not isinstance(doc.get("scores"), list):
        raise ConfigError(f"scores file {path}: expected {{\"scores\": [...]}}")
    out = []
    for i, item in enumerate(doc["scores"]):
        if not isinstance(item, dict):
            raise ConfigError(f"scores file {path}: scores/{i} is not an object")
        try:
            out.append(
                ExpressionScore(
                    expression_id=str(item.get("expression_id", str(i))),
                    j_mean=float(item["j_mean"]),
                    f_mean=float(item["f_mean"]),
                    gt_present=bool(item["gt_present"]),
                    pred_present=bool(item["pred_present"]),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"scores file {path}: scores/{i} missing {exc}")
    return out


def cmd_eval(args) -> int:
    if args.scores:
        result = aggregate(_scores_from_file(args.scores))
    else:
        if not (args.pred and args.gt):
            raise UsageError("eval needs --pred and --gt (or --scores)")
        preds = load_predictions(args.pred)
        gts = load_predictions(args.gt)
        result = evaluate_predictions(preds, gts)
    print(format_report(result))
    if args.out:
        Path(args.out).write_text(
            canonical_json(result_to_json(result), indent=2), encoding="utf-8"
        )
    return 0


def cmd_gate(args) -> int:
    cfg = _config_from_args(args)
    records = load_expressions(args.expressions)
    transports = make_transports(cfg)
    for rec in records:
        transcript, _ = acquire_transcript(rec, cfg, transports)
        exists, source, _ = gate_decision(rec, transcript, cfg, transports)
        line = {
            "video_id": rec.video_id,
            "expression_id": rec.expression_id,
            "exists": exists,
            "source": source,
        }
        print(canonical_json(line), end="")
    return 0


def cmd_inspect(args) -> int:
    cfg = _config_from_args(args)
    records = load_expressions(args.expressions)
    result = run_dataset(records, cfg)
    for trace in result.traces:
        report = None
        for event in trace.events:
            if event.stage == "assess":
                report = event.detail.get("report")
        line = {
            "video_id": trace.video_id,
            "expression_id": trace.expression_id,
            "gate_verdict": trace.gate_verdict,
            "anchor": trace.anchor,
            "refine_invoked": trace.refine_invoked,
            "failed": trace.failed,
            "report": report,
        }
        print(canonical_json(line), end="")
    return 1 if result.failed_count else 0


def _scenarios_from_spec(path) -> list:
    doc = _load_json(path, "scenario spec")
    if not isinstance(doc, dict):
        raise ConfigError(f"scenario spec {path}: expected object")
    corruption_doc = doc.get("corruption")
    corruption = None
    if corruption_doc is not None:
        if not isinstance(corruption_doc, dict):
            raise ConfigError(f"scenario spec {path}: corruption must be an object")
        try:
            corruption = synth.CorruptionSpec(**corruption_doc)
        except TypeError as exc:
            raise ConfigError(f"scenario spec {path}: corruption: {exc}")
    kwargs = {}
    if "dims" in doc:
        dims = doc["dims"]
        if not (isinstance(dims, list) and len(dims) == 2):
            raise ConfigError(f"scenario spec {path}: dims must be [height, width]")
        kwargs["dims"] = (int(dims[0]), int(dims[1]))
    for key in ("base_seed", "gt_absent_fraction", "frames"):
        if key in doc:
            kwargs[key] = doc[key]
    try:
        return synth.default_scenarios(
            int(doc.get("count", 50)), corruption=corruption, **kwargs
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario spec {path}: {exc}")


def cmd_simulate(args) -> int:
    if args.spec:
        scenarios = _scenarios_from_spec(args.spec)
    else:
        scenarios = synth.default_scenarios(args.count, base_seed=args.seed)
    variants = synth.default_variants()
    report = synth.run_ablation(variants, scenarios, args.out)
    print(synth.format_ablation(report))
    report_doc = {
        "scenario_count": report.scenario_count,
        "strictly_increasing": report.strictly_increasing,
        "variants": [
            {"name": e.name, **result_to_json(e.result)["aggregate"]}
            for e in report.entries
        ],
    }
    out_path = Path(args.out) / "report.json"
    out_path.write_text(canonical_json(report_doc, indent=2), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refvos",
        description="Audio-referred video object segmentation pipeline tools.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log stage traces to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the pipeline and write a manifest")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--expressions", required=True, help="expression metadata JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--parallel", type=int, default=None,
                   help="max in-flight expressions")
    p.add_argument("--gate-policy", choices=("metadata_first", "always_judge"),
                   default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", help="prediction manifest.json")
    p.add_argument("--gt", help="ground-truth manifest.json")
    p.add_argument("--scores", help="precomputed per-expression scores JSON")
    p.add_argument("--out", help="write machine-readable scores here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gate", help="print existence verdicts only")
    p.add_argument("--config", required=True)
    p.add_argument("--expressions", required=True)
    p.add_argument("--gate-policy", choices=("metadata_first", "always_judge"),
                   default=None)
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("inspect", help="print reliability reports per expression")
    p.add_argument("--config", required=True)
    p.add_argument("--expressions", required=True)
    p.add_argument("--parallel", type=int, default=None)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("simulate", help="synthetic ablation over seeded scenarios")
    p.add_argument("--out", required=True, help="working directory for the run")
    p.add_argument("--count", type=int, default=50, help="number of scenarios")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--spec", help="scenario spec JSON (overrides count/seed)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(name)s %(message)s",
    )
    try:
        return args.func(args)
    except RefvosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
