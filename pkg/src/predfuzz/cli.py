"""Command-line entry point.

Subcommands: run (one session), batch (whole corpus, concurrent), verify
(re-verify a stored report by execution), metrics (recompute metrics from
stored reports), record (capture a live transcript for replay). Exit codes:
0 success, 1 partial failures, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional

from .agents import (
    AgentConfig,
    AgentRole,
    AgentSuite,
    AgentUnavailable,
    LiveBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    ScriptExhausted,
    Transcript,
)
from .corpus import Completeness, Corpus, CorpusError, load_corpus
from .engine import Architecture, SessionConfig, run_session
from .metrics import average_gaps_by_position, compute_confusion, compute_prf
from .predictor import ExecutionPrediction
from .prompts import PromptLibrary
from .reports import (
    BatchReport,
    SessionReport,
    emit_plateau_csv,
    environment_fingerprint,
    recompute_session_metrics,
)
from .verifier import (
    EnvironmentMissing,
    VerifierConfig,
    diff_prediction,
    execute_with_input,
)

log = logging.getLogger(__name__)

# provider-side rate limits make wide fan-out counterproductive
LIVE_CONCURRENCY_CAP = 4


class ConfigError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predfuzz",
        description="Execution-free, coverage-guided runtime-error detection",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file of session-config defaults")
        p.add_argument("--budget", type=float, help="wall-clock seconds per session")
        p.add_argument("--max-iterations", type=int, help="iteration cap (deterministic runs)")
        p.add_argument("--plateau-window", type=int, help="no-gain iterations before error focus")
        p.add_argument(
            "--architecture",
            choices=[a.value for a in Architecture],
            help="engine architecture",
        )
        p.add_argument("--backend", choices=["live", "replay", "scripted"], default="live")
        p.add_argument("--transcript", help="transcript file (replay backend, record output)")
        p.add_argument("--script", help="scripted-responses JSON file (scripted backend)")
        p.add_argument("--tcg-model", default="gpt-3.5-turbo")
        p.add_argument("--pe-model", default="gpt-4o")
        p.add_argument("--verify", action="store_true", help="verify predictions by execution")
        p.add_argument("--templates", help="prompt-template override directory")
        p.add_argument("--out", default="out", help="report output directory")

    run_p = sub.add_parser("run", help="run one detection session")
    common(run_p)
    run_p.add_argument("--corpus", required=True)
    run_p.add_argument("--snippet", required=True, help="snippet id")

    batch_p = sub.add_parser("batch", help="run every corpus snippet")
    common(batch_p)
    batch_p.add_argument("--corpus", required=True)
    batch_p.add_argument("--concurrency", type=int, default=os.cpu_count() or 2)
    batch_p.add_argument("--mode", choices=["detect", "so"], default="detect")

    verify_p = sub.add_parser("verify", help="re-verify a stored report by execution")
    verify_p.add_argument("--corpus", required=True)
    verify_p.add_argument("--report", required=True, help="session report file")
    verify_p.add_argument("--exec-timeout", type=float, default=10.0)
    verify_p.add_argument("--out", help="rewrite destination (default: in place)")

    metrics_p = sub.add_parser("metrics", help="recompute metrics from stored reports")
    metrics_p.add_argument("--reports", required=True, help="directory of session reports")
    metrics_p.add_argument("--corpus", help="corpus file (ground-truth labels)")
    metrics_p.add_argument("--mode", choices=["detect", "so"], default="detect")
    metrics_p.add_argument("--out", help="write the machine-readable summary here")

    record_p = sub.add_parser("record", help="capture a live transcript for later replay")
    common(record_p)
    record_p.add_argument("--corpus", required=True)
    record_p.add_argument("--snippet", required=True)

    plateau_p = sub.add_parser("plateau", help="emit the coverage-curve CSV for a report")
    plateau_p.add_argument("--report", required=True)
    return parser


def _session_config(args) -> SessionConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
    if args.budget is not None:
        values["time_budget"] = args.budget
    if args.max_iterations is not None:
        values["max_iterations"] = args.max_iterations
    if args.plateau_window is not None:
        values["plateau_window"] = args.plateau_window
    if args.architecture is not None:
        values["architecture"] = args.architecture
    if args.verify:
        values["verify_by_execution"] = True
    if isinstance(values.get("architecture"), str):
        values["architecture"] = Architecture(values["architecture"])
    known = {"time_budget", "max_iterations", "plateau_window", "architecture", "verify_by_execution"}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown session-config keys: {sorted(unknown)}")
    try:
        return SessionConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _agent_suite(args, recording: bool = False) -> AgentSuite:
    if args.backend == "scripted":
        if not args.script:
            raise ConfigError("--backend scripted requires --script")
        backend = ScriptedBackend.from_file(args.script)
    elif args.backend == "replay":
        if not args.transcript:
            raise ConfigError("--backend replay requires --transcript")
        backend = ReplayBackend(Transcript.load(args.transcript))
    else:
        backend = LiveBackend()
    if recording:
        backend = RecordingBackend(backend)
    base_url = (
        os.environ.get("PREDFUZZ_BASE_URL")
        or os.environ.get("OPENAI_API_BASE")
        or "https://api.openai.com/v1"
    )
    return AgentSuite(
        backend=backend,
        tcg=AgentConfig(AgentRole.TEST_CASE_GENERATOR, model_name=args.tcg_model, base_url=base_url),
        pe=AgentConfig(AgentRole.PREDICTIVE_EXECUTOR, model_name=args.pe_model, base_url=base_url),
    )


def _load_corpus(path: str) -> Corpus:
    try:
        return load_corpus(path)
    except CorpusError as exc:
        raise ConfigError(str(exc)) from None


def _print_session_summary(report: SessionReport, elapsed: float) -> None:
    m = report.metrics
    etr = f"{m.etr:.2f}%" if m.etr is not None else "undefined"
    percent = report.ledger.get("percent", 0.0)
    print(
        f"{report.snippet_id}: status={report.status.value} iterations={len(report.iterations)} "
        f"coverage={percent:.2f}% errors={m.bdr} etr={etr} elapsed={elapsed:.1f}s"
    )
    for entry in report.detected_errors:
        print(f"  {entry['name']} (first at test {entry['first_test_id']})")


def _cmd_run(args) -> int:
    config = _session_config(args)
    corpus = _load_corpus(args.corpus)
    try:
        snippet = corpus.get(args.snippet)
    except KeyError:
        raise ConfigError(f"snippet '{args.snippet}' not found in {args.corpus}") from None
    agents = _agent_suite(args)
    prompts = PromptLibrary.from_dir(args.templates)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    report = run_session(snippet, config, agents, prompts=prompts, corpus=corpus)
    elapsed = time.monotonic() - started
    report.save(out_dir / f"{snippet.id}.json")
    _print_session_summary(report, elapsed)
    return 0 if report.status.value != "agent_unavailable" else 1


def _cmd_batch(args) -> int:
    config = _session_config(args)
    corpus = _load_corpus(args.corpus)
    prompts = PromptLibrary.from_dir(args.templates)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(snippet):
        agents = _agent_suite(args)
        started = time.monotonic()
        report = run_session(snippet, config, agents, prompts=prompts, corpus=corpus)
        elapsed = time.monotonic() - started
        report.save(out_dir / f"{snippet.id}.json")
        return report, elapsed

    batch = BatchReport(corpus_name=corpus.name)
    reports: list[SessionReport] = []
    failures = 0
    workers = max(1, args.concurrency)
    if args.backend == "live":
        workers = min(workers, LIVE_CONCURRENCY_CAP)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(one, snippet): snippet for snippet in corpus}
        for future in concurrent.futures.as_completed(futures):
            snippet = futures[future]
            try:
                report, elapsed = future.result()
            except Exception as exc:  # pragma: no cover - defensive batch isolation
                log.error("session for %s failed: %s", snippet.id, exc)
                batch.skips.append({"snippet_id": snippet.id, "reason": str(exc)})
                failures += 1
                continue
            reports.append(report)
            _print_session_summary(report, elapsed)
            if report.status.value == "agent_unavailable":
                failures += 1

    reports.sort(key=lambda r: r.snippet_id)
    batch.sessions = [
        {"snippet_id": r.snippet_id, "status": r.status.value, "file": f"{r.snippet_id}.json"}
        for r in reports
    ]
    by_id = {s.id: s for s in corpus}
    # snippets without truth labels are excluded from P/R, not batch skips
    batch.corpus_metrics, prf_excluded = _corpus_prf(reports, by_id)
    if batch.corpus_metrics is not None and prf_excluded:
        batch.corpus_metrics["excluded_snippets"] = [e["snippet_id"] for e in prf_excluded]
    if args.mode == "so":
        batch.confusion = _confusion(reports, by_id).to_dict()
    models = {"tcg": args.tcg_model, "pe": args.pe_model}
    batch.environment = environment_fingerprint(models, prompts)
    batch.save(out_dir / "batch.json")
    gaps = average_gaps_by_position([r.metrics.tests_to_next_error for r in reports])
    if gaps:
        print("avg tests to next unique error, by position: "
              + ", ".join(f"{g:.2f}" for g in gaps))
    print(f"batch: {len(reports)} sessions, {len(batch.skips)} skips -> {out_dir / 'batch.json'}")
    return 1 if failures else 0


def _corpus_prf(reports, by_id) -> tuple[Optional[dict], list[dict]]:
    pairs = []
    skips = []
    for report in reports:
        snippet = by_id.get(report.snippet_id)
        if snippet is None or snippet.ground_truth_errors is None:
            skips.append({"snippet_id": report.snippet_id, "reason": "no ground-truth labels"})
            continue
        detected = {entry["name"] for entry in report.detected_errors}
        pairs.append((detected, set(snippet.ground_truth_errors)))
    if not pairs:
        return None, skips
    return compute_prf(pairs).to_dict(), skips


def _confusion(reports, by_id):
    labels = []
    for report in reports:
        snippet = by_id.get(report.snippet_id)
        if snippet is None:
            continue
        predicted_buggy = bool(report.detected_errors)
        actual_buggy = bool(snippet.ground_truth_errors)
        labels.append((predicted_buggy, actual_buggy))
    return compute_confusion(labels)


def _cmd_verify(args) -> int:
    corpus = _load_corpus(args.corpus)
    report_path = Path(args.report)
    if not report_path.exists():
        raise ConfigError(f"report not found: {report_path}")
    report = SessionReport.load(report_path)
    try:
        snippet = corpus.get(report.snippet_id)
    except KeyError:
        raise ConfigError(f"snippet '{report.snippet_id}' not found in {args.corpus}") from None

    target = corpus.companion_of(snippet)
    vconfig = VerifierConfig(timeout=args.exec_timeout)
    unverified = 0
    for record in report.iterations:
        if not record.retained or record.test_case is None:
            continue
        if target is None or target.completeness is not Completeness.COMPLETE:
            record.unverified_reason = "no companion complete version available"
            unverified += 1
            continue
        try:
            outcome = execute_with_input(
                target, record.test_case["input_text"], record.test_case["id"], vconfig
            )
        except EnvironmentMissing as exc:
            record.unverified_reason = str(exc)
            unverified += 1
            continue
        record.verification_outcome = outcome
        prediction = record.prediction or ExecutionPrediction(test_id=record.test_case["id"])
        record.verification_diff = diff_prediction(prediction, outcome)
        record.unverified_reason = None
    report.metrics = recompute_session_metrics(report)
    destination = Path(args.out) if args.out else report_path
    report.save(destination)
    print(f"verified {report.snippet_id}: metrics effective={report.metrics.effective} "
          f"bdr={report.metrics.bdr} unverified={unverified} -> {destination}")
    return 0 if unverified == 0 else 1


def _cmd_metrics(args) -> int:
    reports_dir = Path(args.reports)
    if not reports_dir.exists():
        raise ConfigError(f"reports directory not found: {reports_dir}")
    reports = []
    for path in sorted(reports_dir.glob("*.json")):
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            continue
        if data.get("schema") == "session-report/1":
            reports.append(SessionReport.from_dict(data))
    if not reports:
        raise ConfigError(f"no session reports under {reports_dir}")

    summary: dict = {"sessions": []}
    mismatches = 0
    for report in reports:
        recomputed = recompute_session_metrics(report)
        if recomputed.to_dict() != report.metrics.to_dict():
            mismatches += 1
        summary["sessions"].append({"snippet_id": report.snippet_id, **recomputed.to_dict()})

    if args.mode == "so" and not args.corpus:
        raise ConfigError("--mode so needs --corpus for the buggy/non-buggy labels")
    if args.corpus:
        by_id = {s.id: s for s in _load_corpus(args.corpus)}
        summary["corpus_metrics"], _ = _corpus_prf(reports, by_id)
        if args.mode == "so":
            summary["confusion"] = _confusion(reports, by_id).to_dict()

    header = f"{'snippet':<24} {'gen':>5} {'eff':>5} {'etr%':>8} {'bdr':>4} {'plateau':>8}"
    print(header)
    print("-" * len(header))
    for row in summary["sessions"]:
        etr = f"{row['etr']:.2f}" if row["etr"] is not None else "undef"
        print(f"{row['snippet_id']:<24} {row['generated']:>5} {row['effective']:>5} "
              f"{etr:>8} {row['bdr']:>4} {row['total_plateau']:>8}")
    cm = summary.get("corpus_metrics")
    if cm:
        f1 = f"{cm['f1']:.4f}" if cm["f1"] is not None else "undef"
        prec = f"{cm['precision']:.4f}" if cm["precision"] is not None else "undef"
        rec = f"{cm['recall']:.4f}" if cm["recall"] is not None else "undef"
        print(f"corpus micro P/R/F1: {prec} / {rec} / {f1}")
    confusion = summary.get("confusion")
    if confusion:
        acc = f"{100.0 * confusion['accuracy']:.2f}%" if confusion["accuracy"] is not None else "undef"
        print(f"confusion: TP={confusion['tp']} FN={confusion['fn']} "
              f"FP={confusion['fp']} TN={confusion['tn']} accuracy={acc}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    if mismatches:
        print(f"warning: {mismatches} report(s) had stale embedded metrics")
    return 0


def _cmd_record(args) -> int:
    if not args.transcript:
        raise ConfigError("record requires --transcript (output path)")
    config = _session_config(args)
    corpus = _load_corpus(args.corpus)
    try:
        snippet = corpus.get(args.snippet)
    except KeyError:
        raise ConfigError(f"snippet '{args.snippet}' not found in {args.corpus}") from None
    agents = _agent_suite(args, recording=True)
    prompts = PromptLibrary.from_dir(args.templates)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_session(snippet, config, agents, prompts=prompts, corpus=corpus)
    report.save(out_dir / f"{snippet.id}.json")
    backend = agents.backend
    assert isinstance(backend, RecordingBackend)
    backend.transcript.save(args.transcript)
    print(f"recorded {len(backend.transcript.entries)} exchanges -> {args.transcript}")
    return 0 if report.status.value != "agent_unavailable" else 1


def _cmd_plateau(args) -> int:
    report_path = Path(args.report)
    if not report_path.exists():
        raise ConfigError(f"report not found: {report_path}")
    sys.stdout.write(emit_plateau_csv(SessionReport.load(report_path)))
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {
        "run": _cmd_run,
        "batch": _cmd_batch,
        "verify": _cmd_verify,
        "metrics": _cmd_metrics,
        "record": _cmd_record,
        "plateau": _cmd_plateau,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AgentUnavailable, ScriptExhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
