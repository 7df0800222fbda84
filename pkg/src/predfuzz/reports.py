"""Session and batch report documents.

Reports serialize to stable JSON (sorted keys, fixed indentation, trailing
newline) so that deterministic sessions produce byte-identical files and
serialize -> parse -> serialize is the identity. Wall-clock timestamps are
deliberately kept out of the document.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Optional

from . import metrics as metrics_mod
from .metrics import SessionMetrics
from .predictor import ExecutionPrediction, ParseStatus
from .verifier import ActualOutcome, PredictionDiff

if TYPE_CHECKING:
    from .prompts import PromptLibrary


class SessionStatus(Enum):
    COMPLETED = "completed"
    TIME_BUDGET = "time_budget"
    AGENT_UNAVAILABLE = "agent_unavailable"


@dataclass
class IterationRecord:
    iteration: int
    phase: Optional[str]
    prompt_digest: str
    tcg_response: str
    tcg_attempts: int = 1
    test_case: Optional[dict] = None
    duplicate: bool = False
    skipped: bool = False
    prediction: Optional[ExecutionPrediction] = None
    dropped_lines: list[int] = field(default_factory=list)
    percent_after: float = 0.0
    verification_outcome: Optional[ActualOutcome] = None
    verification_diff: Optional[PredictionDiff] = None
    unverified_reason: Optional[str] = None

    @property
    def retained(self) -> bool:
        return self.test_case is not None and not self.duplicate and not self.skipped

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "phase": self.phase,
            "prompt_digest": self.prompt_digest,
            "tcg_response": self.tcg_response,
            "tcg_attempts": self.tcg_attempts,
            "test_case": self.test_case,
            "duplicate": self.duplicate,
            "skipped": self.skipped,
            "prediction": self.prediction.to_dict() if self.prediction else None,
            "dropped_lines": list(self.dropped_lines),
            "percent_after": self.percent_after,
            "verification_outcome": (
                self.verification_outcome.to_dict() if self.verification_outcome else None
            ),
            "verification_diff": (
                self.verification_diff.to_dict() if self.verification_diff else None
            ),
            "unverified_reason": self.unverified_reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IterationRecord":
        return cls(
            iteration=data["iteration"],
            phase=data["phase"],
            prompt_digest=data["prompt_digest"],
            tcg_response=data["tcg_response"],
            tcg_attempts=data["tcg_attempts"],
            test_case=data["test_case"],
            duplicate=data["duplicate"],
            skipped=data["skipped"],
            prediction=(
                ExecutionPrediction.from_dict(data["prediction"]) if data["prediction"] else None
            ),
            dropped_lines=list(data["dropped_lines"]),
            percent_after=data["percent_after"],
            verification_outcome=(
                ActualOutcome.from_dict(data["verification_outcome"])
                if data["verification_outcome"]
                else None
            ),
            verification_diff=(
                PredictionDiff.from_dict(data["verification_diff"])
                if data["verification_diff"]
                else None
            ),
            unverified_reason=data["unverified_reason"],
        )


@dataclass
class SessionReport:
    snippet_id: str
    status: SessionStatus
    config: dict
    environment: dict
    iterations: list[IterationRecord] = field(default_factory=list)
    ledger: dict = field(default_factory=dict)
    detected_errors: list[dict] = field(default_factory=list)
    metrics: SessionMetrics = field(default_factory=SessionMetrics)

    def to_dict(self) -> dict:
        return {
            "schema": "session-report/1",
            "snippet_id": self.snippet_id,
            "status": self.status.value,
            "config": self.config,
            "environment": self.environment,
            "iterations": [record.to_dict() for record in self.iterations],
            "ledger": self.ledger,
            "detected_errors": self.detected_errors,
            "metrics": self.metrics.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "SessionReport":
        return cls(
            snippet_id=data["snippet_id"],
            status=SessionStatus(data["status"]),
            config=data["config"],
            environment=data["environment"],
            iterations=[IterationRecord.from_dict(r) for r in data["iterations"]],
            ledger=data["ledger"],
            detected_errors=data["detected_errors"],
            metrics=SessionMetrics.from_dict(data["metrics"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "SessionReport":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SessionReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class BatchReport:
    corpus_name: str
    sessions: list[dict] = field(default_factory=list)
    skips: list[dict] = field(default_factory=list)
    corpus_metrics: Optional[dict] = None
    confusion: Optional[dict] = None
    environment: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "batch-report/1",
            "corpus": self.corpus_name,
            "sessions": self.sessions,
            "skips": self.skips,
            "corpus_metrics": self.corpus_metrics,
            "confusion": self.confusion,
            "environment": self.environment,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "BatchReport":
        return cls(
            corpus_name=data["corpus"],
            sessions=data["sessions"],
            skips=data["skips"],
            corpus_metrics=data["corpus_metrics"],
            confusion=data["confusion"],
            environment=data["environment"],
        )

    @classmethod
    def from_json(cls, text: str) -> "BatchReport":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def recompute_session_metrics(report: SessionReport) -> SessionMetrics:
    """Derive SessionMetrics from the raw iteration records; run-time
    embedding uses this same function, so 'metrics' on a stored report
    reproduces the embedded values exactly."""
    retained = [r for r in report.iterations if r.retained]
    generated = len(retained)
    verified = generated > 0 and all(r.verification_outcome is not None for r in retained)

    effective = 0
    for record in retained:
        if record.verification_diff is not None:
            if record.verification_diff.error_match.value == "match":
                effective += 1
        elif record.prediction is not None:
            if record.prediction.parse_status is ParseStatus.OK and record.prediction.predicted_errors:
                effective += 1

    detected_names = [e["name"] for e in report.detected_errors]
    if verified:
        confirmed = set()
        for record in retained:
            outcome = record.verification_outcome
            if outcome is None or outcome.exception_name is None:
                continue
            if record.prediction and outcome.exception_name in record.prediction.predicted_errors:
                confirmed.add(outcome.exception_name)
        bdr = len(confirmed & set(detected_names))
    else:
        bdr = len(detected_names)

    first_ids = [e["first_test_id"] for e in report.detected_errors]
    history = list(report.ledger.get("history", []))
    intervals, total_plateau = metrics_mod.plateau_stats(history)
    return SessionMetrics(
        generated=generated,
        effective=effective,
        etr=metrics_mod.compute_etr(generated, effective),
        bdr=bdr,
        tests_to_next_error=metrics_mod.tests_to_next_unique_error(first_ids),
        plateau_intervals=intervals,
        total_plateau=total_plateau,
        verified=verified,
    )


def emit_plateau_csv(report: SessionReport) -> str:
    """Coverage-vs-iteration table for external plotting. The actual
    column appears only when verification ran."""
    has_actual = any(r.verification_outcome is not None for r in report.iterations)
    coverable = set(report.ledger.get("coverable", []))
    rows = []
    if has_actual:
        rows.append("iteration,predicted_percent,actual_percent")
        executed_union: set[int] = set()
        for record in report.iterations:
            if record.verification_outcome is not None:
                executed_union |= set(record.verification_outcome.executed_lines) & coverable
            actual_pct = 100.0 * len(executed_union) / len(coverable) if coverable else 0.0
            rows.append(f"{record.iteration},{record.percent_after:.2f},{actual_pct:.2f}")
    else:
        rows.append("iteration,predicted_percent")
        for record in report.iterations:
            rows.append(f"{record.iteration},{record.percent_after:.2f}")
    return "\n".join(rows) + "\n"


_javac_version_cache: Optional[str] = None
_probed_javac = False


def _javac_version() -> Optional[str]:
    global _javac_version_cache, _probed_javac
    if _probed_javac:
        return _javac_version_cache
    _probed_javac = True
    javac = shutil.which("javac")
    if javac:
        try:
            proc = subprocess.run([javac, "-version"], capture_output=True, text=True, timeout=10)
            _javac_version_cache = (proc.stdout + proc.stderr).strip() or None
        except (OSError, subprocess.SubprocessError):
            _javac_version_cache = None
    return _javac_version_cache


def environment_fingerprint(models: dict[str, str], prompts: "PromptLibrary") -> dict:
    """Auditable record of what produced a report: model names, template
    hashes, toolchain versions. No timestamps."""
    return {
        "models": dict(sorted(models.items())),
        "prompt_template_hashes": prompts.template_hashes(),
        "toolchains": {
            "python": sys.version.split()[0],
            "javac": _javac_version(),
        },
    }
