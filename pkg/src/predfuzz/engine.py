"""Detection-session engine: phase selection, test generation, dedup,
predictive execution, ledger updates, and stop conditions.

One session is strictly sequential; each prompt depends on the ledger
state the previous iteration produced. Four architectures are supported:
a single-agent vanilla baseline, a two-agent loop without feedback, a
single-phase feedback loop, and the full two-phase dual-prompt loop.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .agents import AgentRole, AgentSuite, AgentUnavailable, prompt_digest
from .corpus import CodeSnippet, Completeness, Corpus
from .predictor import normalize_exception_name, predict_execution
from .prompts import FORMAT_REMINDER, Phase, PromptLibrary, annotate_uncovered
from .reports import (
    IterationRecord,
    SessionReport,
    SessionStatus,
    environment_fingerprint,
    recompute_session_metrics,
)
from .verifier import EnvironmentMissing, VerifierConfig, diff_prediction, execute_with_input

log = logging.getLogger(__name__)


class Architecture(Enum):
    SINGLE_AGENT_BASIC = "single_agent_basic"
    MULTI_AGENT_BASIC = "multi_agent_basic"
    MULTI_AGENT_FEEDBACK = "multi_agent_feedback"
    TWO_PHASE = "two_phase"


class Dedup(Enum):
    FRESH = "fresh"
    DUPLICATE = "duplicate"


def normalize_input(text: str) -> str:
    """Canonical form for duplicate detection: LF newlines, per-line
    trailing whitespace stripped, trailing blank lines dropped."""
    lines = [line.rstrip() for line in text.replace("\r\n", "\n").replace("\r", "\n").split("\n")]
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines)


@dataclass
class TestCase:
    __test__ = False  # domain type, not a pytest class

    id: int
    input_text: str
    phase: Optional[Phase] = None
    normalized_form: str = ""

    def __post_init__(self):
        if not self.normalized_form:
            self.normalized_form = normalize_input(self.input_text)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "input_text": self.input_text,
            "phase": self.phase.value if self.phase else None,
            "normalized_form": self.normalized_form,
        }


@dataclass
class CoverageLedger:
    snippet_id: str
    coverable: set[int]
    covered: set[int] = field(default_factory=set)
    history: list[float] = field(default_factory=list)

    @property
    def percent(self) -> float:
        if not self.coverable:
            return 0.0
        return 100.0 * len(self.covered) / len(self.coverable)

    def to_dict(self) -> dict:
        return {
            "snippet_id": self.snippet_id,
            "coverable": sorted(self.coverable),
            "covered": sorted(self.covered),
            "percent": self.percent,
            "history": list(self.history),
        }


def update_ledger(ledger: CoverageLedger, predicted_covered: set[int]) -> tuple[bool, list[int]]:
    """Fold a predicted line set into the ledger in place.

    Indices outside the coverable universe are dropped with a warning and
    returned. Returns (coverage gained?, dropped indices).
    """
    valid = set(predicted_covered) & ledger.coverable
    dropped = sorted(set(predicted_covered) - valid)
    if dropped:
        log.warning(
            "snippet %s: dropping %d predicted line(s) outside the coverable set: %s",
            ledger.snippet_id, len(dropped), dropped,
        )
    before = len(ledger.covered)
    ledger.covered |= valid
    ledger.history.append(ledger.percent)
    return len(ledger.covered) > before, dropped


@dataclass
class SessionConfig:
    time_budget: Optional[float] = 300.0
    max_iterations: Optional[int] = None
    plateau_window: int = 3
    architecture: Architecture = Architecture.TWO_PHASE
    verify_by_execution: bool = False

    def __post_init__(self):
        if self.time_budget is None and self.max_iterations is None:
            raise ValueError("set at least one of time_budget / max_iterations")
        if self.plateau_window < 1:
            raise ValueError("plateau_window must be >= 1")

    def to_dict(self) -> dict:
        return {
            "time_budget": self.time_budget,
            "max_iterations": self.max_iterations,
            "plateau_window": self.plateau_window,
            "architecture": self.architecture.value,
            "verify_by_execution": self.verify_by_execution,
        }


@dataclass
class SessionState:
    ledger: CoverageLedger
    iteration: int = 0
    phase: Phase = Phase.DUAL_OBJECTIVE
    test_cases: list[TestCase] = field(default_factory=list)
    detected_errors: dict[str, int] = field(default_factory=dict)
    plateau_count: int = 0
    full_coverage_reached: bool = False
    pe_calls: int = 0
    duplicates: int = 0
    skips: int = 0


def select_phase(state: SessionState, config: SessionConfig) -> Phase:
    """Error focus once coverage hits 100% (sticky) or after plateau_window
    consecutive no-gain iterations (re-evaluated, so a later gain returns
    the session to the dual objective)."""
    if state.full_coverage_reached or state.ledger.percent >= 100.0:
        state.full_coverage_reached = True
        return Phase.ERROR_FOCUS
    if state.plateau_count >= config.plateau_window:
        return Phase.ERROR_FOCUS
    return Phase.DUAL_OBJECTIVE


def deduplicate(state: SessionState, candidate: TestCase) -> Dedup:
    for retained in state.test_cases:
        if retained.normalized_form == candidate.normalized_form:
            return Dedup.DUPLICATE
    return Dedup.FRESH


def record_error(state: SessionState, names: set[str], test_id: int) -> None:
    """First-wins registration of normalized exception names."""
    for name in sorted(names):
        if name and name not in state.detected_errors:
            state.detected_errors[name] = test_id


_TCG_MARKER_RE = re.compile(r"test\s*case\s*input\s*:[ \t]*", re.IGNORECASE)
_PLACEHOLDER_RE = re.compile(r"\s*<input\s*\d*>\s*\.{0,3}\s*$")


def parse_tcg_response(text: str) -> Optional[str]:
    """Extract the stdin payload from a generator response; None when the
    response carries no usable input."""
    match = _TCG_MARKER_RE.search(text)
    if not match:
        return None
    body = text[match.end():]
    lines = []
    for line in body.splitlines():
        if line.strip().startswith("```"):
            continue
        if _PLACEHOLDER_RE.fullmatch(line):
            continue
        lines.append(line)
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        return None
    return "\n".join(lines)


_VANILLA_NAME_RE = re.compile(r"^[A-Z][A-Za-z0-9_$]*$")
_VANILLA_EXTRAS = {"KeyboardInterrupt", "StopIteration", "SystemExit", "GeneratorExit"}


def parse_vanilla_response(text: str, language) -> set[str]:
    """Exception names listed by the single-agent vanilla baseline."""
    names: set[str] = set()
    for line in text.splitlines():
        stripped = re.sub(r"^\s*(?:[-*•]|\d+[.)])\s*", "", line).strip()
        if not stripped or "<" in stripped or "Possible Runtime Exceptions" in stripped:
            continue
        candidate = normalize_exception_name(stripped, language)
        if not _VANILLA_NAME_RE.match(candidate):
            continue
        if candidate.endswith("Exception") or candidate.endswith("Error") or candidate in _VANILLA_EXTRAS:
            names.add(candidate)
    return names


def _generate_test_case(agents: AgentSuite, prompt: str, max_retries: int = 2) -> tuple[str, int, Optional[str]]:
    """TCG call with format-reminder retries on unparsable output.
    Returns (last response, attempts, parsed input or None)."""
    attempt_prompt = prompt
    response = ""
    attempts = 0
    for _ in range(max_retries + 1):
        attempts += 1
        response = agents.complete(AgentRole.TEST_CASE_GENERATOR, attempt_prompt)
        parsed = parse_tcg_response(response)
        if parsed is not None:
            return response, attempts, parsed
        attempt_prompt = prompt + FORMAT_REMINDER
    return response, attempts, None


def _session_config_snapshot(config: SessionConfig, agents: AgentSuite) -> dict:
    snapshot = config.to_dict()
    snapshot["models"] = {"tcg": agents.tcg.model_name, "pe": agents.pe.model_name}
    snapshot["temperatures"] = {"tcg": agents.tcg.temperature, "pe": agents.pe.temperature}
    return snapshot


def _verification_target(snippet: CodeSnippet, corpus: Optional[Corpus]) -> tuple[Optional[CodeSnippet], Optional[str]]:
    if snippet.completeness is Completeness.COMPLETE:
        return snippet, None
    companion = corpus.companion_of(snippet) if corpus is not None else None
    if companion is None or companion.completeness is not Completeness.COMPLETE:
        return None, "no companion complete version available"
    return companion, None


def _finalize(report: SessionReport, state: SessionState) -> SessionReport:
    report.ledger = state.ledger.to_dict()
    report.detected_errors = [
        {"name": name, "first_test_id": test_id} for name, test_id in state.detected_errors.items()
    ]
    report.metrics = recompute_session_metrics(report)
    return report


def _run_single_agent(snippet: CodeSnippet, config: SessionConfig, agents: AgentSuite,
                      prompts: PromptLibrary) -> SessionReport:
    state = SessionState(ledger=CoverageLedger(snippet.id, set(snippet.coverable_lines)))
    prompt = prompts.build_vanilla_prompt(snippet)
    report = SessionReport(
        snippet_id=snippet.id,
        status=SessionStatus.COMPLETED,
        config=_session_config_snapshot(config, agents),
        environment=environment_fingerprint(
            {"pe": agents.pe.model_name}, prompts
        ),
    )
    try:
        response = agents.backend.complete(agents.pe, prompt)
    except AgentUnavailable:
        report.status = SessionStatus.AGENT_UNAVAILABLE
        return _finalize(report, state)
    names = parse_vanilla_response(response, snippet.language)
    record_error(state, names, test_id=0)
    report.iterations.append(
        IterationRecord(
            iteration=1,
            phase=None,
            prompt_digest=prompt_digest(agents.pe.role, prompt),
            tcg_response=response,
            percent_after=0.0,
        )
    )
    return _finalize(report, state)


def run_session(
    snippet: CodeSnippet,
    config: SessionConfig,
    agents: AgentSuite,
    prompts: Optional[PromptLibrary] = None,
    corpus: Optional[Corpus] = None,
    verifier_config: Optional[VerifierConfig] = None,
) -> SessionReport:
    """Run one detection session and return its full report.

    The wall-clock budget starts at the first generator call; the loop
    stops when the budget elapses, the iteration cap is reached, or an
    agent becomes unavailable (partial report preserved).
    """
    prompts = prompts or PromptLibrary()
    if config.architecture is Architecture.SINGLE_AGENT_BASIC:
        return _run_single_agent(snippet, config, agents, prompts)

    state = SessionState(ledger=CoverageLedger(snippet.id, set(snippet.coverable_lines)))
    report = SessionReport(
        snippet_id=snippet.id,
        status=SessionStatus.COMPLETED,
        config=_session_config_snapshot(config, agents),
        environment=environment_fingerprint(
            {"tcg": agents.tcg.model_name, "pe": agents.pe.model_name}, prompts
        ),
    )
    started: Optional[float] = None

    while True:
        state.iteration += 1

        if config.architecture is Architecture.TWO_PHASE:
            phase = select_phase(state, config)
        elif config.architecture is Architecture.MULTI_AGENT_FEEDBACK:
            phase = Phase.DUAL_OBJECTIVE
        else:
            phase = None
        state.phase = phase or Phase.DUAL_OBJECTIVE

        if config.architecture is Architecture.MULTI_AGENT_BASIC:
            prompt = prompts.build_basic_prompt(snippet)
        elif phase is Phase.ERROR_FOCUS:
            prompt = prompts.build_phase2_prompt(snippet)
        else:
            prompt = prompts.build_phase1_prompt(
                annotate_uncovered(snippet, state.ledger), snippet.language
            )
        digest = prompt_digest(AgentRole.TEST_CASE_GENERATOR, prompt)

        if started is None:
            started = time.monotonic()

        try:
            response, attempts, input_text = _generate_test_case(agents, prompt)
        except AgentUnavailable as exc:
            log.warning("snippet %s: generator unavailable at iteration %d: %s",
                        snippet.id, state.iteration, exc)
            report.status = SessionStatus.AGENT_UNAVAILABLE
            break

        record = IterationRecord(
            iteration=state.iteration,
            phase=phase.value if phase else None,
            prompt_digest=digest,
            tcg_response=response,
            tcg_attempts=attempts,
            percent_after=state.ledger.percent,
        )

        if input_text is None:
            state.skips += 1
            record.skipped = True
            report.iterations.append(record)
        else:
            candidate = TestCase(id=state.iteration, input_text=input_text, phase=phase)
            record.test_case = candidate.to_dict()
            if deduplicate(state, candidate) is Dedup.DUPLICATE:
                state.duplicates += 1
                record.duplicate = True
                log.info("snippet %s: duplicate input at iteration %d discarded",
                         snippet.id, state.iteration)
                report.iterations.append(record)
            else:
                state.test_cases.append(candidate)
                try:
                    prediction = predict_execution(
                        agents, snippet, candidate.id, candidate.input_text, prompts
                    )
                except AgentUnavailable as exc:
                    log.warning("snippet %s: predictive executor unavailable at iteration %d: %s",
                                snippet.id, state.iteration, exc)
                    report.iterations.append(record)
                    report.status = SessionStatus.AGENT_UNAVAILABLE
                    break
                state.pe_calls += 1
                record.prediction = prediction
                record_error(state, prediction.predicted_errors, candidate.id)

                gained, dropped = update_ledger(state.ledger, prediction.predicted_covered)
                record.dropped_lines = dropped
                if gained:
                    state.plateau_count = 0
                else:
                    state.plateau_count += 1
                if state.ledger.percent >= 100.0:
                    state.full_coverage_reached = True
                record.percent_after = state.ledger.percent

                if config.verify_by_execution:
                    target, reason = _verification_target(snippet, corpus)
                    if target is None:
                        record.unverified_reason = reason
                    else:
                        try:
                            outcome = execute_with_input(
                                target, candidate.input_text, candidate.id, verifier_config
                            )
                            record.verification_outcome = outcome
                            record.verification_diff = diff_prediction(prediction, outcome)
                        except EnvironmentMissing as exc:
                            record.unverified_reason = str(exc)
                report.iterations.append(record)

        if config.max_iterations is not None and state.iteration >= config.max_iterations:
            report.status = SessionStatus.COMPLETED
            break
        if config.time_budget is not None and started is not None:
            if time.monotonic() - started >= config.time_budget:
                report.status = SessionStatus.TIME_BUDGET
                break

    return _finalize(report, state)
