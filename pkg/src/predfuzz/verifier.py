"""Execution oracle: run a complete program on a generated input and diff
the actual outcome against the agent's prediction.

Python targets run under the external tracer shim (a separate package,
spoken to purely through its command line and one-line report format) so
executed lines come back alongside the uncaught exception, if any. Java
targets compile and run; only the exception is observed unless a coverage
agent is configured, which the first milestone does not ship.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .corpus import CodeSnippet, Completeness, Language
from .predictor import ExecutionPrediction, normalize_exception_name

SHIM_ENV_VAR = "PREDFUZZ_SHIM"
SHIM_SCRIPT_NAME = "predfuzz-shim"


class EnvironmentMissing(RuntimeError):
    """A required interpreter, compiler, or the tracer shim is absent."""


class ExitKind(Enum):
    CLEAN_EXIT = "clean_exit"
    UNCAUGHT_EXCEPTION = "uncaught_exception"
    TIMEOUT = "timeout"
    BUILD_FAILURE = "build_failure"


class ErrorMatch(Enum):
    BOTH_NONE = "both_none"
    MATCH = "match"
    PREDICTED_ONLY = "predicted_only"
    ACTUAL_ONLY = "actual_only"
    MISMATCH = "mismatch"


@dataclass
class ActualOutcome:
    test_id: int
    exit_kind: ExitKind
    exception_name: Optional[str] = None
    executed_lines: set[int] = field(default_factory=set)
    stderr_tail: str = ""
    wall_time: float = 0.0

    def __post_init__(self):
        if (self.exception_name is not None) != (self.exit_kind is ExitKind.UNCAUGHT_EXCEPTION):
            raise ValueError("exception_name present iff exit_kind is UNCAUGHT_EXCEPTION")

    def to_dict(self) -> dict:
        return {
            "test_id": self.test_id,
            "exit_kind": self.exit_kind.value,
            "exception_name": self.exception_name,
            "executed_lines": sorted(self.executed_lines),
            "stderr_tail": self.stderr_tail,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ActualOutcome":
        return cls(
            test_id=data["test_id"],
            exit_kind=ExitKind(data["exit_kind"]),
            exception_name=data["exception_name"],
            executed_lines=set(data["executed_lines"]),
            stderr_tail=data["stderr_tail"],
            wall_time=data["wall_time"],
        )


@dataclass
class PredictionDiff:
    coverage_overlap: float
    error_match: ErrorMatch

    def to_dict(self) -> dict:
        return {"coverage_overlap": self.coverage_overlap, "error_match": self.error_match.value}

    @classmethod
    def from_dict(cls, data: dict) -> "PredictionDiff":
        return cls(coverage_overlap=data["coverage_overlap"], error_match=ErrorMatch(data["error_match"]))


@dataclass
class VerifierConfig:
    timeout: float = 10.0
    max_output_bytes: int = 65536
    shim_command: Optional[list[str]] = None
    pool_size: int = 4
    network_isolation: bool = True


_netns_supported: Optional[bool] = None


def network_isolation_available() -> bool:
    """Whether targets can run inside an empty network namespace."""
    global _netns_supported
    if _netns_supported is None:
        unshare = shutil.which("unshare")
        if unshare is None:
            _netns_supported = False
        else:
            try:
                probe = subprocess.run(
                    [unshare, "-n", "true"], capture_output=True, timeout=10
                )
                _netns_supported = probe.returncode == 0
            except (OSError, subprocess.SubprocessError):
                _netns_supported = False
    return _netns_supported


def _isolation_prefix(config: VerifierConfig) -> list[str]:
    if config.network_isolation and network_isolation_available():
        return [shutil.which("unshare"), "-n"]
    return []


def resolve_shim_command(config: Optional[VerifierConfig] = None) -> list[str]:
    """Locate the tracer shim: explicit config, then the environment
    variable, then a console script on PATH."""
    if config is not None and config.shim_command:
        return list(config.shim_command)
    env_path = os.environ.get(SHIM_ENV_VAR, "").strip()
    if env_path:
        if env_path.endswith(".py"):
            return [sys.executable, env_path]
        return [env_path]
    script = shutil.which(SHIM_SCRIPT_NAME)
    if script:
        return [script]
    raise EnvironmentMissing(
        f"tracer shim not found: set {SHIM_ENV_VAR} or install '{SHIM_SCRIPT_NAME}' on PATH"
    )


def parse_shim_report(text: str) -> tuple[set[int], str, str]:
    """Decode the shim's single-line report: (lines, exception, kind)."""
    fields = {}
    for part in text.strip().split("|"):
        if "=" not in part:
            raise ValueError(f"malformed shim report field: {part!r}")
        key, value = part.split("=", 1)
        fields[key] = value
    for required in ("lines", "exception", "kind"):
        if required not in fields:
            raise ValueError(f"shim report missing field '{required}': {text!r}")
    lines = {int(n) for n in fields["lines"].split(",") if n.strip()}
    return lines, fields["exception"], fields["kind"]


_JAVA_TRACE_RE = re.compile(
    r'Exception in thread "[^"]*"\s+([\w.$]+)|^([\w.$]*(?:Exception|Error))(?::|$)', re.MULTILINE
)


def parse_java_exception(stderr: str) -> Optional[str]:
    """Exception type from the first stack-trace line of a Java run."""
    match = _JAVA_TRACE_RE.search(stderr)
    if not match:
        return None
    raw = match.group(1) or match.group(2)
    return normalize_exception_name(raw, Language.JAVA)


def _read_tail(path: Path, limit: int) -> str:
    try:
        size = path.stat().st_size
        with path.open("rb") as handle:
            if size > limit:
                handle.seek(size - limit)
            return handle.read().decode("utf-8", errors="replace")
    except OSError:
        return ""


def _run_with_timeout(command: list[str], cwd: Path, timeout: float, out_path: Path, err_path: Path,
                      stdin_path: Optional[Path] = None) -> tuple[Optional[int], bool]:
    """Run command; on timeout terminate then kill. Returns (rc, timed_out)."""
    stdin_handle = stdin_path.open("rb") if stdin_path else subprocess.DEVNULL
    try:
        with out_path.open("wb") as out, err_path.open("wb") as err:
            proc = subprocess.Popen(
                command, cwd=str(cwd), stdin=stdin_handle, stdout=out, stderr=err,
                start_new_session=True,
            )
            try:
                rc = proc.wait(timeout=timeout)
                return rc, False
            except subprocess.TimeoutExpired:
                proc.terminate()
                try:
                    proc.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    proc.kill()
                    proc.wait()
                return None, True
    finally:
        if stdin_path:
            stdin_handle.close()


def _execute_python(snippet: CodeSnippet, input_text: str, test_id: int,
                    config: VerifierConfig) -> ActualOutcome:
    shim = resolve_shim_command(config)
    started = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="predfuzz-run-") as tmp:
        workdir = Path(tmp)
        target = workdir / "target.py"
        stdin_file = workdir / "input.txt"
        report_file = workdir / "report.txt"
        out_path = workdir / "stdout.log"
        err_path = workdir / "stderr.log"
        target.write_text(snippet.source, encoding="utf-8")
        stdin_file.write_text(input_text, encoding="utf-8")

        rc, timed_out = _run_with_timeout(
            _isolation_prefix(config) + shim + [str(target), str(stdin_file), str(report_file)],
            cwd=workdir, timeout=config.timeout, out_path=out_path, err_path=err_path,
        )
        wall = time.monotonic() - started
        stderr_tail = _read_tail(err_path, config.max_output_bytes)

        lines: set[int] = set()
        exception = ""
        kind = ""
        if report_file.exists():
            try:
                lines, exception, kind = parse_shim_report(report_file.read_text(encoding="utf-8"))
            except ValueError:
                lines, exception, kind = set(), "", ""

        if timed_out or kind == "timeout-killed":
            return ActualOutcome(test_id, ExitKind.TIMEOUT, None, lines, stderr_tail, wall)
        if kind == "exception":
            name = normalize_exception_name(exception, Language.PYTHON)
            return ActualOutcome(test_id, ExitKind.UNCAUGHT_EXCEPTION, name, lines, stderr_tail, wall)
        if kind == "clean":
            return ActualOutcome(test_id, ExitKind.CLEAN_EXIT, None, lines, stderr_tail, wall)
        # no usable report: the shim itself failed (rc 2 = unreadable target)
        if rc == 2:
            raise EnvironmentMissing(f"tracer shim rejected the target: {stderr_tail[-500:]}")
        return ActualOutcome(test_id, ExitKind.BUILD_FAILURE, None, lines, stderr_tail, wall)


_JAVA_PUBLIC_CLASS_RE = re.compile(r"\bpublic\s+(?:final\s+|abstract\s+)?class\s+(\w+)")
_JAVA_CLASS_RE = re.compile(r"\bclass\s+(\w+)")


def java_main_class(source: str) -> str:
    match = _JAVA_PUBLIC_CLASS_RE.search(source) or _JAVA_CLASS_RE.search(source)
    return match.group(1) if match else "Main"


def _execute_java(snippet: CodeSnippet, input_text: str, test_id: int,
                  config: VerifierConfig) -> ActualOutcome:
    javac = shutil.which("javac")
    java = shutil.which("java")
    if not javac or not java:
        raise EnvironmentMissing("javac/java not found on PATH")
    started = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="predfuzz-run-") as tmp:
        workdir = Path(tmp)
        class_name = java_main_class(snippet.source)
        (workdir / f"{class_name}.java").write_text(snippet.source, encoding="utf-8")
        stdin_file = workdir / "input.txt"
        stdin_file.write_text(input_text, encoding="utf-8")
        out_path = workdir / "stdout.log"
        err_path = workdir / "stderr.log"

        rc, timed_out = _run_with_timeout(
            [javac, f"{class_name}.java"], cwd=workdir, timeout=max(config.timeout, 30.0),
            out_path=out_path, err_path=err_path,
        )
        if timed_out or rc != 0:
            wall = time.monotonic() - started
            return ActualOutcome(
                test_id, ExitKind.BUILD_FAILURE, None, set(),
                _read_tail(err_path, config.max_output_bytes), wall,
            )

        rc, timed_out = _run_with_timeout(
            _isolation_prefix(config) + [java, "-cp", ".", class_name],
            cwd=workdir, timeout=config.timeout,
            out_path=out_path, err_path=err_path, stdin_path=stdin_file,
        )
        wall = time.monotonic() - started
        stderr_tail = _read_tail(err_path, config.max_output_bytes)
        if timed_out:
            return ActualOutcome(test_id, ExitKind.TIMEOUT, None, set(), stderr_tail, wall)
        if rc != 0:
            name = parse_java_exception(stderr_tail)
            if name:
                return ActualOutcome(
                    test_id, ExitKind.UNCAUGHT_EXCEPTION, name, set(), stderr_tail, wall
                )
        return ActualOutcome(test_id, ExitKind.CLEAN_EXIT, None, set(), stderr_tail, wall)


def execute_with_input(
    snippet: CodeSnippet,
    input_text: str,
    test_id: int = 0,
    config: Optional[VerifierConfig] = None,
) -> ActualOutcome:
    """Run a complete snippet on one stdin payload in an isolated workdir."""
    if snippet.completeness is not Completeness.COMPLETE:
        raise ValueError(
            f"snippet '{snippet.id}' is incomplete; resolve companion_complete_id before executing"
        )
    config = config or VerifierConfig()
    if snippet.language is Language.PYTHON:
        return _execute_python(snippet, input_text, test_id, config)
    return _execute_java(snippet, input_text, test_id, config)


def diff_prediction(prediction: ExecutionPrediction, actual: ActualOutcome) -> PredictionDiff:
    """Jaccard coverage overlap plus categorical error agreement."""
    if prediction.test_id != actual.test_id:
        raise ValueError(f"test id mismatch: {prediction.test_id} vs {actual.test_id}")
    union = prediction.predicted_covered | actual.executed_lines
    if not union:
        overlap = 1.0
    else:
        overlap = len(prediction.predicted_covered & actual.executed_lines) / len(union)

    predicted = prediction.predicted_errors
    actual_name = actual.exception_name if actual.exit_kind is ExitKind.UNCAUGHT_EXCEPTION else None
    if not predicted and actual_name is None:
        match = ErrorMatch.BOTH_NONE
    elif predicted and actual_name is None:
        match = ErrorMatch.PREDICTED_ONLY
    elif not predicted and actual_name is not None:
        match = ErrorMatch.ACTUAL_ONLY
    elif actual_name in predicted:
        match = ErrorMatch.MATCH
    else:
        match = ErrorMatch.MISMATCH
    return PredictionDiff(coverage_overlap=overlap, error_match=match)
