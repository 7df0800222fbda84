"""Prompt construction for both agent roles.

Three families: the dual-objective generation prompt (coverage + errors,
with ``!`` markers on uncovered lines), the error-only generation prompt,
and the predictive-execution prompt that demands a machine-parsable
three-section answer. A vanilla single-shot prompt backs the single-agent
baseline, and a plain generation prompt backs the no-feedback baseline.

Templates are plain text with ``{placeholder}`` slots substituted by
literal replacement (not str.format, so braces in program source are
safe). A config directory may override any template by file name.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Optional

from .corpus import CodeSnippet, Language

if TYPE_CHECKING:
    from .engine import CoverageLedger


class Phase(Enum):
    DUAL_OBJECTIVE = "dual_objective"
    ERROR_FOCUS = "error_focus"


class LineMarker(Enum):
    COVERED = "covered"
    UNCOVERED = "uncovered"
    NON_COVERABLE = "non_coverable"


@dataclass
class AnnotatedSource:
    """Numbered source where uncovered coverable lines carry a ``!`` marker."""

    lines: list[tuple[int, str, LineMarker]]

    def render(self) -> str:
        out = []
        for index, text, marker in self.lines:
            if marker is LineMarker.UNCOVERED:
                out.append(f"{index}: ! {text}")
            else:
                out.append(f"{index}: {text}")
        return "\n".join(out)

    @property
    def uncovered_count(self) -> int:
        return sum(1 for _, _, m in self.lines if m is LineMarker.UNCOVERED)


def annotate_uncovered(snippet: CodeSnippet, ledger: "CoverageLedger") -> AnnotatedSource:
    if ledger.snippet_id != snippet.id:
        raise ValueError(f"ledger belongs to '{ledger.snippet_id}', not '{snippet.id}'")
    lines = []
    for index, text in snippet.lines:
        if index not in snippet.coverable_lines:
            marker = LineMarker.NON_COVERABLE
        elif index in ledger.covered:
            marker = LineMarker.COVERED
        else:
            marker = LineMarker.UNCOVERED
        lines.append((index, text, marker))
    return AnnotatedSource(lines)


def numbered_source(snippet: CodeSnippet) -> str:
    return "\n".join(f"{index}: {text}" for index, text in snippet.lines)


# Shared output frame; the two generation phases must carry it verbatim so
# the transition between phases stays seamless for the generator model.
OUTPUT_FRAME = (
    "Ensure the test case input is in the following format:\n"
    "Test Case Input:\n"
    "<input 1>\n"
    "<input 2>..."
)

JAVA_ERROR_CATALOG = """\
InputMismatchException: Provide an input value that whose data type is different than the one specified.
ArithmeticException: Test cases that could raise arithmetic exceptions include division by zero, overflow, underflow, and attempts to perform invalid operations, e.g., taking the square root of a negative number.
NullPointerException: Create a scenario where a variable is explicitly set to null before usage.
NumberFormatException: A value that cannot be parsed to the expected data type, e.g., a non-numeric string.
ArrayIndexOutOfBoundsException or IndexOutOfBoundsException: Design input values leading to accessing array or list indices beyond their bounds.
(Other types of runtime errors and exceptions)"""

PYTHON_ERROR_CATALOG = """\
ValueError: Provide an input value whose data type is different than the one expected, e.g., a non-numeric string where a number is parsed.
ZeroDivisionError: Test cases that could raise arithmetic errors include division by zero and modulo by zero.
IndexError: Design input values leading to accessing list or string indices beyond their bounds.
TypeError: Create a scenario where an operation is applied to a value of an unsupported type, e.g., using None where a value is required.
NameError: Exercise paths that reference names which are never defined.
KeyError: Provide inputs leading to lookups of missing dictionary keys.
(Other types of runtime errors and exceptions)"""


PHASE1_TEMPLATE = """\
Generate a test case for a program to cover uncovered lines of code denoted by '!'. Provide only the test input without explanations. Consider various conditions, edge cases, and typical use cases, including boundary values (minimum, maximum), zero inputs, and both positive and negative cases.
While covering the uncovered lines, also try to raise the following scenarios in the {language} program:
{catalog}
{frame}
Generate a test case without any explanation for the below {language} program, where '!' denotes a line that is not yet covered:
{annotated_source}
"""

PHASE2_TEMPLATE = """\
Generate a test case without providing an explanation for to raise the following scenarios in a {language} program:
{catalog}
{frame}
Generate a test case without any explanation for the below {language} program:
{source}
"""

# No coverage annotation and no coverage wording: the no-feedback baseline
# must never see coverage state.
BASIC_TEMPLATE = """\
Generate a test case for the below program. Provide only the test input without explanations. Consider various conditions, edge cases, and typical use cases, including boundary values (minimum, maximum), zero inputs, and both positive and negative cases.
{frame}
Generate a test case without any explanation for the below {language} program:
{source}
"""

PE_TEMPLATE = """\
You are given a {language} program and one test case input. Simulate the execution of the program on this input step by step, without running it.
First develop a step by step reasoning based plan of the execution: which statements run, in what order, and with what values. Then decide which lines are executed and whether any unhandled runtime error or exception is raised, and explain why it occurs under this input.

{language} program (with line numbers):
{numbered_source}

Test Case Input:
{test_input}

Answer in exactly this format:
Covered Lines: <comma-separated 1-based line numbers>
Runtime Errors: <exception names, or 'none'>
Reasoning: <your step by step reasoning>
"""

VANILLA_TEMPLATE = """\
Given the following {language} program, List all the unique Runtime Exceptions that can be triggered in the program. Use the following format ...
Possible Runtime Exceptions -
<Runtime Exception 1>
<Runtime Exception 2>

{source}
"""

DEFAULT_TEMPLATES = {
    "phase1": PHASE1_TEMPLATE,
    "phase2": PHASE2_TEMPLATE,
    "basic": BASIC_TEMPLATE,
    "pe": PE_TEMPLATE,
    "vanilla": VANILLA_TEMPLATE,
}

FORMAT_REMINDER = (
    "\n\nReminder: respond with the test input only, in exactly this format:\n"
    "Test Case Input:\n<input 1>\n<input 2>..."
)


def error_catalog(language: Language) -> str:
    return JAVA_ERROR_CATALOG if language is Language.JAVA else PYTHON_ERROR_CATALOG


def _substitute(template: str, values: dict[str, str]) -> str:
    text = template
    for key, value in values.items():
        text = text.replace("{" + key + "}", value)
    return text


class PromptLibrary:
    """Template store; every builder is a pure function of its inputs."""

    def __init__(self, templates: Optional[dict[str, str]] = None):
        self.templates = dict(DEFAULT_TEMPLATES)
        if templates:
            self.templates.update(templates)

    @classmethod
    def from_dir(cls, directory: str | Path | None) -> "PromptLibrary":
        """Override defaults with ``<name>.txt`` files from a directory."""
        if directory is None:
            return cls()
        overrides = {}
        directory = Path(directory)
        for name in DEFAULT_TEMPLATES:
            candidate = directory / f"{name}.txt"
            if candidate.exists():
                overrides[name] = candidate.read_text(encoding="utf-8")
        return cls(overrides)

    def template_hashes(self) -> dict[str, str]:
        return {
            name: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for name, text in sorted(self.templates.items())
        }

    def build_phase1_prompt(self, annotated: AnnotatedSource, language: Language) -> str:
        return _substitute(
            self.templates["phase1"],
            {
                "language": language.value,
                "catalog": error_catalog(language),
                "frame": OUTPUT_FRAME,
                "annotated_source": annotated.render(),
            },
        )

    def build_phase2_prompt(self, snippet: CodeSnippet, language: Optional[Language] = None) -> str:
        language = language or snippet.language
        return _substitute(
            self.templates["phase2"],
            {
                "language": language.value,
                "catalog": error_catalog(language),
                "frame": OUTPUT_FRAME,
                "source": snippet.source,
            },
        )

    def build_basic_prompt(self, snippet: CodeSnippet) -> str:
        return _substitute(
            self.templates["basic"],
            {
                "language": snippet.language.value,
                "frame": OUTPUT_FRAME,
                "source": snippet.source,
            },
        )

    def build_pe_prompt(self, snippet: CodeSnippet, test_input: str) -> str:
        if not test_input:
            raise ValueError("test input is empty")
        return _substitute(
            self.templates["pe"],
            {
                "language": snippet.language.value,
                "numbered_source": numbered_source(snippet),
                "test_input": test_input,
            },
        )

    def build_vanilla_prompt(self, snippet: CodeSnippet) -> str:
        if not snippet.source.strip():
            raise ValueError("snippet source is empty")
        return _substitute(
            self.templates["vanilla"],
            {
                "language": snippet.language.value.upper(),
                "source": snippet.source,
            },
        )
