"""Predictive-execution driver: prompt the PE agent and parse its answer.

The PE answer contract is three labeled sections::

    Covered Lines: 1, 2, 3
    Runtime Errors: ArithmeticException, or 'none'
    Reasoning: free text

Parsing is tolerant (headers located case-insensitively, prose before the
headers allowed) and never throws on arbitrary text; the worst case is a
Failed status with empty sets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .agents import AgentRole, AgentSuite
from .corpus import CodeSnippet, Language

if TYPE_CHECKING:
    from .prompts import PromptLibrary


class ParseStatus(Enum):
    OK = "ok"
    REPAIRED = "repaired"
    FAILED = "failed"


@dataclass
class ExecutionPrediction:
    test_id: int
    predicted_covered: set[int] = field(default_factory=set)
    predicted_errors: set[str] = field(default_factory=set)
    reasoning: str = ""
    parse_status: ParseStatus = ParseStatus.OK

    def to_dict(self) -> dict:
        return {
            "test_id": self.test_id,
            "predicted_covered": sorted(self.predicted_covered),
            "predicted_errors": sorted(self.predicted_errors),
            "reasoning": self.reasoning,
            "parse_status": self.parse_status.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExecutionPrediction":
        return cls(
            test_id=data["test_id"],
            predicted_covered=set(data["predicted_covered"]),
            predicted_errors=set(data["predicted_errors"]),
            reasoning=data["reasoning"],
            parse_status=ParseStatus(data["parse_status"]),
        )


# Cross-language equivalence table, kept for reporting only. Matching stays
# same-language exact; never applied during precision/recall computation.
EXCEPTION_EQUIVALENTS = {
    "ArithmeticException": "ZeroDivisionError",
    "ArrayIndexOutOfBoundsException": "IndexError",
    "IndexOutOfBoundsException": "IndexError",
    "StringIndexOutOfBoundsException": "IndexError",
    "NumberFormatException": "ValueError",
    "InputMismatchException": "ValueError",
    "NullPointerException": "TypeError",
    "NoSuchElementException": "EOFError",
    "NegativeArraySizeException": "ValueError",
    "ClassCastException": "TypeError",
    "UnsupportedOperationException": "TypeError",
    "StackOverflowError": "RecursionError",
    "OutOfMemoryError": "MemoryError",
}

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_$]*$")
_NONE_WORDS = {"none", "no", "n/a", "-", "nil", "null", "no errors", "no error", "no exceptions"}

# horizontal whitespace only after the colon; \s would eat the newline and
# swallow the next section when the inline value is empty
_COVERED_RE = re.compile(r"^[ \t>*#-]*covered[ \t]+lines?[ \t]*:[ \t]*(.*)$", re.IGNORECASE | re.MULTILINE)
_ERRORS_RE = re.compile(r"^[ \t>*#-]*runtime[ \t]+errors?[ \t]*:[ \t]*(.*)$", re.IGNORECASE | re.MULTILINE)
_REASONING_RE = re.compile(r"^[ \t>*#-]*reasoning[ \t]*:[ \t]*", re.IGNORECASE | re.MULTILINE)


def normalize_exception_name(raw: str, language: Optional[Language] = None) -> str:
    """Collapse a reported exception to its bare type name.

    Strips package/module qualifiers, trailing ':'-separated messages,
    parenthesized annotations, and quoting. Idempotent; unknown names pass
    through stripped. The language parameter is accepted for symmetry but
    the rules are shared.
    """
    del language
    name = raw.strip().strip("`'\"*")
    name = name.split(":", 1)[0]
    name = name.split("(", 1)[0]
    name = name.strip()
    if "." in name:
        name = name.rsplit(".", 1)[-1]
    return name.strip().strip("`'\"*").rstrip(".,;")


def _parse_error_names(text: str) -> set[str]:
    cleaned = text.strip()
    if not cleaned or cleaned.lower().strip(".") in _NONE_WORDS:
        return set()
    names: set[str] = set()
    for token in re.split(r"[,;\n]| and | or ", cleaned):
        candidate = normalize_exception_name(token)
        if candidate and candidate.lower() not in _NONE_WORDS and _IDENTIFIER.match(candidate):
            names.add(candidate)
    return names


def _collect_block(text: str, start: int) -> str:
    """Lines from start until the next recognized header or a blank line."""
    block = []
    for line in text[start:].splitlines():
        if not line.strip():
            break
        if _COVERED_RE.match(line) or _ERRORS_RE.match(line) or _REASONING_RE.match(line):
            break
        block.append(line)
    return "\n".join(block)


def parse_pe_response(text: str) -> tuple[set[int], set[str], str, ParseStatus]:
    """Extract (covered set, error names, reasoning, status) from PE text."""
    if not text or not text.strip():
        return set(), set(), "", ParseStatus.FAILED

    covered_match = _COVERED_RE.search(text)
    errors_match = _ERRORS_RE.search(text)
    if covered_match is None and errors_match is None:
        return set(), set(), "", ParseStatus.FAILED

    repaired = covered_match is None or errors_match is None

    covered: set[int] = set()
    if covered_match:
        inline = covered_match.group(1)
        if not re.search(r"\d", inline):
            # numbers on the following lines (bulleted list style)
            inline = _collect_block(text, covered_match.end())
            repaired = True
        covered = {int(n) for n in re.findall(r"\d+", inline)}

    errors: set[str] = set()
    if errors_match:
        inline = errors_match.group(1)
        errors = _parse_error_names(inline)
        if not errors and not inline.strip():
            block = _collect_block(text, errors_match.end())
            if block.strip():
                errors = _parse_error_names(block)
                repaired = True

    reasoning = ""
    reasoning_match = _REASONING_RE.search(text)
    if reasoning_match:
        reasoning = text[reasoning_match.end():].strip()
    else:
        repaired = True

    first = min(m.start() for m in (covered_match, errors_match) if m is not None)
    if text[:first].strip():
        repaired = True

    status = ParseStatus.REPAIRED if repaired else ParseStatus.OK
    return covered, errors, reasoning, status


def render_pe_response(covered: set[int], errors: set[str], reasoning: str) -> str:
    """Canonical PE answer text; parse(render(...)) recovers the inputs."""
    covered_part = ", ".join(str(n) for n in sorted(covered))
    errors_part = ", ".join(sorted(errors)) if errors else "none"
    return (
        f"Covered Lines: {covered_part}\n"
        f"Runtime Errors: {errors_part}\n"
        f"Reasoning: {reasoning}"
    )


PE_FORMAT_REMINDER = (
    "\n\nReminder: answer in exactly this format:\n"
    "Covered Lines: <comma-separated 1-based line numbers>\n"
    "Runtime Errors: <exception names, or 'none'>\n"
    "Reasoning: <your step by step reasoning>"
)


def predict_execution(
    agents: AgentSuite,
    snippet: CodeSnippet,
    test_id: int,
    test_input: str,
    prompts: "PromptLibrary",
    max_parse_retries: int = 2,
) -> ExecutionPrediction:
    """Ask the PE agent about one (snippet, test case) pair and parse it.

    On a Failed parse the call is retried with a format reminder appended,
    up to max_parse_retries times; a final failure yields an empty
    prediction with status Failed. Transport errors propagate.
    """
    prompt = prompts.build_pe_prompt(snippet, test_input)
    attempt_prompt = prompt
    for _ in range(max_parse_retries + 1):
        response = agents.complete(AgentRole.PREDICTIVE_EXECUTOR, attempt_prompt)
        covered, errors, reasoning, status = parse_pe_response(response)
        if status is not ParseStatus.FAILED:
            normalized = {normalize_exception_name(e, snippet.language) for e in errors}
            return ExecutionPrediction(
                test_id=test_id,
                predicted_covered=covered,
                predicted_errors={n for n in normalized if n},
                reasoning=reasoning,
                parse_status=status,
            )
        attempt_prompt = prompt + PE_FORMAT_REMINDER
    return ExecutionPrediction(test_id=test_id, parse_status=ParseStatus.FAILED)
