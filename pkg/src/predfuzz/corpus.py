"""Target-snippet corpus: loading, validation, coverable-line analysis, completeness.

A corpus file is UTF-8 JSON Lines, one snippet record per line. Recognized
fields: ``id``, ``language``, ``source``, ``completeness``,
``ground_truth_errors``, ``companion_complete_id``. Unknown fields are
ignored so corpora can carry extra provenance.
"""

from __future__ import annotations

import ast
import builtins
import importlib.util
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional


class CorpusError(ValueError):
    """Raised for malformed corpus files or records."""


class Language(Enum):
    JAVA = "Java"
    PYTHON = "Python"


class Completeness(Enum):
    COMPLETE = "Complete"
    INCOMPLETE = "Incomplete"


_BUILTIN_NAMES = frozenset(dir(builtins)) | {"__name__", "__file__", "__doc__", "__builtins__"}

# Java lines carrying only structural punctuation are not executable.
_JAVA_PUNCT_ONLY = re.compile(r"^[{}()\[\];,]+$")
_JAVA_TYPE_DECL = re.compile(r"\b(class|interface|enum|record)\s+\w+")


@dataclass
class CodeSnippet:
    """A program under test, with its line inventory and optional labels."""

    id: str
    language: Language
    source: str
    completeness: Completeness
    coverable_lines: set[int] = field(default_factory=set)
    ground_truth_errors: Optional[set[str]] = None
    companion_complete_id: Optional[str] = None

    @property
    def lines(self) -> list[tuple[int, str]]:
        return list(enumerate(self.source.splitlines(), start=1))

    @property
    def line_count(self) -> int:
        return len(self.source.splitlines())

    @property
    def verifiable(self) -> bool:
        """Whether execution-based verification can run on this snippet."""
        if self.completeness is Completeness.COMPLETE:
            return True
        return self.companion_complete_id is not None

    def to_record(self) -> dict:
        rec: dict = {
            "id": self.id,
            "language": self.language.value,
            "source": self.source,
            "completeness": self.completeness.value,
        }
        if self.ground_truth_errors is not None:
            rec["ground_truth_errors"] = sorted(self.ground_truth_errors)
        if self.companion_complete_id is not None:
            rec["companion_complete_id"] = self.companion_complete_id
        return rec


@dataclass
class Corpus:
    name: str
    snippets: list[CodeSnippet] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.snippets)

    def __iter__(self):
        return iter(self.snippets)

    def get(self, snippet_id: str) -> CodeSnippet:
        for snip in self.snippets:
            if snip.id == snippet_id:
                return snip
        raise KeyError(snippet_id)

    def companion_of(self, snippet: CodeSnippet) -> Optional[CodeSnippet]:
        """Complete-version snippet used to verify an incomplete one, if any."""
        if snippet.completeness is Completeness.COMPLETE:
            return snippet
        if snippet.companion_complete_id is None:
            return None
        try:
            return self.get(snippet.companion_complete_id)
        except KeyError:
            return None


def compute_coverable_lines(source: str, language: Language) -> set[int]:
    """1-based indices of lines that plausibly execute.

    Excludes blank lines, comment-only lines, and (for Java) lines holding
    nothing but braces/punctuation. This is a prompt-side estimate; the
    execution tracer remains authoritative for oracle comparisons.
    """
    coverable: set[int] = set()
    in_block_comment = False
    for idx, raw in enumerate(source.splitlines(), start=1):
        text = raw.strip()
        if not text:
            continue
        if language is Language.PYTHON:
            if text.startswith("#"):
                continue
            coverable.add(idx)
            continue
        # Java
        if in_block_comment:
            if "*/" in text:
                in_block_comment = False
                text = text.split("*/", 1)[1].strip()
                if not text:
                    continue
            else:
                continue
        if text.startswith("//"):
            continue
        if text.startswith("/*"):
            if "*/" not in text:
                in_block_comment = True
                continue
            text = text.split("*/", 1)[1].strip()
            if not text:
                continue
        if _JAVA_PUNCT_ONLY.match(text):
            continue
        coverable.add(idx)
    return coverable


def _python_import_roots(tree: ast.AST) -> set[str]:
    roots: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                roots.add(alias.name.split(".")[0])
        elif isinstance(node, ast.ImportFrom):
            if node.module and node.level == 0:
                roots.add(node.module.split(".")[0])
    return roots


def _python_bound_names(tree: ast.AST) -> set[str]:
    bound: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and isinstance(node.ctx, (ast.Store, ast.Del)):
            bound.add(node.id)
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            bound.add(node.name)
        elif isinstance(node, ast.arg):
            bound.add(node.arg)
        elif isinstance(node, ast.alias):
            bound.add((node.asname or node.name).split(".")[0])
        elif isinstance(node, ast.ExceptHandler) and node.name:
            bound.add(node.name)
        elif isinstance(node, (ast.Global, ast.Nonlocal)):
            bound.update(node.names)
    return bound


def _module_resolvable(root: str) -> bool:
    try:
        return importlib.util.find_spec(root) is not None
    except (ImportError, ValueError, AttributeError):
        return False


def classify_completeness(source: str, language: Language) -> Completeness:
    """Incomplete when the snippet cannot stand alone as a compilation unit.

    Python: syntax failure, an unresolvable import at analysis time, or a
    loaded name with no binding anywhere in the unit. Java: no type
    declaration or unbalanced braces (a compiler-grade check is out of
    scope; supplied corpus labels win over this classifier anyway).
    """
    if not source.strip():
        raise ValueError("snippet source is empty")
    if language is Language.PYTHON:
        try:
            tree = ast.parse(source)
        except SyntaxError:
            return Completeness.INCOMPLETE
        for root in _python_import_roots(tree):
            if not _module_resolvable(root):
                return Completeness.INCOMPLETE
        bound = _python_bound_names(tree)
        for node in ast.walk(tree):
            if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Load):
                if node.id not in bound and node.id not in _BUILTIN_NAMES:
                    return Completeness.INCOMPLETE
        return Completeness.COMPLETE
    # Java
    if not _JAVA_TYPE_DECL.search(source):
        return Completeness.INCOMPLETE
    depth = 0
    for ch in source:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return Completeness.INCOMPLETE
    return Completeness.COMPLETE if depth == 0 else Completeness.INCOMPLETE


def _parse_language(value, index: int) -> Language:
    if isinstance(value, str):
        for lang in Language:
            if value.lower() == lang.value.lower():
                return lang
    raise CorpusError(f"record {index}: field 'language' must be one of Java/Python, got {value!r}")


def snippet_from_record(record: dict, index: int = 0) -> CodeSnippet:
    """Build and validate one CodeSnippet from a decoded corpus record."""
    if not isinstance(record, dict):
        raise CorpusError(f"record {index}: not an object")
    for name in ("id", "language", "source"):
        if name not in record:
            raise CorpusError(f"record {index}: missing field '{name}'")
    snippet_id = record["id"]
    if not isinstance(snippet_id, str) or not snippet_id:
        raise CorpusError(f"record {index}: field 'id' must be a non-empty string")
    language = _parse_language(record["language"], index)
    source = record["source"]
    if not isinstance(source, str) or not source.strip():
        raise CorpusError(f"record {index}: field 'source' must be non-empty text")

    supplied = record.get("completeness")
    if supplied is not None:
        try:
            completeness = Completeness(supplied)
        except ValueError:
            raise CorpusError(
                f"record {index}: field 'completeness' must be Complete/Incomplete, got {supplied!r}"
            ) from None
    else:
        completeness = classify_completeness(source, language)

    truth = record.get("ground_truth_errors")
    if truth is not None:
        if not isinstance(truth, (list, set, tuple)) or not all(isinstance(t, str) for t in truth):
            raise CorpusError(f"record {index}: field 'ground_truth_errors' must be a list of strings")
        truth = set(truth)

    companion = record.get("companion_complete_id")
    if companion is not None and not isinstance(companion, str):
        raise CorpusError(f"record {index}: field 'companion_complete_id' must be a string")

    return CodeSnippet(
        id=snippet_id,
        language=language,
        source=source,
        completeness=completeness,
        coverable_lines=compute_coverable_lines(source, language),
        ground_truth_errors=truth,
        companion_complete_id=companion,
    )


def load_corpus(path: str | Path, name: Optional[str] = None) -> Corpus:
    """Load a JSON Lines corpus file. Blank lines are skipped."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    corpus = Corpus(name=name or path.stem)
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for index, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"record {index}: invalid JSON ({exc.msg})") from None
            snippet = snippet_from_record(record, index)
            if snippet.id in seen:
                raise CorpusError(f"record {index}: duplicate id '{snippet.id}'")
            seen.add(snippet.id)
            corpus.snippets.append(snippet)
    return corpus


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for snippet in corpus.snippets:
            handle.write(json.dumps(snippet.to_record(), sort_keys=True) + "\n")


def snippets_by_completeness(corpus: Corpus) -> tuple[list[CodeSnippet], list[CodeSnippet]]:
    complete = [s for s in corpus if s.completeness is Completeness.COMPLETE]
    incomplete = [s for s in corpus if s.completeness is Completeness.INCOMPLETE]
    return complete, incomplete
