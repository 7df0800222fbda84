"""Execution-free, coverage-guided runtime-error detection.

Two model agents cooperate in a feedback loop: a test-case generator
produces stdin payloads, a predictive executor simulates each run to
predict covered lines and raised exceptions. A real execution oracle and
a metrics suite close the loop for evaluation.
"""

from .corpus import CodeSnippet, Completeness, Corpus, Language, load_corpus
from .engine import (
    Architecture,
    CoverageLedger,
    SessionConfig,
    TestCase,
    run_session,
)
from .metrics import (
    compute_confusion,
    compute_etr,
    compute_prf,
    plateau_stats,
    tests_to_next_unique_error,
)
from .predictor import ExecutionPrediction, normalize_exception_name, parse_pe_response
from .prompts import Phase, PromptLibrary
from .reports import BatchReport, SessionReport, emit_plateau_csv
from .verifier import ActualOutcome, diff_prediction, execute_with_input

__version__ = "0.1.0"

__all__ = [
    "ActualOutcome",
    "Architecture",
    "BatchReport",
    "CodeSnippet",
    "Completeness",
    "Corpus",
    "CoverageLedger",
    "ExecutionPrediction",
    "Language",
    "Phase",
    "PromptLibrary",
    "SessionConfig",
    "SessionReport",
    "TestCase",
    "compute_confusion",
    "compute_etr",
    "compute_prf",
    "diff_prediction",
    "emit_plateau_csv",
    "execute_with_input",
    "load_corpus",
    "normalize_exception_name",
    "parse_pe_response",
    "plateau_stats",
    "run_session",
    "tests_to_next_unique_error",
]
