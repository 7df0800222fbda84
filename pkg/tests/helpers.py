"""Shared test builders: snippet factories, scripted sessions, micro suite."""

from __future__ import annotations

from pathlib import Path

from predfuzz.agents import AgentConfig, AgentRole, AgentSuite, ChatBackend, ScriptedBackend
from predfuzz.corpus import CodeSnippet, Completeness, Language, compute_coverable_lines

REPO_ROOT = Path(__file__).resolve().parent.parent
SHIM_SCRIPT = REPO_ROOT / "shim" / "src" / "predfuzz_shim" / "shim.py"


def make_snippet(source: str, snippet_id: str = "s1", language: Language = Language.PYTHON,
                 complete: bool = True, **kwargs) -> CodeSnippet:
    return CodeSnippet(
        id=snippet_id,
        language=language,
        source=source,
        completeness=Completeness.COMPLETE if complete else Completeness.INCOMPLETE,
        coverable_lines=compute_coverable_lines(source, language),
        **kwargs,
    )


# 14-line Java example used across prompt/predictor tests: the second loop
# condition (k+i) < n guards both array accesses, so input "5 6 / 1 2 3 4 5"
# never enters the loop body (lines 10-11) and exits cleanly.
JAVA_GUARDED_LOOP = """\
import java.util.*;
public class Main {
  public static void main(String[] args){
    Scanner sc = new Scanner(System.in);
    int n = sc.nextInt();
    int k = sc.nextInt();
    int as[] = new int[n];
    for (int i = 0; i < n; i++) as[i] = sc.nextInt();
    for (int i = 0; i < k && (k+i) < n; i++) {
      if (as[k+i] > as[i]) System.out.println("Yes");
      else System.out.println("No");
    }
  }
}"""


def java_guarded_loop_snippet() -> CodeSnippet:
    return make_snippet(JAVA_GUARDED_LOOP, snippet_id="java-guarded-loop", language=Language.JAVA)


class SpyBackend(ChatBackend):
    """Wraps a backend and records every (role, prompt) it serves."""

    def __init__(self, inner: ChatBackend):
        self.inner = inner
        self.prompts: list[tuple[AgentRole, str]] = []

    def complete(self, config: AgentConfig, prompt: str) -> str:
        self.prompts.append((config.role, prompt))
        return self.inner.complete(config, prompt)

    def prompts_for(self, role: AgentRole) -> list[str]:
        return [p for r, p in self.prompts if r is role]


def scripted_suite(tcg: list[str], pe: list[str]) -> tuple[AgentSuite, SpyBackend, ScriptedBackend]:
    scripted = ScriptedBackend({
        AgentRole.TEST_CASE_GENERATOR: tcg,
        AgentRole.PREDICTIVE_EXECUTOR: pe,
    })
    spy = SpyBackend(scripted)
    suite = AgentSuite(
        backend=spy,
        tcg=AgentConfig(AgentRole.TEST_CASE_GENERATOR, model_name="scripted-tcg"),
        pe=AgentConfig(AgentRole.PREDICTIVE_EXECUTOR, model_name="scripted-pe"),
    )
    return suite, spy, scripted


def tcg_response(*input_lines: str) -> str:
    return "Test Case Input:\n" + "\n".join(input_lines)


def pe_response(covered, errors="none", reasoning="traced the input step by step") -> str:
    covered_part = ", ".join(str(n) for n in sorted(covered))
    return (
        f"Covered Lines: {covered_part}\n"
        f"Runtime Errors: {errors}\n"
        f"Reasoning: {reasoning}"
    )


def wide_snippet(n_lines: int = 100, snippet_id: str = "wide") -> CodeSnippet:
    source = "\n".join(f"v{i} = {i}" for i in range(1, n_lines + 1))
    return make_snippet(source, snippet_id=snippet_id)


def golden_scripts() -> tuple[list[str], list[str]]:
    """8-iteration trajectory ending at 89% with two single-step plateaus
    (iterations 4->5 and 6->7) on a 100-coverable-line snippet."""
    targets = [12, 54, 55, 81, None, 83, None, 89]
    tcg = [tcg_response(f"{i} {i}") for i in range(1, 9)]
    pe = []
    reached = 0
    for index, target in enumerate(targets, start=1):
        if target is None:
            covered = range(1, max(reached - 10, 2))
        else:
            covered = range(1, target + 1)
            reached = target
        errors = {2: "ValueError", 4: "ZeroDivisionError (division by zero)"}.get(index, "none")
        pe.append(pe_response(covered, errors=errors))
    return tcg, pe


# (name, source, stdin payload, exit kind value, exception name, executed lines)
MICRO_PROGRAMS = [
    (
        "div-zero",
        "a = int(input())\nprint(10 // a)\n",
        "0\n",
        "uncaught_exception",
        "ZeroDivisionError",
        {1, 2},
    ),
    (
        "div-clean",
        "a = int(input())\nprint(10 // a)\n",
        "5\n",
        "clean_exit",
        None,
        {1, 2},
    ),
    (
        "index-oob",
        "parts = input().split()\nvalues = [int(p) for p in parts]\nprint(values[5])\n",
        "1 2 3\n",
        "uncaught_exception",
        "IndexError",
        {1, 2, 3},
    ),
    (
        "parse-failure",
        "text = input()\nprint(int(text))\n",
        "abc\n",
        "uncaught_exception",
        "ValueError",
        {1, 2},
    ),
    (
        "clean-branch",
        'n = int(input())\nif n > 0:\n    print("positive")\nelse:\n    print("negative")\n',
        "7\n",
        "clean_exit",
        None,
        {1, 2, 3},
    ),
    (
        "key-missing",
        'table = {"a": 1}\nkey = input()\nprint(table[key])\n',
        "zzz\n",
        "uncaught_exception",
        "KeyError",
        {1, 2, 3},
    ),
    (
        "none-plus-int",
        "value = None\ncount = int(input())\nprint(value + count)\n",
        "3\n",
        "uncaught_exception",
        "TypeError",
        {1, 2, 3},
    ),
    (
        "undefined-name",
        'n = int(input())\nif n > 0:\n    print(missing_name)\nelse:\n    print("neg")\n',
        "1\n",
        "uncaught_exception",
        "NameError",
        {1, 2, 3},
    ),
    (
        "eof-read",
        "line = input()\nprint(line)\n",
        "",
        "uncaught_exception",
        "EOFError",
        {1},
    ),
    (
        "attr-missing",
        "text = input()\nprint(text.push(1))\n",
        "hi\n",
        "uncaught_exception",
        "AttributeError",
        {1, 2},
    ),
    (
        "sysexit-clean",
        'import sys\nsys.exit(0)\nprint("no")\n',
        "\n",
        "clean_exit",
        None,
        {1, 2},
    ),
    (
        "loop-tail",
        "total = 0\nfor value in input().split():\n    total += int(value)\n"
        'if total > 100:\n    print("big")\nprint(total)\n',
        "1 2 3\n",
        "clean_exit",
        None,
        {1, 2, 3, 4, 6},
    ),
]

TIMEOUT_PROGRAM = ("busy-loop", "count = 0\nwhile True:\n    count += 1\n", "\n", {1, 2, 3})
