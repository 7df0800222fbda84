"""Tracer-shim contract: executed lines, exception capture, report discipline."""

from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path

SHIM = Path(__file__).resolve().parent.parent / "src" / "predfuzz_shim" / "shim.py"


def run_shim(tmp_path: Path, source: str, payload: str, timeout: float | None = None):
    target = tmp_path / "target.py"
    target.write_text(source, encoding="utf-8")
    stdin_file = tmp_path / "stdin.txt"
    stdin_file.write_text(payload, encoding="utf-8")
    report = tmp_path / "report.txt"
    proc = subprocess.Popen(
        [sys.executable, str(SHIM), str(target), str(stdin_file), str(report)],
        cwd=tmp_path, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    if timeout is None:
        out, err = proc.communicate()
        rc = proc.returncode
    else:
        try:
            out, err = proc.communicate(timeout=timeout)
            rc = proc.returncode
        except subprocess.TimeoutExpired:
            proc.terminate()
            out, err = proc.communicate(timeout=5)
            rc = proc.returncode
    return rc, out, err, report


def parse_report(report: Path):
    text = report.read_text(encoding="utf-8")
    assert text.endswith("\n")
    fields = dict(part.split("=", 1) for part in text.strip().split("|"))
    lines = {int(n) for n in fields["lines"].split(",") if n}
    return lines, fields["exception"], fields["kind"]


DIVISION = "a = int(input())\nprint(10 // a)\n"


class TestTraceRun:
    def test_exception_path(self, tmp_path):
        rc, _, _, report = run_shim(tmp_path, DIVISION, "0\n")
        assert rc == 1
        lines, exception, kind = parse_report(report)
        assert (lines, exception, kind) == ({1, 2}, "ZeroDivisionError", "exception")

    def test_clean_path(self, tmp_path):
        rc, out, _, report = run_shim(tmp_path, DIVISION, "5\n")
        assert rc == 0
        assert out.strip() == "2"
        assert parse_report(report) == ({1, 2}, "", "clean")

    def test_unexecuted_branch_absent(self, tmp_path):
        source = (
            "n = int(input())\n"
            "if n > 0:\n"
            "    print('pos')\n"
            "else:\n"
            "    print('neg')\n"
        )
        _, _, _, report = run_shim(tmp_path, source, "3\n")
        lines, _, _ = parse_report(report)
        assert lines == {1, 2, 3}

    def test_lines_within_physical_range(self, tmp_path):
        source = "import json\nprint(json.dumps([1, 2]))\n"
        _, _, _, report = run_shim(tmp_path, source, "\n")
        lines, _, _ = parse_report(report)
        assert lines <= {1, 2}

    def test_stdlib_lines_excluded(self, tmp_path):
        # json internals execute hundreds of lines; only target lines appear
        source = "import json\nvalue = json.loads('[1, 2, 3]')\nprint(len(value))\n"
        _, out, _, report = run_shim(tmp_path, source, "\n")
        lines, _, kind = parse_report(report)
        assert kind == "clean"
        assert out.strip() == "3"
        assert lines == {1, 2, 3}

    def test_sysexit_is_clean(self, tmp_path):
        rc, _, _, report = run_shim(tmp_path, "import sys\nsys.exit(0)\nprint('no')\n", "\n")
        assert rc == 0
        assert parse_report(report) == ({1, 2}, "", "clean")

    def test_syntax_error_reported_as_exception(self, tmp_path):
        rc, _, _, report = run_shim(tmp_path, "def broken(:\n", "\n")
        assert rc == 1
        lines, exception, kind = parse_report(report)
        assert (lines, exception, kind) == (set(), "SyntaxError", "exception")

    def test_unreadable_target_exits_2_no_report(self, tmp_path):
        stdin_file = tmp_path / "stdin.txt"
        stdin_file.write_text("", encoding="utf-8")
        report = tmp_path / "report.txt"
        proc = subprocess.run(
            [sys.executable, str(SHIM), str(tmp_path / "absent.py"), str(stdin_file), str(report)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
        assert "cannot read target" in proc.stderr
        assert not report.exists()

    def test_wrong_arity_usage(self, tmp_path):
        proc = subprocess.run([sys.executable, str(SHIM), "one"], capture_output=True, text=True)
        assert proc.returncode == 2
        assert "usage" in proc.stderr

    def test_sigterm_writes_timeout_report(self, tmp_path):
        source = "count = 0\nwhile True:\n    count += 1\n"
        rc, _, _, report = run_shim(tmp_path, source, "\n", timeout=1.5)
        assert rc == 124
        lines, exception, kind = parse_report(report)
        assert kind == "timeout-killed"
        assert exception == ""
        assert lines == {1, 2, 3}

    def test_exactly_one_report_line(self, tmp_path):
        _, _, _, report = run_shim(tmp_path, DIVISION, "0\n")
        content = report.read_text(encoding="utf-8")
        assert content.count("\n") == 1
        assert content.count("|") == 2

    def test_program_semantics_unaltered(self, tmp_path):
        source = "values = [int(x) for x in input().split()]\nprint(sum(values))\n"
        rc, out, _, _ = run_shim(tmp_path, source, "1 2 3 4\n")
        direct = subprocess.run(
            [sys.executable, "-c", source.replace("input()", "'1 2 3 4'")],
            capture_output=True, text=True,
        )
        assert rc == 0
        assert out == direct.stdout

    def test_exception_in_function_records_body_lines(self, tmp_path):
        source = (
            "def divide(n):\n"
            "    return 10 // n\n"
            "value = int(input())\n"
            "print(divide(value))\n"
        )
        rc, _, _, report = run_shim(tmp_path, source, "0\n")
        assert rc == 1
        lines, exception, _ = parse_report(report)
        assert exception == "ZeroDivisionError"
        assert lines == {1, 2, 3, 4}


MICRO_SUITE = [
    ("div-zero", "a = int(input())\nprint(10 // a)\n", "0\n", "ZeroDivisionError", {1, 2}),
    ("div-clean", "a = int(input())\nprint(10 // a)\n", "5\n", "", {1, 2}),
    ("index-oob",
     "parts = input().split()\nvalues = [int(p) for p in parts]\nprint(values[5])\n",
     "1 2 3\n", "IndexError", {1, 2, 3}),
    ("parse-failure", "text = input()\nprint(int(text))\n", "abc\n", "ValueError", {1, 2}),
    ("clean-branch",
     'n = int(input())\nif n > 0:\n    print("positive")\nelse:\n    print("negative")\n',
     "7\n", "", {1, 2, 3}),
    ("key-missing", 'table = {"a": 1}\nkey = input()\nprint(table[key])\n', "zzz\n",
     "KeyError", {1, 2, 3}),
    ("none-plus-int", "value = None\ncount = int(input())\nprint(value + count)\n", "3\n",
     "TypeError", {1, 2, 3}),
    ("undefined-name",
     'n = int(input())\nif n > 0:\n    print(missing_name)\nelse:\n    print("neg")\n',
     "1\n", "NameError", {1, 2, 3}),
    ("eof-read", "line = input()\nprint(line)\n", "", "EOFError", {1}),
    ("attr-missing", "text = input()\nprint(text.push(1))\n", "hi\n", "AttributeError", {1, 2}),
    ("sysexit-clean", 'import sys\nsys.exit(0)\nprint("no")\n', "\n", "", {1, 2}),
    ("loop-tail",
     "total = 0\nfor value in input().split():\n    total += int(value)\n"
     'if total > 100:\n    print("big")\nprint(total)\n',
     "1 2 3\n", "", {1, 2, 3, 4, 6}),
]


class TestA9AcceptanceShimContract:
    def test_a9_report_contract_on_micro_suite(self, tmp_path):
        started = time.monotonic()
        for index, (name, source, payload, exception, expected_lines) in enumerate(MICRO_SUITE):
            case_dir = tmp_path / f"case-{index}"
            case_dir.mkdir()
            rc, _, _, report = run_shim(case_dir, source, payload)
            lines, reported_exception, kind = parse_report(report)
            assert lines == expected_lines, name
            assert reported_exception == exception, name
            assert kind == ("exception" if exception else "clean"), name
            assert rc == (1 if exception else 0), name
            # written exactly once, including on exception paths
            assert report.read_text(encoding="utf-8").count("\n") == 1, name
        elapsed = time.monotonic() - started
        assert elapsed < 30.0
        print(f"\nACCEPTANCE A9 PASS: shim report contract on {len(MICRO_SUITE)} programs "
              f"({elapsed:.1f}s)")
