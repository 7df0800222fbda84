"""In-interpreter line tracer for a single target file.

Usage: shim <target_file> <input_file> <report_file>

Runs the target as __main__ with stdin redirected from the input file,
recording which physical lines of the target file execute. The report is
one LF-terminated line::

    lines=1,2,5|exception=ZeroDivisionError|kind=exception

kind is one of clean / exception / timeout-killed; exception carries the
outermost exception class name and is empty otherwise. Exit codes: 0 on a
clean run, 1 when the target raised, 2 when the target is unreadable (no
report is written), 124 when killed by SIGTERM (report still written).

The module is import-free beyond the stdlib and runnable as a plain
script, so callers can spawn it by file path without installing it.
"""

from __future__ import annotations

import os
import signal
import sys


def format_report(executed_lines, exception_name: str, kind: str) -> str:
    lines_part = ",".join(str(n) for n in sorted(executed_lines))
    return f"lines={lines_part}|exception={exception_name}|kind={kind}\n"


class _ReportWriter:
    """Writes the report file exactly once, whatever path ends the run."""

    def __init__(self, path: str):
        self.path = path
        self.written = False

    def write(self, executed_lines, exception_name: str, kind: str) -> None:
        if self.written:
            return
        self.written = True
        with open(self.path, "w", encoding="utf-8") as handle:
            handle.write(format_report(executed_lines, exception_name, kind))
            handle.flush()
            os.fsync(handle.fileno())


def run_traced(target_file: str, input_file: str, report_file: str) -> int:
    try:
        with open(target_file, "r", encoding="utf-8") as handle:
            source = handle.read()
    except OSError as exc:
        sys.stderr.write(f"shim: cannot read target: {exc}\n")
        return 2

    target_abs = os.path.abspath(target_file)
    executed: set[int] = set()
    writer = _ReportWriter(report_file)

    def handle_term(signum, frame):
        del signum, frame
        sys.settrace(None)
        writer.write(executed, "", "timeout-killed")
        os._exit(124)

    signal.signal(signal.SIGTERM, handle_term)

    def tracer(frame, event, arg):
        del arg
        if event == "line" and frame.f_code.co_filename == target_abs:
            executed.add(frame.f_lineno)
        return tracer

    # fd-level redirect so the target and any child reads see the input
    input_fd = os.open(input_file, os.O_RDONLY)
    os.dup2(input_fd, 0)
    os.close(input_fd)
    sys.stdin = os.fdopen(0, "r", encoding="utf-8", errors="replace", closefd=False)

    exception_name = ""
    kind = "clean"
    globals_dict = {
        "__name__": "__main__",
        "__file__": target_abs,
        "__builtins__": __builtins__,
    }
    try:
        code = compile(source, target_abs, "exec")
        sys.settrace(tracer)
        try:
            exec(code, globals_dict)
        finally:
            sys.settrace(None)
    except SystemExit:
        kind = "clean"
    except BaseException as exc:  # noqa: BLE001 - the exception IS the result
        exception_name = type(exc).__name__
        kind = "exception"

    writer.write(executed, exception_name, kind)
    return 1 if kind == "exception" else 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if len(argv) != 3:
        sys.stderr.write("usage: shim <target_file> <input_file> <report_file>\n")
        return 2
    return run_traced(argv[0], argv[1], argv[2])


if __name__ == "__main__":
    sys.exit(main())
