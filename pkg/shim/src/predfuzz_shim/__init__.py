from .shim import format_report, main, run_traced

__all__ = ["format_report", "main", "run_traced"]
