"""Diagnostic records shared by every pipeline stage.

Problems are accumulated and reported, never raised across stage boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: tuple[int, int] = (0, 0)

    def format(self, filename: str = "<input>") -> str:
        start, end = self.span
        return f"{self.severity} {self.code} {filename}:{start}-{end} {self.message}"


def has_errors(diagnostics) -> bool:
    return any(d.severity == ERROR for d in diagnostics)
