"""Exception types shared across the package.

Every failure carries a short machine-readable ``code`` (for example
``"empty-sample"`` or ``"bad-digest"``) so callers and the CLI can branch on
it without parsing messages.
"""

from __future__ import annotations


class DetectionError(ValueError):
    """Base error; ``code`` identifies the failure kind."""

    def __init__(self, code: str, message: str | None = None):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class ParseError(DetectionError):
    """Malformed input text. ``line`` is 1-based, ``offset`` is a column."""

    def __init__(
        self,
        message: str,
        line: int | None = None,
        offset: int | None = None,
        source: str | None = None,
        code: str = "parse-error",
    ):
        self.line = line
        self.offset = offset
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = ", ".join(where)
        super().__init__(code, f"{prefix}: {message}" if prefix else message)
