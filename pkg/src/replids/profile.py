"""Behavior profiles and the line-oriented exchange format (``BPv1``).

Wire format, UTF-8 text, one record per line::

    BPv1 <identifier> <node_id> <sample_count> <interval_ms>
    C\\t<digest>\\t<count>\\t<line>\\t<callee>\\t<signature>\\t<path>
    ...
    T <t2_1> <t2_2> ...

Call lines are tab-separated and sorted by ascending digest. T-squared
values use Python's shortest round-trip float repr, so parsing gives back
the exact doubles.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DetectionError, ParseError

FORMAT_TAG = "BPv1"
_DIGEST_RE = re.compile(r"[0-9a-f]{40}")
_FORBIDDEN = ("\t", "\n", "\r")


def hash_call_path(path: str) -> str:
    """SHA-1 of the call path's UTF-8 bytes as 40 lowercase hex chars."""
    if not path:
        raise DetectionError("empty-path")
    return hashlib.sha1(path.encode("utf-8")).hexdigest()


def _check_field(name: str, value: str, allow_empty: bool = False) -> None:
    if not allow_empty and not value:
        raise DetectionError(f"empty-{name}")
    if any(ch in value for ch in _FORBIDDEN):
        raise DetectionError("bad-field", f"{name} contains a tab or newline: {value!r}")


@dataclass(frozen=True, slots=True)
class CallRecord:
    callee: str
    signature: str
    line: int
    path: str
    count: int = 1

    def __post_init__(self):
        _check_field("callee", self.callee)
        _check_field("signature", self.signature, allow_empty=True)
        _check_field("path", self.path)
        if self.count < 1:
            raise DetectionError("bad-count", f"count must be >= 1, got {self.count}")
        if self.line < 0:
            raise DetectionError("bad-line", f"line must be >= 0, got {self.line}")

    @property
    def key(self) -> str:
        return hash_call_path(self.path)


@dataclass(frozen=True, slots=True)
class MemorySample:
    timestamp_ms: int
    rss_kib: int
    shared_kib: int
    private_kib: int

    def __post_init__(self):
        if min(self.rss_kib, self.shared_kib, self.private_kib) < 0:
            raise DetectionError("negative-size", repr(self))

    def as_row(self) -> tuple[int, int, int]:
        return (self.rss_kib, self.shared_kib, self.private_kib)


def _no_whitespace(name: str, value: str) -> None:
    if not value:
        raise DetectionError(f"empty-{name}")
    if any(ch.isspace() for ch in value):
        raise DetectionError("bad-field", f"{name} must not contain whitespace: {value!r}")


@dataclass(frozen=True)
class BehaviorProfile:
    """What one datanode knows about one task: call table plus T-squared signature.

    ``calls`` maps call-path digests to records. ``t_squared`` is empty for
    call-only profiles (``sample_count == 0``).
    """

    identifier: str
    node_id: str
    calls: Mapping[str, CallRecord] = field(default_factory=dict)
    t_squared: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sample_count: int = 0
    interval_ms: int = 2000

    def __post_init__(self):
        _no_whitespace("identifier", self.identifier)
        _no_whitespace("node_id", self.node_id)
        calls = dict(self.calls)
        for key, rec in calls.items():
            if not _DIGEST_RE.fullmatch(key):
                raise DetectionError("bad-digest", key)
            if key != rec.key:
                raise DetectionError("bad-digest", f"{key} does not hash {rec.path!r}")
        t2 = np.array(self.t_squared, dtype=float).ravel()
        t2.setflags(write=False)
        if t2.size and t2.size != self.sample_count:
            raise DetectionError(
                "bad-profile", f"t_squared has {t2.size} values but sample_count={self.sample_count}"
            )
        object.__setattr__(self, "calls", MappingProxyType(calls))
        object.__setattr__(self, "t_squared", t2)

    @property
    def total_calls(self) -> int:
        return sum(rec.count for rec in self.calls.values())

    @property
    def has_memory(self) -> bool:
        return self.t_squared.size > 0

    def __eq__(self, other):
        if not isinstance(other, BehaviorProfile):
            return NotImplemented
        return (
            self.identifier == other.identifier
            and self.node_id == other.node_id
            and self.sample_count == other.sample_count
            and self.interval_ms == other.interval_ms
            and dict(self.calls) == dict(other.calls)
            and np.array_equal(self.t_squared, other.t_squared)
        )

    __hash__ = None  # mutable-looking fields; compare by value only


def serialize_profile(profile: BehaviorProfile) -> bytes:
    lines = [
        f"{FORMAT_TAG} {profile.identifier} {profile.node_id} "
        f"{profile.sample_count} {profile.interval_ms}"
    ]
    for key in sorted(profile.calls):
        rec = profile.calls[key]
        lines.append(
            "\t".join(("C", key, str(rec.count), str(rec.line), rec.callee, rec.signature, rec.path))
        )
    lines.append(" ".join(["T", *(repr(float(v)) for v in profile.t_squared)]))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _int(text: str, lineno: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{what} is not an integer: {text!r}", line=lineno) from None


def deserialize_profile(data: bytes | str) -> BehaviorProfile:
    """Parse a ``BPv1`` document.

    Raises :class:`ParseError` with code ``parse-error`` on malformed or
    truncated input and ``bad-digest`` when a digest is malformed or does
    not match its path.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}", offset=exc.start) from None
    else:
        text = data
    if not text.endswith("\n"):
        raise ParseError("truncated document (missing final newline)", offset=len(text))
    lines = text[:-1].split("\n")

    head = lines[0].split(" ")
    if len(head) != 5 or head[0] != FORMAT_TAG:
        raise ParseError(f"expected '{FORMAT_TAG} <identifier> <node_id> <samples> <interval>'", line=1)
    identifier, node_id = head[1], head[2]
    sample_count = _int(head[3], 1, "sample_count")
    interval_ms = _int(head[4], 1, "interval_ms")

    calls: dict[str, CallRecord] = {}
    t2 = None
    for lineno, line in enumerate(lines[1:], start=2):
        if t2 is not None:
            raise ParseError("content after the T line", line=lineno)
        if line.startswith("C\t"):
            parts = line.split("\t")
            if len(parts) != 7:
                raise ParseError(f"call line needs 7 tab-separated fields, got {len(parts)}", line=lineno)
            _, key, count, src_line, callee, signature, path = parts
            if not _DIGEST_RE.fullmatch(key):
                raise ParseError(f"malformed digest {key!r}", line=lineno, offset=2, code="bad-digest")
            if key in calls:
                raise ParseError(f"duplicate digest {key}", line=lineno)
            try:
                rec = CallRecord(
                    callee=callee,
                    signature=signature,
                    line=_int(src_line, lineno, "line"),
                    path=path,
                    count=_int(count, lineno, "count"),
                )
            except ParseError:
                raise
            except DetectionError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if rec.key != key:
                raise ParseError(f"digest does not match path {path!r}", line=lineno, code="bad-digest")
            calls[key] = rec
        elif line == "T" or line.startswith("T "):
            values = []
            for tok in line.split(" ")[1:]:
                try:
                    v = float(tok)
                except ValueError:
                    raise ParseError(f"bad T-squared value {tok!r}", line=lineno) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite T-squared value {tok!r}", line=lineno)
                values.append(v)
            t2 = values
        else:
            raise ParseError(f"unrecognised record {line[:20]!r}", line=lineno)
    if t2 is None:
        raise ParseError("truncated document (missing T line)", line=len(lines))
    try:
        return BehaviorProfile(
            identifier=identifier,
            node_id=node_id,
            calls=calls,
            t_squared=np.array(t2, dtype=float),
            sample_count=sample_count,
            interval_ms=interval_ms,
        )
    except DetectionError as exc:
        raise ParseError(str(exc), line=1) from None


def profile_digest(profile: BehaviorProfile) -> str:
    """SHA-1 over the canonical serialization; identifies a profile in logs."""
    return hashlib.sha1(serialize_profile(profile)).hexdigest()
