"""Build a node's behavior profile from call events and smaps snapshots.

Also reads the two ingestion formats:

* call-trace log, one event per line, tab-separated
  ``<timestamp_ms> <kind> <callee> <signature> <line> <path>``
* smaps snapshot file, blank-line separated blocks of
  ``TS <timestamp_ms>`` followed by ``M <rss> <shared_clean> <shared_dirty>
  <private_clean> <private_dirty>`` lines (KiB)
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DetectionError, ParseError
from .profile import BehaviorProfile, CallRecord, MemorySample, hash_call_path
from .stats import hotelling_t2, pca

DEFAULT_INTERVAL_MS = 2000


class CallKind(str, Enum):
    SYSTEM = "system"
    LIBRARY = "library"


@dataclass(frozen=True, slots=True)
class CallEvent:
    timestamp_ms: int
    kind: CallKind
    callee: str
    signature: str
    line: int
    path: str


@dataclass(frozen=True, slots=True)
class SmapsMapping:
    rss_kib: int
    shared_clean_kib: int
    shared_dirty_kib: int
    private_clean_kib: int
    private_dirty_kib: int

    def __post_init__(self):
        if min(self.rss_kib, self.shared_clean_kib, self.shared_dirty_kib,
               self.private_clean_kib, self.private_dirty_kib) < 0:
            raise DetectionError("negative-size", repr(self))


@dataclass(frozen=True, slots=True)
class SmapsSnapshot:
    timestamp_ms: int
    mappings: tuple[SmapsMapping, ...] = ()

    def totals(self) -> MemorySample:
        rss = shared = private = 0
        for m in self.mappings:
            rss += m.rss_kib
            shared += m.shared_clean_kib + m.shared_dirty_kib
            private += m.private_clean_kib + m.private_dirty_kib
        return MemorySample(self.timestamp_ms, rss, shared, private)


class ProfileBuilder:
    """Single-writer accumulator for one process on one node."""

    def __init__(self, identifier: str, node_id: str, interval_ms: int = DEFAULT_INTERVAL_MS):
        if interval_ms <= 0:
            raise DetectionError("bad-interval", f"interval_ms must be positive, got {interval_ms}")
        self.identifier = identifier
        self.node_id = node_id
        self.interval_ms = interval_ms
        self._calls: dict[str, list] = {}
        self._key_cache: dict[str, str] = {}
        self._samples: list[MemorySample] = []
        self._last_seen: int | None = None
        self._last_accepted: int | None = None

    @property
    def samples(self) -> list[MemorySample]:
        return list(self._samples)

    def accumulate_call(self, event: CallEvent) -> "ProfileBuilder":
        CallKind(event.kind)  # only system and library calls are profiled
        key = self._key_cache.get(event.path)
        if key is None:
            key = self._key_cache[event.path] = hash_call_path(event.path)
        slot = self._calls.get(key)
        if slot is None:
            self._calls[key] = [event, 1]
        else:
            slot[1] += 1
        return self

    def call_table(self) -> dict[str, CallRecord]:
        # first event seen for a path supplies callee/signature/line
        return {
            key: CallRecord(ev.callee, ev.signature, ev.line, ev.path, count)
            for key, (ev, count) in self._calls.items()
        }

    def accumulate_memory(self, snap: SmapsSnapshot) -> "ProfileBuilder":
        ts = snap.timestamp_ms
        if self._last_seen is not None and ts < self._last_seen:
            raise DetectionError(
                "non-monotone-sample", f"timestamp {ts} after {self._last_seen} on {self.node_id}"
            )
        self._last_seen = ts
        if self._last_accepted is not None and ts - self._last_accepted < self.interval_ms:
            return self
        self._last_accepted = ts
        self._samples.append(snap.totals())
        return self

    def finalize(self) -> BehaviorProfile:
        n = len(self._samples)
        if n == 1:
            raise DetectionError("insufficient-observations", "PCA needs 0 or at least 2 memory samples")
        t2 = np.zeros(0)
        if n:
            matrix = np.array([s.as_row() for s in self._samples], dtype=float)
            t2 = hotelling_t2(pca(matrix))
        return BehaviorProfile(
            identifier=self.identifier,
            node_id=self.node_id,
            calls=self.call_table(),
            t_squared=t2,
            sample_count=n,
            interval_ms=self.interval_ms,
        )


def build_profile(
    identifier: str,
    node_id: str,
    events: Iterable[CallEvent],
    snapshots: Iterable[SmapsSnapshot],
    interval_ms: int = DEFAULT_INTERVAL_MS,
) -> BehaviorProfile:
    builder = ProfileBuilder(identifier, node_id, interval_ms)
    for ev in events:
        builder.accumulate_call(ev)
    for snap in snapshots:
        builder.accumulate_memory(snap)
    return builder.finalize()


# --- file formats ----------------------------------------------------------


def _read_lines(path) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}", source=str(path)) from None


def parse_call_log(lines: Iterable[str], source: str | None = None) -> list[CallEvent]:
    events = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise ParseError(f"expected 6 tab-separated fields, got {len(parts)}", lineno, source=source)
        ts, kind, callee, signature, src_line, path = parts
        try:
            events.append(CallEvent(int(ts), CallKind(kind), callee, signature, int(src_line), path))
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source=source) from None
        if not callee or not path:
            raise ParseError("callee and path must be non-empty", lineno, source=source)
    return events


def parse_smaps(lines: Iterable[str], source: str | None = None) -> list[SmapsSnapshot]:
    snapshots = []
    ts = None
    maps: list[SmapsMapping] = []

    def close():
        if ts is not None:
            snapshots.append(SmapsSnapshot(ts, tuple(maps)))

    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            if not text:
                close()
                ts, maps = None, []
            continue
        parts = text.split()
        if parts[0] == "TS":
            if ts is not None:
                raise ParseError("TS line inside an open block (missing blank line)", lineno, source=source)
            if len(parts) != 2:
                raise ParseError("expected 'TS <timestamp_ms>'", lineno, source=source)
            try:
                ts = int(parts[1])
            except ValueError:
                raise ParseError(f"bad timestamp {parts[1]!r}", lineno, source=source) from None
        elif parts[0] == "M":
            if ts is None:
                raise ParseError("mapping line before any TS line", lineno, source=source)
            if len(parts) != 6:
                raise ParseError("expected 'M <rss> <sc> <sd> <pc> <pd>'", lineno, source=source)
            try:
                maps.append(SmapsMapping(*(int(v) for v in parts[1:])))
            except DetectionError as exc:
                raise ParseError(str(exc), lineno, source=source) from None
            except ValueError:
                raise ParseError("mapping sizes must be integers", lineno, source=source) from None
        else:
            raise ParseError(f"unrecognised record {parts[0]!r}", lineno, source=source)
    close()
    return snapshots


def read_call_log(path) -> list[CallEvent]:
    return parse_call_log(_read_lines(path), source=str(path))


def read_smaps(path) -> list[SmapsSnapshot]:
    return parse_smaps(_read_lines(path), source=str(path))


def format_call_log(events: Iterable[CallEvent]) -> str:
    return "".join(
        f"{e.timestamp_ms}\t{CallKind(e.kind).value}\t{e.callee}\t{e.signature}\t{e.line}\t{e.path}\n"
        for e in events
    )


def format_smaps(snapshots: Iterable[SmapsSnapshot]) -> str:
    blocks = []
    for snap in snapshots:
        rows = [f"TS {snap.timestamp_ms}"]
        rows += [
            f"M {m.rss_kib} {m.shared_clean_kib} {m.shared_dirty_kib} "
            f"{m.private_clean_kib} {m.private_dirty_kib}"
            for m in snap.mappings
        ]
        blocks.append("\n".join(rows) + "\n")
    return "\n".join(blocks)
