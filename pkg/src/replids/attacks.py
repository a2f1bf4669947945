"""Insider-attack injectors and the JSON scenario descriptor.

Both injectors take the clean per-node streams (``{node_id: NodeStreams}``)
and return a new mapping in which only the target node differs.

Configuration tampering shrinks the datanode's heap-backed mappings and
the number of handler threads. Shrinking every mapping field by the same
factor is invisible to T-squared (a rescaled PCA), so the observable
memory symptom is the kernel reclaiming resident pages under the smaller
budget: rss now falls below shared + private by a fluctuating amount.

Exfiltration adds the device, compression and mail calls of copying files
off the node, and bumps shared memory while each file is in flight.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from .builder import CallEvent, CallKind, SmapsMapping, SmapsSnapshot
from .errors import DetectionError
from .workloads import LIBC, NodeStreams, WorkloadKind, node_rng

DEFAULT_HEAP_SCALE = 0.75
DEFAULT_THREAD_SCALE = 0.2
DEFAULT_FILE_SIZE_KIB = 4096
DEFAULT_BATCH = 12
DEFAULT_CHUNK_KIB = 64

MUTT = "/usr/bin/mutt"
ZIP = "/usr/bin/zip"
LIBZ = "/lib/x86_64-linux-gnu/libz.so.1.2.8"


class AttackKind(str, Enum):
    NONE = "none"
    CONFIG_MODIFICATION = "config_modification"
    DATA_EXFILTRATION = "data_exfiltration"


_PARAMS = {
    AttackKind.NONE: {},
    AttackKind.CONFIG_MODIFICATION: {"heap_scale": float, "thread_scale": float},
    AttackKind.DATA_EXFILTRATION: {"file_size_kib": int, "batch": int, "chunk_kib": int},
}


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind = AttackKind.NONE
    target_node: str | None = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        kind = AttackKind(self.kind)
        object.__setattr__(self, "kind", kind)
        allowed = _PARAMS[kind]
        params = dict(self.params)
        if kind is AttackKind.NONE:
            if params or self.target_node is not None:
                raise DetectionError("bad-scenario", "attack kind 'none' takes no target or params")
        elif not self.target_node:
            raise DetectionError("bad-scenario", f"{kind.value} needs a target node")
        for name, value in params.items():
            if name not in allowed:
                raise DetectionError("bad-scenario", f"unknown {kind.value} parameter {name!r}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise DetectionError("bad-scenario", f"parameter {name!r} must be a number")
            if allowed[name] is int and value != int(value):
                raise DetectionError("bad-scenario", f"parameter {name!r} must be an integer")
            params[name] = allowed[name](value)
        object.__setattr__(self, "params", MappingProxyType(params))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind.value}
        if self.target_node is not None:
            out["target"] = self.target_node
        if self.params:
            out["params"] = dict(self.params)
        return out


def _target(streams: Mapping[str, NodeStreams], node: str) -> NodeStreams:
    try:
        return streams[node]
    except KeyError:
        raise DetectionError("no-such-node", node) from None


def _with(streams: Mapping[str, NodeStreams], node: str, new: NodeStreams) -> dict[str, NodeStreams]:
    out = dict(streams)
    out[node] = new
    return out


def _scale(v: int, s: float) -> int:
    return int(round(v * s))


def _thin(items: list, keep: int) -> list:
    # evenly spaced survivors, first and last always kept
    if keep >= len(items):
        return items
    idx = np.linspace(0, len(items) - 1, keep).round().astype(int)
    return [items[i] for i in idx]


def inject_config_attack(
    streams: Mapping[str, NodeStreams],
    target: str,
    heap_scale: float = DEFAULT_HEAP_SCALE,
    thread_scale: float = DEFAULT_THREAD_SCALE,
    seed: int = 0,
) -> dict[str, NodeStreams]:
    """Shrink the target's memory budget and handler threads.

    Every mapping field is scaled by ``heap_scale``; rss additionally loses a
    half-normal amount of reclaimed pages whose scale is the lost share of
    the private working set. System calls on each path are thinned to
    ``thread_scale`` of their count (never below one, so the path set is
    kept); library calls are untouched.
    """
    if not (0.0 < heap_scale <= 1.0 and 0.0 < thread_scale <= 1.0):
        raise DetectionError("bad-scenario", "heap_scale and thread_scale must lie in (0, 1]")
    node = _target(streams, target)

    by_path: dict[str, list[int]] = {}
    for i, ev in enumerate(node.events):
        if ev.kind == CallKind.SYSTEM:
            by_path.setdefault(ev.path, []).append(i)
    drop: set[int] = set()
    if thread_scale < 1.0:
        for idx in by_path.values():
            keep = set(_thin(idx, max(1, _scale(len(idx), thread_scale))))
            drop.update(i for i in idx if i not in keep)
    kept = [ev for i, ev in enumerate(node.events) if i not in drop]

    snaps = node.snapshots
    if heap_scale < 1.0 and snaps:
        private = np.array([s.totals().private_kib for s in snaps], dtype=float)
        spread = (1.0 - heap_scale) * (private.std(ddof=1) if private.size > 1 else 0.0)
        reclaim = np.abs(node_rng(seed, target, "reclaim").normal(0.0, 1.0, len(snaps))) * spread
        snaps = tuple(_shrink(s, heap_scale, int(round(r))) for s, r in zip(snaps, reclaim))

    labels = node.labels + (f"config_modification(heap_scale={heap_scale}, thread_scale={thread_scale})",)
    return _with(streams, target, replace(node, events=tuple(kept), snapshots=snaps, labels=labels))


def _shrink(snap: SmapsSnapshot, s: float, reclaim: int) -> SmapsSnapshot:
    maps = []
    for i, m in enumerate(snap.mappings):
        sc, sd = _scale(m.shared_clean_kib, s), _scale(m.shared_dirty_kib, s)
        pc, pd = _scale(m.private_clean_kib, s), _scale(m.private_dirty_kib, s)
        rss = _scale(m.rss_kib, s)
        if i == 0:
            rss = max(0, rss - reclaim)
        maps.append(SmapsMapping(rss, sc, sd, pc, pd))
    return SmapsSnapshot(snap.timestamp_ms, tuple(maps))


# (path, callee, signature, kind, calls per file; "chunk" means once per chunk)
_EXFIL_SITES = (
    (f"{LIBC}!open", "mutt.attach", "open(const char*,int)", CallKind.SYSTEM, 1),
    (f"{LIBC}!ioctl", "mutt.attach", "ioctl(int,unsigned long)", CallKind.SYSTEM, 2),
    (f"{LIBC}!mmap", "zip.deflate_file", "mmap(void*,size_t,int,int,int,off_t)", CallKind.SYSTEM, 1),
    (f"{LIBC}!fcntl", "zip.deflate_file", "fcntl(int,int)", CallKind.SYSTEM, 1),
    (f"{LIBC}!poll", "mutt.smtp_send", "poll(struct pollfd*,nfds_t,int)", CallKind.SYSTEM, "chunk"),
    (f"{LIBC}!read", "zip.deflate_file", "read(int,void*,size_t)", CallKind.SYSTEM, "chunk"),
    (f"{LIBC}!write", "mutt.smtp_send", "write(int,const void*,size_t)", CallKind.SYSTEM, "chunk"),
    (f"{LIBC}!close", "mutt.attach", "close(int)", CallKind.SYSTEM, 1),
    (f"{LIBC}!sendto", "mutt.smtp_send", "sendto(int,const void*,size_t,int)", CallKind.SYSTEM, "chunk"),
    (f"{ZIP}!{LIBZ}!deflate", "zlib.deflate", "deflate(z_streamp,int)", CallKind.LIBRARY, "chunk"),
    (f"{MUTT}!mutt_send_message", "mutt.send", "mutt_send_message(HEADER*)", CallKind.LIBRARY, 1),
)


def exfil_paths() -> list[str]:
    return [site[0] for site in _EXFIL_SITES]


def inject_exfil_attack(
    streams: Mapping[str, NodeStreams],
    target: str,
    file_size_kib: int = DEFAULT_FILE_SIZE_KIB,
    batch: int = DEFAULT_BATCH,
    chunk_kib: int = DEFAULT_CHUNK_KIB,
    window_ms: int = 4000,
) -> dict[str, NodeStreams]:
    """Copy ``batch`` files of ``file_size_kib`` off the target by mail.

    Files go out one after another, evenly spread over the observed span.
    Each is read and deflated in ``chunk_kib`` pieces and sent over SMTP;
    shared memory (and rss) carries the file's pages for ``window_ms``.
    """
    if file_size_kib <= 0 or chunk_kib <= 0 or batch < 0:
        raise DetectionError("bad-scenario", "file_size_kib and chunk_kib must be positive, batch >= 0")
    node = _target(streams, target)
    if batch == 0:
        return dict(streams)

    stamps = [e.timestamp_ms for e in node.events] + [s.timestamp_ms for s in node.snapshots]
    span = (max(stamps) + 1) if stamps else batch * window_ms
    chunks = math.ceil(file_size_kib / chunk_kib)
    starts = [int(span * (i + 0.5) / batch) for i in range(batch)]

    added = []
    for start in starts:
        for path, callee, signature, kind, per_file in _EXFIL_SITES:
            n = chunks if per_file == "chunk" else per_file
            step = max(1, window_ms // max(n, 1))
            added.extend(CallEvent(start + (j * step) % window_ms, kind, callee, signature, 0, path) for j in range(n))
    events = tuple(sorted(node.events + tuple(added), key=lambda e: e.timestamp_ms))

    snaps = tuple(
        _bump(s, file_size_kib) if any(st <= s.timestamp_ms < st + window_ms for st in starts) else s
        for s in node.snapshots
    )
    labels = node.labels + (f"data_exfiltration(file_size_kib={file_size_kib}, batch={batch})",)
    return _with(streams, target, replace(node, events=events, snapshots=snaps, labels=labels))


def _bump(snap: SmapsSnapshot, kib: int) -> SmapsSnapshot:
    if not snap.mappings:
        return SmapsSnapshot(snap.timestamp_ms, (SmapsMapping(kib, kib, 0, 0, 0),))
    m = snap.mappings[-1]
    bumped = replace(m, rss_kib=m.rss_kib + kib, shared_clean_kib=m.shared_clean_kib + kib)
    return SmapsSnapshot(snap.timestamp_ms, snap.mappings[:-1] + (bumped,))


def apply_attack(streams: Mapping[str, NodeStreams], attack: AttackSpec, seed: int = 0) -> dict[str, NodeStreams]:
    if attack.kind is AttackKind.NONE:
        return dict(streams)
    if attack.kind is AttackKind.CONFIG_MODIFICATION:
        return inject_config_attack(streams, attack.target_node, seed=seed, **attack.params)
    return inject_exfil_attack(streams, attack.target_node, **attack.params)


@dataclass(frozen=True)
class Scenario:
    """What the cluster runs: one workload, optionally with one attack."""

    workload: WorkloadKind = WorkloadKind.IDLE
    attack: AttackSpec = field(default_factory=AttackSpec)
    duration_ms: int | None = None
    identifier: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "workload", WorkloadKind(self.workload))
        if self.duration_ms is not None and self.duration_ms <= 0:
            raise DetectionError("bad-scenario", "duration_ms must be positive")

    @property
    def job_id(self) -> str:
        return self.identifier or f"job-{self.workload.value}"

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"workload": self.workload.value, "attack": self.attack.to_dict()}
        if self.duration_ms is not None:
            out["duration_ms"] = self.duration_ms
        if self.identifier is not None:
            out["identifier"] = self.identifier
        return out


SCENARIO_KEYS = {"workload", "attack", "duration_ms", "identifier"}


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    if not isinstance(doc, Mapping):
        raise DetectionError("bad-scenario", "scenario must be a JSON object")
    try:
        raw = doc.get("attack") or {"kind": "none"}
        if not isinstance(raw, Mapping):
            raise DetectionError("bad-scenario", "attack must be an object")
        unknown = set(raw) - {"kind", "target", "params"}
        if unknown:
            raise DetectionError("bad-scenario", f"unknown attack keys {sorted(unknown)}")
        attack = AttackSpec(raw.get("kind", "none"), raw.get("target"), raw.get("params") or {})
        duration = doc.get("duration_ms")
        if duration is not None and (isinstance(duration, bool) or not isinstance(duration, int)):
            raise DetectionError("bad-scenario", "duration_ms must be an integer")
        return Scenario(doc.get("workload", "idle"), attack, duration, doc.get("identifier"))
    except ValueError as exc:
        if isinstance(exc, DetectionError):
            raise
        raise DetectionError("bad-scenario", str(exc)) from None


def load_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DetectionError("bad-scenario", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DetectionError("bad-scenario", f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise DetectionError("bad-scenario", f"{path}: top level must be an object")
    return doc
