"""Synthetic per-node call traces and smaps snapshots for Hadoop-like workloads.

Memory model
------------
Shared and private resident sizes follow task-wave oscillations (one
sinusoid each, node-specific phase, incommensurate with the sampling
cadence) plus a little Gaussian jitter. Rss is the exact sum of the four
shared/private fields of every mapping, as the kernel accounts it, so a
healthy node's (rss, shared, private) samples span two dimensions and its
T-squared values come from a two-component PCA.

The catalogue constants below are calibration fixtures: they make clean
replicas statistically indistinguishable at the default test levels. They
are not measurements.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .builder import CallEvent, CallKind, SmapsMapping, SmapsSnapshot
from .errors import DetectionError

DEFAULT_INTERVAL_MS = 2000
DEFAULT_JITTER = 0.1

LIBC = "/lib/x86_64-linux-gnu/libc-2.19.so"
JRE = "/usr/lib/jvm/java-8-openjdk-amd64/jre/lib/amd64"
HADOOP = "/usr/local/hadoop/share/hadoop"
HDFS_JAR = f"{HADOOP}/hdfs/hadoop-hdfs-2.7.1.jar"
COMMON_JAR = f"{HADOOP}/common/hadoop-common-2.7.1.jar"
MR_JAR = f"{HADOOP}/mapreduce/hadoop-mapreduce-client-core-2.7.1.jar"
EXAMPLES_JAR = f"{HADOOP}/mapreduce/hadoop-mapreduce-examples-2.7.1.jar"


class WorkloadKind(str, Enum):
    IDLE = "idle"
    TERAGEN = "teragen"
    TERASORT = "terasort"
    RANDOM_TEXT_WRITER = "random_text_writer"
    AGGREGATE_WORD_COUNT = "aggregate_word_count"


@dataclass(frozen=True)
class CallSite:
    """One distinct call made by the datanode process; ``count`` is per run."""

    callee: str
    signature: str
    line: int
    path: str
    kind: CallKind
    count: int


def _jar_method(jar: str, cls: str, signature: str) -> str:
    return f"{jar}!/{cls.replace('.', '/')}.class!{signature.split('(', 1)[0]}"


def _sys(lib: str, name: str, callee: str, signature: str, count: int) -> CallSite:
    return CallSite(callee, signature, 0, f"{lib}!{name}", CallKind.SYSTEM, count)


def _lib(jar: str, callee: str, signature: str, line: int, count: int) -> CallSite:
    return CallSite(callee, signature, line, _jar_method(jar, callee, signature), CallKind.LIBRARY, count)


# datanode housekeeping with no job running: 275 calls per 120 s window
IDLE_SITES = (
    _sys(f"{JRE}/libnio.so", "epoll_wait", "sun.nio.ch.EPollArrayWrapper", "epollWait(JIIJ)I", 60),
    _sys(LIBC, "futex", "java.lang.Object", "wait(J)V", 48),
    _sys(f"{JRE}/libnio.so", "read", "sun.nio.ch.FileDispatcherImpl", "read0(Ljava/io/FileDescriptor;JI)I", 30),
    _sys(f"{JRE}/libnio.so", "write", "sun.nio.ch.FileDispatcherImpl", "write0(Ljava/io/FileDescriptor;JI)I", 30),
    _sys(LIBC, "clock_gettime", "java.lang.System", "nanoTime()J", 40),
    _sys(f"{JRE}/libjava.so", "stat", "java.io.UnixFileSystem", "getBooleanAttributes0(Ljava/io/File;)I", 12),
    _lib(HDFS_JAR, "org.apache.hadoop.hdfs.server.datanode.BPServiceActor",
         "sendHeartBeat()Lorg/apache/hadoop/hdfs/server/protocol/HeartbeatResponse;", 553, 20),
    _lib(COMMON_JAR, "org.apache.hadoop.ipc.Client",
         "call(Lorg/apache/hadoop/ipc/RPC$RpcKind;Lorg/apache/hadoop/io/Writable;)Lorg/apache/hadoop/io/Writable;",
         1476, 20),
    _lib(HDFS_JAR, "org.apache.hadoop.hdfs.server.datanode.DirectoryScanner", "scan()V", 478, 10),
    _lib(HDFS_JAR, "org.apache.hadoop.hdfs.server.datanode.fsdataset.impl.FsVolumeImpl", "getDfsUsed()J", 299, 5),
)
IDLE_WINDOW_MS = 120_000

_WRITE_PATH = (
    _lib(HDFS_JAR, "org.apache.hadoop.hdfs.server.datanode.DataXceiver",
         "writeBlock(Lorg/apache/hadoop/hdfs/protocol/ExtendedBlock;)V", 664, 1),
    _lib(HDFS_JAR, "org.apache.hadoop.hdfs.server.datanode.BlockReceiver", "receivePacket()I", 502, 1),
    _sys(LIBC, "fdatasync", "sun.nio.ch.FileDispatcherImpl", "force0(Ljava/io/FileDescriptor;Z)I", 1),
)
_READ_PATH = (
    _lib(HDFS_JAR, "org.apache.hadoop.hdfs.server.datanode.DataXceiver",
         "readBlock(Lorg/apache/hadoop/hdfs/protocol/ExtendedBlock;)V", 536, 1),
    _lib(HDFS_JAR, "org.apache.hadoop.hdfs.server.datanode.BlockSender", "sendPacket(Ljava/nio/ByteBuffer;I)I", 577, 1),
    _sys(f"{JRE}/libnio.so", "sendfile", "sun.nio.ch.FileChannelImpl", "transferTo0(Ljava/io/FileDescriptor;JJLjava/io/FileDescriptor;)J", 1),
)
_TASK_PATH = (
    _lib(MR_JAR, "org.apache.hadoop.mapred.MapTask", "runNewMapper(Lorg/apache/hadoop/mapred/JobConf;)V", 784, 1),
    _sys(LIBC, "mmap", "sun.nio.ch.FileChannelImpl", "map0(IJJ)J", 1),
    _sys(LIBC, "clone", "java.lang.Thread", "start0()V", 1),
)


def _scaled(sites, counts) -> tuple[CallSite, ...]:
    return tuple(replace(s, count=c) for s, c in zip(sites, counts))


@dataclass(frozen=True)
class MemoryModel:
    """Mean and standard deviation (KiB) of the shared and private totals.

    Each oscillates with its own period; ``jitter`` is the Gaussian noise
    standard deviation as a fraction of the oscillation's.
    """

    shared_mean: float
    shared_std: float
    private_mean: float
    private_std: float
    shared_period_ms: float
    private_period_ms: float
    jitter: float = 0.1


@dataclass(frozen=True)
class WorkloadSpec:
    kind: WorkloadKind
    duration_ms: int
    sites: tuple[CallSite, ...]
    memory: MemoryModel
    data_size_bytes: int = 0

    @property
    def base_call_paths(self) -> list[str]:
        return [s.path for s in self.sites]

    def with_duration(self, duration_ms: int) -> "WorkloadSpec":
        factor = duration_ms / self.duration_ms
        sites = tuple(replace(s, count=max(1, round(s.count * factor))) for s in self.sites)
        return replace(self, duration_ms=duration_ms, sites=sites)


def _housekeeping(duration_ms: int) -> tuple[CallSite, ...]:
    f = duration_ms / IDLE_WINDOW_MS
    return tuple(replace(s, count=max(1, round(s.count * f))) for s in IDLE_SITES)


def _job(kind, duration_ms, job_sites, memory, data_size) -> WorkloadSpec:
    return WorkloadSpec(kind, duration_ms, _housekeeping(duration_ms) + job_sites, memory, data_size)


# Durations give 55-348 memory samples per node at the 2 s cadence; the two
# short examples are stretched so their replicas carry enough observations.
WORKLOADS: dict[WorkloadKind, WorkloadSpec] = {
    WorkloadKind.IDLE: WorkloadSpec(
        WorkloadKind.IDLE,
        IDLE_WINDOW_MS,
        IDLE_SITES,
        MemoryModel(24_000, 600, 310_000, 4_000, 46_300, 33_700),
    ),
    WorkloadKind.TERAGEN: _job(
        WorkloadKind.TERAGEN, 110_000,
        _scaled(_WRITE_PATH, (180, 1400, 180)) + _scaled(_TASK_PATH, (16, 64, 32)),
        MemoryModel(38_000, 2_500, 520_000, 30_000, 26_300, 17_900),
        10_000_000_000,
    ),
    WorkloadKind.TERASORT: _job(
        WorkloadKind.TERASORT, 696_000,
        _scaled(_READ_PATH, (220, 1700, 220)) + _scaled(_WRITE_PATH, (200, 1500, 200))
        + _scaled(_TASK_PATH, (32, 128, 64)),
        MemoryModel(41_000, 3_000, 610_000, 45_000, 58_700, 41_300),
        10_000_000_000,
    ),
    WorkloadKind.RANDOM_TEXT_WRITER: _job(
        WorkloadKind.RANDOM_TEXT_WRITER, 120_000,
        _scaled(_WRITE_PATH, (60, 460, 60)) + _scaled(_TASK_PATH, (10, 40, 20)),
        MemoryModel(36_000, 2_000, 480_000, 25_000, 14_300, 9_700),
        1_102_236_330,
    ),
    WorkloadKind.AGGREGATE_WORD_COUNT: _job(
        WorkloadKind.AGGREGATE_WORD_COUNT, 120_000,
        _scaled(_READ_PATH, (50, 380, 50)) + _scaled(_TASK_PATH, (10, 40, 20)),
        MemoryModel(35_000, 1_800, 450_000, 22_000, 11_900, 7_300),
        1_102_250_820,
    ),
}


def workload(kind: str | WorkloadKind, duration_ms: int | None = None) -> WorkloadSpec:
    try:
        spec = WORKLOADS[WorkloadKind(kind)]
    except ValueError:
        raise DetectionError("unknown-workload", str(kind)) from None
    if duration_ms is not None and duration_ms != spec.duration_ms:
        spec = spec.with_duration(duration_ms)
    return spec


@dataclass(frozen=True)
class NodeStreams:
    """Raw observations for one node: call events and smaps snapshots, time-ordered."""

    node_id: str
    events: tuple[CallEvent, ...] = ()
    snapshots: tuple[SmapsSnapshot, ...] = ()
    labels: tuple[str, ...] = field(default=(), compare=False)

    def call_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for ev in self.events:
            out[ev.path] = out.get(ev.path, 0) + 1
        return out


def node_rng(seed: int, node_id: str, stream: str) -> np.random.Generator:
    """Independent generator per (seed, node, purpose)."""
    tag = hashlib.sha1(f"{node_id}/{stream}".encode()).digest()
    words = [int.from_bytes(tag[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *words]))


# (shared_clean, private_dirty) fractions per mapping: heap, jar/library text, thread stacks
_MAPPING_SPLIT = ((0.05, 0.80), (0.90, 0.05), (0.05, 0.15))
_SHARED_CLEAN_FRACTION = 0.85
_PRIVATE_DIRTY_FRACTION = 0.9


def _split(total: int, fractions) -> list[int]:
    parts = [int(total * f) for f in fractions[:-1]]
    parts.append(total - sum(parts))
    return parts


def make_snapshot(timestamp_ms: int, shared_kib: int, private_kib: int, rss_offset_kib: int = 0) -> SmapsSnapshot:
    """Spread totals over three mappings; rss equals the field sum plus ``rss_offset_kib`` on the heap."""
    sc_total = int(shared_kib * _SHARED_CLEAN_FRACTION)
    sd_total = shared_kib - sc_total
    pd_total = int(private_kib * _PRIVATE_DIRTY_FRACTION)
    pc_total = private_kib - pd_total
    sh_frac = [f[0] for f in _MAPPING_SPLIT]
    pr_frac = [f[1] for f in _MAPPING_SPLIT]
    sc = _split(sc_total, sh_frac)
    sd = _split(sd_total, sh_frac)
    pc = _split(pc_total, pr_frac)
    pd = _split(pd_total, pr_frac)
    maps = []
    for i in range(len(_MAPPING_SPLIT)):
        rss = sc[i] + sd[i] + pc[i] + pd[i]
        if i == 0:
            rss = max(0, rss + rss_offset_kib)
        maps.append(SmapsMapping(rss, sc[i], sd[i], pc[i], pd[i]))
    return SmapsSnapshot(timestamp_ms, tuple(maps))


def _memory_series(model: MemoryModel, n: int, interval_ms: int, rng: np.random.Generator):
    t = np.arange(n) * float(interval_ms)
    phase_s, phase_p = rng.uniform(0.0, 2.0 * math.pi, size=2)
    amp_s = model.shared_std * math.sqrt(2.0)
    amp_p = model.private_std * math.sqrt(2.0)
    shared = (
        model.shared_mean + amp_s * np.sin(2.0 * math.pi * t / model.shared_period_ms + phase_s)
        + rng.normal(0.0, model.jitter * model.shared_std, n)
    )
    private = (
        model.private_mean + amp_p * np.sin(2.0 * math.pi * t / model.private_period_ms + phase_p)
        + rng.normal(0.0, model.jitter * model.private_std, n)
    )
    return (
        np.clip(np.rint(shared), 0, None).astype(np.int64),
        np.clip(np.rint(private), 0, None).astype(np.int64),
    )


def _call_events(sites, duration_ms: int, rng: np.random.Generator, jitter: float) -> tuple[CallEvent, ...]:
    counts = [max(1, int(round(s.count * (1.0 + rng.uniform(-jitter, jitter))))) for s in sites]
    stamps = [np.sort(rng.integers(0, max(duration_ms, 1), size=c)) for c in counts]
    events = []
    for site, ts in zip(sites, stamps):
        events.extend(
            CallEvent(int(t), site.kind, site.callee, site.signature, site.line, site.path) for t in ts
        )
    events.sort(key=lambda e: e.timestamp_ms)
    return tuple(events)


def gen_workload(
    spec: WorkloadSpec,
    node_id: str,
    seed: int,
    interval_ms: int = DEFAULT_INTERVAL_MS,
    jitter: float = DEFAULT_JITTER,
) -> NodeStreams:
    """Call events and smaps snapshots one replica records while running ``spec``.

    Per-path call counts share the site's rate across nodes with a uniform
    per-node multiplicative jitter of ``+/- jitter``. One snapshot is taken
    every ``interval_ms``.
    """
    if spec.duration_ms < 2 * interval_ms:
        raise DetectionError("bad-workload", "duration must cover at least two sampling intervals")
    events = _call_events(spec.sites, spec.duration_ms, node_rng(seed, node_id, "calls"), jitter)
    n = spec.duration_ms // interval_ms
    shared, private = _memory_series(spec.memory, n, interval_ms, node_rng(seed, node_id, "memory"))
    snapshots = tuple(
        make_snapshot(k * interval_ms, int(shared[k]), int(private[k])) for k in range(n)
    )
    return NodeStreams(node_id, events, snapshots)
