from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replids.builder import (
    CallEvent,
    CallKind,
    ProfileBuilder,
    SmapsMapping,
    SmapsSnapshot,
    build_profile,
    format_call_log,
    format_smaps,
    parse_call_log,
    parse_smaps,
    read_call_log,
    read_smaps,
)
from replids.errors import DetectionError, ParseError
from replids.profile import hash_call_path
from replids.stats import hotelling_t2, pca


def ev(path, ts=0, kind=CallKind.SYSTEM):
    return CallEvent(ts, kind, "java.lang.Object", "wait(J)V", 0, path)


def snap(ts, *maps):
    return SmapsSnapshot(ts, tuple(SmapsMapping(*m) for m in maps))


def test_same_path_counts_up():
    b = ProfileBuilder("job", "dn1")
    b.accumulate_call(ev("/lib/libc.so!futex")).accumulate_call(ev("/lib/libc.so!futex", 5))
    table = b.call_table()
    assert list(table) == [hash_call_path("/lib/libc.so!futex")]
    assert next(iter(table.values())).count == 2


def test_distinct_paths_distinct_records():
    b = ProfileBuilder("job", "dn1")
    for p in ("a", "b", "c"):
        b.accumulate_call(ev(p))
    assert sorted(r.count for r in b.call_table().values()) == [1, 1, 1]


def test_counts_match_tally():
    rng = np.random.default_rng(4)
    paths = [f"/lib/x{i}.so!f" for i in range(10)]
    events = [ev(paths[i], t) for t, i in enumerate(rng.integers(0, 10, 1000))]
    b = ProfileBuilder("job", "dn1")
    for e in events:
        b.accumulate_call(e)
    tally = Counter(e.path for e in events)
    assert {r.path: r.count for r in b.call_table().values()} == dict(tally)


def test_rejects_other_call_kinds():
    with pytest.raises(ValueError):
        ProfileBuilder("job", "dn1").accumulate_call(ev("p", kind="signal"))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=40), st.randoms())
def test_call_order_insensitive(paths, rnd):
    events = [ev(p, i) for i, p in enumerate(paths)]
    shuffled = events[:]
    rnd.shuffle(shuffled)
    a = build_profile("job", "dn1", events, [])
    b = build_profile("job", "dn1", shuffled, [])
    assert a.calls == b.calls


def test_memory_single_mapping():
    b = ProfileBuilder("job", "dn1").accumulate_memory(snap(0, (100, 10, 20, 30, 40)))
    s = b.samples[0]
    assert (s.rss_kib, s.shared_kib, s.private_kib) == (100, 30, 70)


def test_memory_zero_mappings():
    s = ProfileBuilder("job", "dn1").accumulate_memory(SmapsSnapshot(0)).samples[0]
    assert s.as_row() == (0, 0, 0)


def test_memory_three_mappings_resummed():
    rng = np.random.default_rng(9)
    rows = rng.integers(0, 5000, size=(3, 5))
    s = ProfileBuilder("job", "dn1").accumulate_memory(snap(0, *map(tuple, rows.tolist()))).samples[0]
    rss = shared = private = 0
    for r in rows.tolist():
        rss += r[0]
        shared += r[1] + r[2]
        private += r[3] + r[4]
    assert s.as_row() == (rss, shared, private)


def test_non_monotone_snapshot():
    b = ProfileBuilder("job", "dn1").accumulate_memory(snap(4000))
    with pytest.raises(DetectionError) as e:
        b.accumulate_memory(snap(3999))
    assert e.value.code == "non-monotone-sample"


def test_cadence_filter():
    b = ProfileBuilder("job", "dn1", interval_ms=2000)
    for ts in (0, 500, 1999, 2000, 3000, 4100, 6000, 6100):
        b.accumulate_memory(snap(ts))
    assert [s.timestamp_ms for s in b.samples] == [0, 2000, 4100, 6100]


def test_negative_sizes_rejected():
    with pytest.raises(DetectionError):
        SmapsMapping(-1, 0, 0, 0, 0)


def test_finalize_identical_samples():
    b = ProfileBuilder("job", "dn1")
    for k in range(5):
        b.accumulate_memory(snap(2000 * k, (100, 10, 20, 30, 40)))
    p = b.finalize()
    assert np.array_equal(p.t_squared, np.zeros(5))


def test_finalize_call_only():
    p = ProfileBuilder("job", "dn1").accumulate_call(ev("x")).finalize()
    assert p.sample_count == 0 and p.t_squared.size == 0


def test_finalize_one_sample():
    b = ProfileBuilder("job", "dn1").accumulate_memory(snap(0))
    with pytest.raises(DetectionError) as e:
        b.finalize()
    assert e.value.code == "insufficient-observations"


def test_finalize_matches_pipeline():
    rng = np.random.default_rng(12)
    rows = rng.integers(1000, 90000, size=(100, 5))
    snaps = [snap(2000 * i, tuple(r)) for i, r in enumerate(rows.tolist())]
    p = build_profile("job-7", "dn3", [], snaps)
    x = np.c_[rows[:, 0], rows[:, 1] + rows[:, 2], rows[:, 3] + rows[:, 4]].astype(float)
    assert np.allclose(p.t_squared, hotelling_t2(pca(x)), atol=1e-12)
    assert p.identifier == "job-7" and p.node_id == "dn3"
    assert p.t_squared.size == p.sample_count == 100


CALL_LOG = """\
# ts kind callee signature line path
0\tsystem\tjava.lang.Object\twait(J)V\t0\t/lib/libc.so!futex
15\tlibrary\torg.apache.hadoop.ipc.Client\tcall()V\t1476\t/opt/hadoop-common.jar!/org/apache/hadoop/ipc/Client.class
30\tsystem\tjava.lang.Object\twait(J)V\t0\t/lib/libc.so!futex
"""

SMAPS = """\
TS 0
M 100 10 20 30 40
M 5 1 1 1 2

TS 2000
M 110 12 20 30 48
"""


def test_parse_call_log():
    events = parse_call_log(CALL_LOG.splitlines())
    assert len(events) == 3 and events[1].kind == CallKind.LIBRARY and events[1].line == 1476


def test_parse_smaps():
    snaps = parse_smaps(SMAPS.splitlines())
    assert [s.timestamp_ms for s in snaps] == [0, 2000]
    assert snaps[0].totals().as_row() == (105, 32, 73)


def test_format_round_trip():
    events = parse_call_log(CALL_LOG.splitlines())
    assert parse_call_log(format_call_log(events).splitlines()) == events
    snaps = parse_smaps(SMAPS.splitlines())
    assert parse_smaps(format_smaps(snaps).splitlines()) == snaps


@pytest.mark.parametrize(
    "bad,line",
    [
        ("0\tsystem\tC\ts\t0\n", 1),
        ("0\tsystem\tC\ts\t0\t/p\nx\tsystem\tC\ts\t0\t/p\n", 2),
        ("0\tsystem\tC\ts\t0\t/p\n0\tsignal\tC\ts\t0\t/p\n", 2),
        ("0\tsystem\t\ts\t0\t/p\n", 1),
    ],
)
def test_call_log_errors_cite_line(bad, line):
    with pytest.raises(ParseError) as e:
        parse_call_log(bad.splitlines(), source="calls.tsv")
    assert e.value.line == line
    assert "calls.tsv" in str(e.value)


@pytest.mark.parametrize(
    "bad,line",
    [
        ("M 1 1 1 1 1\n", 1),
        ("TS 0\nM 1 1 1 1\n", 2),
        ("TS 0\nM 1 1 1 1 -1\n", 2),
        ("TS 0\nTS 5\n", 2),
        ("TS zero\n", 1),
        ("TS 0\nX 1\n", 2),
    ],
)
def test_smaps_errors_cite_line(bad, line):
    with pytest.raises(ParseError) as e:
        parse_smaps(bad.splitlines())
    assert e.value.line == line


def test_read_files(tmp_path):
    (tmp_path / "c.tsv").write_text(CALL_LOG)
    (tmp_path / "m.txt").write_text(SMAPS)
    assert len(read_call_log(tmp_path / "c.tsv")) == 3
    assert len(read_smaps(tmp_path / "m.txt")) == 2
    (tmp_path / "e.txt").write_text("")
    assert read_smaps(tmp_path / "e.txt") == []
