import csv
import json
import subprocess
import sys

import pytest

from replids.builder import build_profile, format_call_log, format_smaps
from replids.cli import main
from replids.workloads import gen_workload, workload
from replids.attacks import inject_exfil_attack
from replids.profile import serialize_profile


@pytest.fixture
def scenarios(tmp_path):
    docs = {
        "idle": {"workload": "idle"},
        "config": {"workload": "teragen", "attack": {"kind": "config_modification", "target": "dn2"}},
        "exfil": {"workload": "idle", "attack": {"kind": "data_exfiltration", "target": "dn3"}},
    }
    out = {}
    for name, doc in docs.items():
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(doc))
        out[name] = str(p)
    return out


def write_fixture(tmp_path, node, seed=0, exfil=False):
    streams = {n: gen_workload(workload("idle"), n, seed) for n in ("dn1", "dn2", "dn3")}
    if exfil:
        streams = inject_exfil_attack(streams, "dn3")
    s = streams[node]
    calls = tmp_path / f"{node}.calls.tsv"
    smaps = tmp_path / f"{node}.smaps"
    calls.write_text(format_call_log(s.events))
    smaps.write_text(format_smaps(s.snapshots))
    return str(calls), str(smaps)


def test_run_idle_exit_zero(scenarios, tmp_path):
    out = tmp_path / "r.json"
    assert main(["run", scenarios["idle"], "--seed", "1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["outcome"]["decision"] == "clean"


def test_run_config_attack_exit_one(scenarios, tmp_path):
    # seed 7 is one of the calibrated detecting seeds
    assert main(["run", scenarios["config"], "--seed", "7", "--out", str(tmp_path / "r.json")]) == 1


def test_run_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "absent.json")]) == 2


def test_run_bad_scenario(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"workload": "idle", "attack": {"kind": "teleport"}}')
    assert main(["run", str(p)]) == 2


def test_run_deterministic(scenarios, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["run", scenarios["exfil"], "--seed", "12", "--out", str(a)])
    main(["run", scenarios["exfil"], "--seed", "12", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["run", "x.json", "--seed", "-4"]) == 2


def test_ingest_then_verify_identical(tmp_path, capsys):
    calls, smaps = write_fixture(tmp_path, "dn1")
    paths = []
    for node in ("dn1", "dn2", "dn3"):
        out = tmp_path / f"{node}.bp"
        # same inputs on every node
        assert main(["ingest", "--calls", calls, "--smaps", smaps, "--identifier", "job-1",
                     "--node-id", node, "--out", str(out)]) == 0
        paths.append(str(out))
    capsys.readouterr()
    assert main(["verify", *paths]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert all(v["overall"] for v in doc["verdicts"])


def test_ingest_output_matches_library(tmp_path):
    calls, smaps = write_fixture(tmp_path, "dn2", seed=3)
    out = tmp_path / "p.bp"
    main(["ingest", "--calls", calls, "--smaps", smaps, "--identifier", "j", "--node-id", "dn2", "--out", str(out)])
    s = gen_workload(workload("idle"), "dn2", 3)
    assert out.read_bytes() == serialize_profile(build_profile("j", "dn2", s.events, s.snapshots))


def test_ingest_empty_smaps(tmp_path):
    calls, _ = write_fixture(tmp_path, "dn1")
    empty = tmp_path / "empty.smaps"
    empty.write_text("")
    out = tmp_path / "p.bp"
    assert main(["ingest", "--calls", calls, "--smaps", str(empty), "--identifier", "j",
                 "--node-id", "dn1", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[-1] == "T"


def test_ingest_malformed_line(tmp_path, capsys):
    calls, smaps = write_fixture(tmp_path, "dn1")
    lines = open(calls).read().splitlines()
    lines[6] = "garbage line"
    open(calls, "w").write("\n".join(lines) + "\n")
    code = main(["ingest", "--calls", calls, "--smaps", smaps, "--identifier", "j", "--node-id", "dn1",
                 "--out", str(tmp_path / "p.bp")])
    err = capsys.readouterr().err
    assert code == 2
    assert "line 7" in err and calls in err


def test_verify_exfil_profiles(tmp_path, capsys):
    paths = []
    for node in ("dn1", "dn2", "dn3"):
        calls, smaps = write_fixture(tmp_path, node, seed=5, exfil=True)
        out = tmp_path / f"{node}.bp"
        main(["ingest", "--calls", calls, "--smaps", smaps, "--identifier", "j", "--node-id", node, "--out", str(out)])
        paths.append(str(out))
    capsys.readouterr()
    assert main(["verify", *paths]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert any(c["missing_local"] or c["missing_remote"] for c in doc["calls"])


def test_verify_needs_two(tmp_path):
    calls, smaps = write_fixture(tmp_path, "dn1")
    out = tmp_path / "p.bp"
    main(["ingest", "--calls", calls, "--smaps", smaps, "--identifier", "j", "--node-id", "dn1", "--out", str(out)])
    assert main(["verify", str(out)]) == 2


def test_verify_identity_mismatch(tmp_path):
    calls, smaps = write_fixture(tmp_path, "dn1")
    a, b = tmp_path / "a.bp", tmp_path / "b.bp"
    main(["ingest", "--calls", calls, "--smaps", smaps, "--identifier", "j1", "--node-id", "dn1", "--out", str(a)])
    main(["ingest", "--calls", calls, "--smaps", smaps, "--identifier", "j2", "--node-id", "dn2", "--out", str(b)])
    assert main(["verify", str(a), str(b)]) == 2


def test_verify_corrupt_profile(tmp_path):
    a = tmp_path / "a.bp"
    a.write_text("BPv1 j dn1 0 2000\n")
    assert main(["verify", str(a), str(a)]) == 2


def _run_report(scenario, seed, tmp_path):
    rep = tmp_path / "r.json"
    main(["run", scenario, "--seed", str(seed), "--out", str(rep)])
    out = tmp_path / "plots"
    assert main(["report", str(rep), "--out", str(out)]) == 0
    return out


def test_report_intrusion(scenarios, tmp_path):
    out = _run_report(scenarios["config"], 7, tmp_path)
    with open(out / "t2_sorted.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["rank", "dn1", "dn2", "dn3"]
    with open(out / "tukey.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["node"] for r in rows if r["suspected"] == "1"] == ["dn2"]
    assert all(float(r["low"]) < float(r["mean"]) < float(r["high"]) for r in rows)
    assert (out / "call_counts.csv").exists()


def test_report_clean(scenarios, tmp_path):
    out = _run_report(scenarios["idle"], 1, tmp_path)
    assert not (out / "tukey.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "tukey.csv" not in manifest["files"] and manifest["notes"]


def test_report_bad_input(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"hello": 1}')
    assert main(["report", str(p), "--out", str(tmp_path / "o")]) == 2
    p.write_text("{nope")
    assert main(["report", str(p), "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(scenarios, tmp_path):
    r = subprocess.run([sys.executable, "-m", "replids", "run", scenarios["exfil"], "--seed", "3",
                        "--out", str(tmp_path / "r.json")], capture_output=True, text=True)
    assert r.returncode == 1
    assert "suspected=dn3" in r.stderr


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["run", "{idle}"], 0),
        (["run", "{exfil}"], 1),
        (["run", "{idle}", "--alpha", "2"], 2),
        (["run", "{idle}", "--interval-ms", "0"], 2),
        (["verify"], 2),
        (["report", "{idle}", "--out", "{tmp}"], 2),
    ],
)
def test_exit_code_matrix(argv, expected, scenarios, tmp_path, capsys):
    fmt = {**scenarios, "tmp": str(tmp_path / "o")}
    argv = [a.format(**fmt) for a in argv]
    if argv[0] == "run":
        argv += ["--out", str(tmp_path / "r.json")]
    assert main(argv) == expected
