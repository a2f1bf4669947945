import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replids.attacks import AttackSpec, Scenario
from replids.cluster import (
    NAMENODE,
    Decision,
    Message,
    MessageKind,
    SimConfig,
    config_from_dict,
    consensus,
    notify_namenode,
    run_scenario,
)
from replids.errors import DetectionError
from replids.verifier import Verdict


def vd(node, ok, suspect=None):
    return Verdict(node, ok, True, suspect)


def cfg(workload="idle", attack=None, **kw):
    return SimConfig(Scenario(workload, attack or AttackSpec()), **kw)


def test_consensus_all_clean():
    out = consensus({n: vd(n, True) for n in ("dn1", "dn2", "dn3")})
    assert out.decision is Decision.CLEAN and out.reporter == "dn1" and out.suspected_node is None


def test_consensus_two_of_three():
    out = consensus({"dn1": vd("dn1", False, "dn1"), "dn2": vd("dn2", False, "dn1"), "dn3": vd("dn3", True)})
    assert out.decision is Decision.INTRUSION and out.suspected_node == "dn1" and not out.tie


def test_consensus_one_of_three():
    out = consensus({"dn1": vd("dn1", False, "dn3"), "dn2": vd("dn2", True), "dn3": vd("dn3", True)})
    assert out.decision is Decision.CLEAN


def test_consensus_even_split_is_not_majority():
    out = consensus({"dn1": vd("dn1", False), "dn2": vd("dn2", True)})
    assert out.decision is Decision.CLEAN


def test_consensus_suspect_tie_goes_to_lowest_id():
    out = consensus({
        "dn10": vd("dn10", False, "dn10"),
        "dn2": vd("dn2", False, "dn9"),
        "dn3": vd("dn3", False, None),
    })
    assert out.suspected_node == "dn9" and out.tie
    assert out.reporter == "dn2"


def test_consensus_needs_two():
    with pytest.raises(DetectionError):
        consensus({"dn1": vd("dn1", True)})


@settings(max_examples=200, deadline=None)
@given(st.lists(st.booleans(), min_size=2, max_size=9), st.data())
def test_consensus_monotone(flags, data):
    ids = [f"dn{i + 1}" for i in range(len(flags))]
    out = consensus({n: vd(n, f) for n, f in zip(ids, flags)})
    if all(flags):
        return
    # turn one more verdict against: an intrusion decision must survive
    trues = [i for i, f in enumerate(flags) if f]
    if not trues:
        return
    j = data.draw(st.sampled_from(trues))
    more = list(flags)
    more[j] = False
    out2 = consensus({n: vd(n, f) for n, f in zip(ids, more)})
    if out.decision is Decision.INTRUSION:
        assert out2.decision is Decision.INTRUSION


def test_notify_namenode():
    out = consensus({"dn1": vd("dn1", False, "dn2"), "dn2": vd("dn2", False, "dn2"), "dn3": vd("dn3", True)})
    log = []
    msg = notify_namenode(out, log)
    assert log == [msg] and msg.to == NAMENODE and msg.sender == "dn1"
    assert Message.decode(msg.encode()) == msg
    assert json.loads(msg.payload)["suspected_node"] == "dn2"


def test_notify_clean_outcome_fails():
    out = consensus({"dn1": vd("dn1", True), "dn2": vd("dn2", True)})
    with pytest.raises(DetectionError) as e:
        notify_namenode(out, [])
    assert e.value.code == "no-intrusion"


def test_message_decode_garbage():
    with pytest.raises(DetectionError):
        Message.decode(b"{}")


def test_idle_run_is_clean():
    r = run_scenario(cfg("idle", seed=3))
    assert r.outcome.decision is Decision.CLEAN
    assert not r.alerts


def test_message_counts_and_order():
    for k in (2, 3, 5):
        r = run_scenario(cfg("idle", replication=k, seed=1))
        kinds = [m.kind for m in r.messages]
        assert kinds.count(MessageKind.PROFILE) == k * (k - 1)
        assert kinds.count(MessageKind.VOTE) == k * (k - 1)
        keys = [(m.round, m.sender, m.to) for m in r.messages]
        assert [k_[0] for k_ in keys] == sorted(k_[0] for k_ in keys)


def test_config_attack_run_detects_target():
    hits = 0
    for seed in range(100):
        r = run_scenario(cfg("random_text_writer", AttackSpec("config_modification", "dn2"), seed=seed))
        hits += r.outcome.decision is Decision.INTRUSION and r.outcome.suspected_node == "dn2"
    assert hits >= 95


def test_intrusion_emits_one_alert():
    r = run_scenario(cfg("idle", AttackSpec("data_exfiltration", "dn3"), seed=2))
    assert r.outcome.decision is Decision.INTRUSION
    assert len(r.alerts) == 1 and r.alerts[0].sender == "dn1" and r.alerts[0].to == NAMENODE
    assert r.outcome.suspected_node == "dn3"


def test_report_deterministic():
    c = cfg("teragen", AttackSpec("config_modification", "dn1"), seed=2**63 + 5)
    assert run_scenario(c).to_json() == run_scenario(c).to_json()


def test_report_contents():
    r = run_scenario(cfg("teragen", AttackSpec("config_modification", "dn3"), seed=9))
    doc = json.loads(r.to_json())
    assert doc["config"]["scenario"]["attack"]["target"] == "dn3"
    assert doc["nodes"] == ["dn1", "dn2", "dn3"]
    assert set(doc["profiles"]) == {"dn1", "dn2", "dn3"}
    assert doc["memory"]["anova"]["p_value"] < 0.05
    assert {row["node"] for row in doc["memory"]["tukey"]["intervals"]} == {"dn1", "dn2", "dn3"}
    assert doc["outcome"] == {"decision": "intrusion", "suspected_node": "dn3", "reporter": "dn1", "tie": False}
    assert doc["messages"][-1]["kind"] == "alert"


def test_no_alert_when_all_verdicts_pass():
    for seed in range(30):
        r = run_scenario(cfg("aggregate_word_count", seed=seed))
        if all(v.overall for v in r.verdicts.values()):
            assert not r.alerts


def test_config_validation():
    with pytest.raises(DetectionError):
        cfg(replication=1)
    with pytest.raises(DetectionError):
        cfg(alpha=1.5)
    with pytest.raises(DetectionError):
        config_from_dict({"workload": "idle", "colour": "red"})
    with pytest.raises(DetectionError):
        config_from_dict({"workload": "idle", "seed": "x"})


def test_config_overrides():
    c = config_from_dict({"workload": "idle", "seed": 4, "alpha": 0.01}, seed=9, alpha=None)
    assert c.seed == 9 and c.alpha == 0.01


def test_unknown_attack_target():
    c = cfg("idle", AttackSpec("config_modification", "dn7"))
    with pytest.raises(DetectionError) as e:
        run_scenario(c)
    assert e.value.code == "no-such-node"
