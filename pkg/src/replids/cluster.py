"""Deterministic round-based simulation of a replicated cluster.

One namenode (``nn``) and ``k`` datanodes (``dn1`` .. ``dnk``) run the same
task. Each round is a barrier; messages inside a round are delivered in
``(round, from, to)`` order over a lossless network:

1. profile round: every datanode sends its serialized profile to every other
   datanode (``k * (k - 1)`` messages)
2. vote round: every datanode verifies and broadcasts its verdict
3. alert round: on a majority intrusion decision the primary (lowest id)
   notifies the namenode
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

import numpy as np

from .attacks import Scenario, apply_attack, scenario_from_dict
from .builder import build_profile
from .errors import DetectionError
from .profile import BehaviorProfile, deserialize_profile, profile_digest, serialize_profile
from .verifier import Verdict, VerifyConfig, verify
from .workloads import DEFAULT_INTERVAL_MS, gen_workload, workload

NAMENODE = "nn"
REPORT_VERSION = 1


def node_ids(k: int) -> list[str]:
    return [f"dn{i}" for i in range(1, k + 1)]


def _natural(node_id: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", node_id)]


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario = field(default_factory=Scenario)
    replication: int = 3
    seed: int = 0
    alpha: float = 0.05
    delta: float = 0.5
    percentile: float = 99.0
    interval_ms: int = DEFAULT_INTERVAL_MS

    def __post_init__(self):
        if self.replication < 2:
            raise DetectionError("bad-config", "replication must be at least 2")
        if not 0.0 <= self.seed < 2**64:
            raise DetectionError("bad-config", "seed must be an unsigned 64-bit integer")
        if not 0.0 < self.alpha < 1.0:
            raise DetectionError("bad-config", "alpha must lie in (0, 1)")
        if self.interval_ms <= 0:
            raise DetectionError("bad-config", "interval_ms must be positive")

    @property
    def verify_config(self) -> VerifyConfig:
        return VerifyConfig(self.alpha, self.delta, self.percentile)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "replication": self.replication,
            "seed": self.seed,
            "alpha": self.alpha,
            "delta": self.delta,
            "percentile": self.percentile,
            "interval_ms": self.interval_ms,
        }


_CONFIG_KEYS = {"replication", "seed", "alpha", "delta", "percentile", "interval_ms"}


def config_from_dict(doc: Mapping[str, Any], **overrides) -> SimConfig:
    """Build a config from a scenario document; non-None ``overrides`` win.

    The document holds the scenario keys at top level, optionally next to
    any of the run parameters.
    """
    from .attacks import SCENARIO_KEYS

    unknown = set(doc) - SCENARIO_KEYS - _CONFIG_KEYS
    if unknown:
        raise DetectionError("bad-scenario", f"unknown keys {sorted(unknown)}")
    kwargs = {k: doc[k] for k in _CONFIG_KEYS if k in doc}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("replication", "seed", "interval_ms"):
        if key in kwargs and (isinstance(kwargs[key], bool) or not isinstance(kwargs[key], int)):
            raise DetectionError("bad-scenario", f"{key} must be an integer")
    for key in ("alpha", "delta", "percentile"):
        if key in kwargs and (isinstance(kwargs[key], bool) or not isinstance(kwargs[key], (int, float))):
            raise DetectionError("bad-scenario", f"{key} must be a number")
    return SimConfig(scenario=scenario_from_dict(doc), **kwargs)


class MessageKind(str, Enum):
    PROFILE = "profile"
    VOTE = "vote"
    ALERT = "alert"


@dataclass(frozen=True)
class Message:
    round: int
    kind: MessageKind
    sender: str
    to: str
    payload: bytes

    def encode(self) -> bytes:
        return json.dumps(
            {
                "round": self.round,
                "kind": MessageKind(self.kind).value,
                "from": self.sender,
                "to": self.to,
                "payload": self.payload.decode("utf-8"),
            },
            sort_keys=True,
        ).encode("utf-8")

    @classmethod
    def decode(cls, data: bytes) -> "Message":
        try:
            doc = json.loads(data)
            return cls(int(doc["round"]), MessageKind(doc["kind"]), doc["from"], doc["to"], doc["payload"].encode())
        except (ValueError, KeyError, TypeError) as exc:
            raise DetectionError("parse-error", f"bad message: {exc}") from None

    def summary(self) -> dict:
        out = {
            "round": self.round,
            "kind": MessageKind(self.kind).value,
            "from": self.sender,
            "to": self.to,
            "size": len(self.payload),
            "sha1": hashlib.sha1(self.payload).hexdigest(),
        }
        if self.kind == MessageKind.ALERT:
            out["payload"] = json.loads(self.payload)
        return out


class Decision(str, Enum):
    CLEAN = "clean"
    INTRUSION = "intrusion"


@dataclass(frozen=True)
class ConsensusOutcome:
    votes: Mapping[str, Verdict]
    decision: Decision
    suspected_node: str | None
    reporter: str
    tie: bool = False

    def alert_payload(self) -> dict:
        return {
            "decision": self.decision.value,
            "suspected_node": self.suspected_node,
            "reporter": self.reporter,
            "tie": self.tie,
            "against": sorted((n for n, v in self.votes.items() if not v.overall), key=_natural),
        }


def consensus(verdicts: Mapping[str, Verdict]) -> ConsensusOutcome:
    """Strict-majority vote over ``overall``; suspect is the modal suspicion.

    Ties between equally common suspects go to the lowest node id and set
    ``tie``. The reporter is the primary, i.e. the lowest node id.
    """
    if len(verdicts) < 2:
        raise DetectionError("insufficient-group", "consensus needs at least two verdicts")
    ids = sorted(verdicts, key=_natural)
    against = sum(1 for v in verdicts.values() if not v.overall)
    decision = Decision.INTRUSION if 2 * against > len(verdicts) else Decision.CLEAN
    tally = Counter(v.suspected_node for v in verdicts.values() if v.suspected_node is not None)
    suspected, tie = None, False
    if tally:
        top = max(tally.values())
        leaders = sorted((n for n, c in tally.items() if c == top), key=_natural)
        suspected, tie = leaders[0], len(leaders) > 1
    return ConsensusOutcome(dict(verdicts), decision, suspected, ids[0], tie)


def notify_namenode(outcome: ConsensusOutcome, log: list[Message], round_no: int = 3) -> Message:
    if outcome.decision is not Decision.INTRUSION:
        raise DetectionError("no-intrusion", "alerts are only sent for intrusion decisions")
    payload = json.dumps(outcome.alert_payload(), sort_keys=True).encode("utf-8")
    msg = Message(round_no, MessageKind.ALERT, outcome.reporter, NAMENODE, payload)
    log.append(msg)
    return msg


def _verdict_doc(v: Verdict) -> dict:
    return {
        "node": v.node_id,
        "calls_match": v.calls_match,
        "mem_match": v.mem_match,
        "overall": v.overall,
        "suspected_node": v.suspected_node,
        "calls": [
            {
                "remote": c.remote_node,
                "missing_local": list(c.missing_local),
                "missing_remote": list(c.missing_remote),
                "count_violations": [list(x) for x in c.count_violations],
            }
            for c in v.call_comparisons
        ],
    }


def _memory_doc(v: Verdict) -> dict | None:
    mem = v.memory
    if mem is None:
        return None
    a = mem.anova
    doc: dict[str, Any] = {
        "groups": list(mem.node_ids),
        "anova": {
            "f_statistic": a.f_statistic,
            "p_value": a.p_value,
            "df_between": a.df_between,
            "df_within": a.df_within,
            "ss_between": a.ss_between,
            "ss_within": a.ss_within,
            "ss_total": a.ss_total,
            "group_means": list(a.group_means),
            "group_sizes": list(a.group_sizes),
        },
        "tukey": None,
        "suspected_node": mem.suspected_node,
    }
    if mem.tukey is not None:
        t = mem.tukey
        doc["tukey"] = {
            "q_critical": t.q_critical,
            "ms_within": t.ms_within,
            "outlier_group": t.outlier_group,
            "tie": t.tie,
            "pairs": [
                {
                    "a": mem.node_ids[p.group_a],
                    "b": mem.node_ids[p.group_b],
                    "mean_diff": p.mean_diff,
                    "q": p.q_statistic,
                    "significant": p.significant,
                }
                for p in t.pairwise
            ],
            "intervals": [
                {"node": mem.node_ids[g], "mean": t.group_means[g], "low": lo, "high": hi}
                for g, (lo, hi) in ((g, t.interval(g)) for g in range(len(mem.node_ids)))
            ],
        }
    return doc


def _floats(obj):
    # JSON has no inf/nan; keep the report strictly valid
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_floats(v) for v in obj]
    return obj


@dataclass
class SimReport:
    config: SimConfig
    profiles: dict[str, BehaviorProfile]
    verdicts: dict[str, Verdict]
    outcome: ConsensusOutcome
    messages: list[Message]

    @property
    def primary(self) -> str:
        return self.outcome.reporter

    @property
    def alerts(self) -> list[Message]:
        return [m for m in self.messages if m.kind == MessageKind.ALERT]

    def to_dict(self) -> dict:
        ids = sorted(self.profiles, key=_natural)
        return _floats({
            "version": REPORT_VERSION,
            "config": self.config.to_dict(),
            "nodes": ids,
            "primary": self.primary,
            "profiles": {
                n: {
                    "digest": profile_digest(self.profiles[n]),
                    "identifier": self.profiles[n].identifier,
                    "sample_count": self.profiles[n].sample_count,
                    "total_calls": self.profiles[n].total_calls,
                    "t_squared": [float(x) for x in self.profiles[n].t_squared],
                    "calls": [
                        {"digest": k, "path": r.path, "callee": r.callee, "count": r.count}
                        for k, r in sorted(self.profiles[n].calls.items())
                    ],
                }
                for n in ids
            },
            "verdicts": {n: _verdict_doc(self.verdicts[n]) for n in ids},
            "memory": _memory_doc(self.verdicts[self.primary]),
            "outcome": {
                "decision": self.outcome.decision.value,
                "suspected_node": self.outcome.suspected_node,
                "reporter": self.outcome.reporter,
                "tie": self.outcome.tie,
            },
            "messages": [m.summary() for m in self.messages],
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def _annotate(node: str, exc: DetectionError) -> DetectionError:
    err = DetectionError(exc.code, f"[{node}] {exc}")
    err.node_id = node
    return err


def build_profiles(config: SimConfig) -> dict[str, BehaviorProfile]:
    """Generate every datanode's streams, apply the attack, build profiles."""
    sc = config.scenario
    spec = workload(sc.workload, sc.duration_ms)
    ids = node_ids(config.replication)
    streams = {n: gen_workload(spec, n, config.seed, config.interval_ms) for n in ids}
    streams = apply_attack(streams, sc.attack, config.seed)
    profiles = {}
    for n in ids:
        try:
            profiles[n] = build_profile(
                sc.job_id, n, streams[n].events, streams[n].snapshots, config.interval_ms
            )
        except DetectionError as exc:
            raise _annotate(n, exc) from exc
    return profiles


def run_scenario(config: SimConfig) -> SimReport:
    """Run one job on the simulated cluster and collect everything that happened."""
    profiles = build_profiles(config)
    ids = sorted(profiles, key=_natural)
    log: list[Message] = []

    # round 1: full replica exchange of serialized profiles
    wire = {n: serialize_profile(profiles[n]) for n in ids}
    inbox: dict[str, list[BehaviorProfile]] = {n: [] for n in ids}
    for src in ids:
        for dst in ids:
            if src != dst:
                log.append(Message(1, MessageKind.PROFILE, src, dst, wire[src]))
    for msg in sorted((m for m in log if m.round == 1), key=lambda m: (_natural(m.sender), _natural(m.to))):
        inbox[msg.to].append(deserialize_profile(msg.payload))

    # round 2: local verification and vote broadcast
    verdicts: dict[str, Verdict] = {}
    for n in ids:
        try:
            verdicts[n] = verify(profiles[n], inbox[n], config.verify_config)
        except DetectionError as exc:
            raise _annotate(n, exc) from exc
        vote = json.dumps(
            {"node": n, "overall": verdicts[n].overall, "suspected_node": verdicts[n].suspected_node},
            sort_keys=True,
        ).encode("utf-8")
        for dst in ids:
            if dst != n:
                log.append(Message(2, MessageKind.VOTE, n, dst, vote))

    # round 3: the primary reports to the namenode
    outcome = consensus(verdicts)
    if outcome.decision is Decision.INTRUSION:
        notify_namenode(outcome, log, 3)

    log.sort(key=lambda m: (m.round, _natural(m.sender), _natural(m.to)))
    return SimReport(config, profiles, verdicts, outcome, log)
