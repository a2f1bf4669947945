"""Runtime intrusion detection by cross-verifying replica behavior profiles."""

from .attacks import AttackKind, AttackSpec, Scenario, inject_config_attack, inject_exfil_attack
from .builder import CallEvent, CallKind, ProfileBuilder, SmapsMapping, SmapsSnapshot, build_profile
from .cluster import ConsensusOutcome, Message, SimConfig, SimReport, consensus, notify_namenode, run_scenario
from .errors import DetectionError, ParseError
from .profile import (
    BehaviorProfile,
    CallRecord,
    MemorySample,
    deserialize_profile,
    hash_call_path,
    serialize_profile,
)
from .verifier import Verdict, VerifyConfig, compare_calls, compare_memory, filter_tail, verify
from .workloads import WorkloadKind, gen_workload, workload

__version__ = "0.1.0"

__all__ = [
    "AttackKind", "AttackSpec", "BehaviorProfile", "CallEvent", "CallKind", "CallRecord",
    "ConsensusOutcome", "DetectionError", "MemorySample", "Message", "ParseError", "ProfileBuilder",
    "Scenario", "SimConfig", "SimReport", "SmapsMapping", "SmapsSnapshot", "Verdict", "VerifyConfig",
    "WorkloadKind", "build_profile", "compare_calls", "compare_memory", "consensus",
    "deserialize_profile", "filter_tail", "gen_workload", "hash_call_path", "inject_config_attack",
    "inject_exfil_attack", "notify_namenode", "run_scenario", "serialize_profile", "verify", "workload",
]
