"""Replica-side verification of behavior profiles.

A node checks its local profile against every profile received from the
other replicas: call tables are matched by digest with a relative count
threshold, and T-squared signatures are compared with one-way ANOVA
followed by Tukey's HSD to single out the deviating node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DetectionError
from .profile import BehaviorProfile
from .stats import AnovaResult, TukeyResult, one_way_anova, tukey_hsd

DEFAULT_DELTA = 0.5
DEFAULT_PERCENTILE = 99.0
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class VerifyConfig:
    alpha: float = DEFAULT_ALPHA
    delta: float = DEFAULT_DELTA
    percentile: float = DEFAULT_PERCENTILE


@dataclass(frozen=True)
class CallComparison:
    local_node: str
    remote_node: str
    missing_local: tuple[str, ...] = ()
    missing_remote: tuple[str, ...] = ()
    count_violations: tuple[tuple[str, int, int], ...] = ()

    @property
    def calls_match(self) -> bool:
        return not (self.missing_local or self.missing_remote or self.count_violations)


def compare_calls(local: BehaviorProfile, remote: BehaviorProfile, delta: float = DEFAULT_DELTA) -> CallComparison:
    """Match two call tables by digest.

    ``missing_local`` lists keys only the remote has, ``missing_remote``
    keys only the local side has. A shared key violates when the relative
    count gap ``|a - b| / max(a, b)`` exceeds ``delta``.
    """
    if delta <= 0:
        raise DetectionError("bad-delta", f"delta must be positive, got {delta}")
    lk, rk = set(local.calls), set(remote.calls)
    violations = []
    for key in sorted(lk & rk):
        a = local.calls[key].count
        b = remote.calls[key].count
        if abs(a - b) / max(a, b) > delta:
            violations.append((key, a, b))
    return CallComparison(
        local_node=local.node_id,
        remote_node=remote.node_id,
        missing_local=tuple(sorted(rk - lk)),
        missing_remote=tuple(sorted(lk - rk)),
        count_violations=tuple(violations),
    )


def filter_tail(t2, percentile: float = DEFAULT_PERCENTILE) -> np.ndarray:
    """Drop values strictly above the given percentile, keeping order."""
    v = np.asarray(t2, dtype=float).ravel()
    if v.size == 0:
        raise DetectionError("empty-vector")
    if not 50.0 < percentile <= 100.0:
        raise DetectionError("bad-percentile", f"percentile must be in (50, 100], got {percentile}")
    if percentile == 100.0:
        return v.copy()
    cut = np.percentile(v, percentile)
    return v[v <= cut]


@dataclass(frozen=True)
class MemComparison:
    node_ids: tuple[str, ...]
    anova: AnovaResult
    tukey: TukeyResult | None
    alpha: float
    suspected_node: str | None = None

    @property
    def mem_match(self) -> bool:
        return self.anova.p_value >= self.alpha


def compare_memory(
    profiles: list[BehaviorProfile],
    alpha: float = DEFAULT_ALPHA,
    percentile: float = DEFAULT_PERCENTILE,
) -> MemComparison:
    """ANOVA over tail-filtered, sorted T-squared vectors; Tukey when it rejects."""
    if len(profiles) < 2:
        raise DetectionError("insufficient-group", "need at least two profiles")
    groups = []
    for prof in profiles:
        if prof.t_squared.size == 0:
            raise DetectionError("insufficient-group", f"{prof.node_id} carries no T-squared values")
        g = np.sort(filter_tail(prof.t_squared, percentile))
        if g.size < 2:
            raise DetectionError("insufficient-group", f"{prof.node_id} has {g.size} value(s) after filtering")
        groups.append(g)
    anova = one_way_anova(groups, alpha)
    tukey = None
    suspected = None
    if anova.p_value < alpha:
        try:
            tukey = tukey_hsd(groups, alpha)
        except DetectionError as exc:
            if exc.code != "degenerate-variance":
                raise
        if tukey is not None and tukey.outlier_group is not None:
            suspected = profiles[tukey.outlier_group].node_id
    return MemComparison(
        node_ids=tuple(p.node_id for p in profiles),
        anova=anova,
        tukey=tukey,
        alpha=alpha,
        suspected_node=suspected,
    )


@dataclass(frozen=True)
class Verdict:
    node_id: str
    calls_match: bool
    mem_match: bool
    suspected_node: str | None = None
    call_comparisons: tuple[CallComparison, ...] = ()
    memory: MemComparison | None = field(default=None, compare=False)

    @property
    def overall(self) -> bool:
        return self.calls_match and self.mem_match


def _call_suspect(local: BehaviorProfile, comparisons: list[CallComparison]) -> str | None:
    # only meaningful with at least two peers to tell the odd node apart
    if len(comparisons) < 2:
        return None
    bad = [c.remote_node for c in comparisons if not c.calls_match]
    if len(bad) == 1:
        return bad[0]
    if len(bad) == len(comparisons):
        return local.node_id
    return None


def verify(local: BehaviorProfile, received: list[BehaviorProfile], config: VerifyConfig | None = None) -> Verdict:
    """Verdict of ``local``'s node given the profiles its replicas sent.

    Memory comparison is skipped (treated as matching) when no profile
    carries T-squared values, so idle call-only profiles still verify.
    """
    config = config or VerifyConfig()
    if not received:
        raise DetectionError("insufficient-group", "no received profiles to verify against")
    for prof in received:
        if prof.identifier != local.identifier:
            raise DetectionError(
                "profile-identity-mismatch", f"{prof.identifier!r} != {local.identifier!r}"
            )
    comparisons = [compare_calls(local, r, config.delta) for r in received]
    calls_match = all(c.calls_match for c in comparisons)

    everyone = [local, *received]
    memory = None
    mem_match = True
    suspected = None
    if any(p.has_memory for p in everyone):
        memory = compare_memory(everyone, config.alpha, config.percentile)
        mem_match = memory.mem_match
        suspected = memory.suspected_node
    if suspected is None and not calls_match:
        suspected = _call_suspect(local, comparisons)
    return Verdict(
        node_id=local.node_id,
        calls_match=calls_match,
        mem_match=mem_match,
        suspected_node=suspected,
        call_comparisons=tuple(comparisons),
        memory=memory,
    )
