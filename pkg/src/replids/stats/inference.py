"""Variance-ratio F-test, one-way ANOVA and Tukey's HSD."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..errors import DetectionError
from .distributions import f_cdf, f_sf, studentized_range_quantile

DEFAULT_ALPHA = 0.05


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DetectionError("bad-alpha", f"alpha must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class FTestResult:
    h: bool
    p_value: float
    variance_ratio: float
    df1: int
    df2: int


def two_sample_f_test(a, b, alpha: float = DEFAULT_ALPHA) -> FTestResult:
    """Two-sided test that ``a`` and ``b`` come from populations with equal variance.

    ``h`` is True when the null hypothesis is rejected at level ``alpha``.
    """
    _check_alpha(alpha)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise DetectionError("insufficient-observations", "each sample needs at least 2 values")
    var_b = float(np.var(b, ddof=1))
    if var_b == 0.0:
        raise DetectionError("degenerate-variance", "second sample has zero variance")
    ratio = float(np.var(a, ddof=1)) / var_b
    df1, df2 = a.size - 1, b.size - 1
    p = min(1.0, 2.0 * min(f_cdf(ratio, df1, df2), f_sf(ratio, df1, df2)))
    return FTestResult(h=p < alpha, p_value=p, variance_ratio=ratio, df1=df1, df2=df2)


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    p_value: float
    df_between: int
    df_within: int
    ss_between: float
    ss_within: float
    ss_total: float
    group_means: tuple[float, ...]
    group_sizes: tuple[int, ...]

    @property
    def ms_within(self) -> float:
        return self.ss_within / self.df_within


def _groups(groups) -> list[np.ndarray]:
    out = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(out) < 2:
        raise DetectionError("insufficient-group", f"need at least 2 groups, got {len(out)}")
    for i, g in enumerate(out):
        if g.size < 2:
            raise DetectionError("insufficient-group", f"group {i} has {g.size} value(s)")
    return out


def one_way_anova(groups, alpha: float = DEFAULT_ALPHA) -> AnovaResult:
    """Classic between/within sum-of-squares decomposition.

    The null hypothesis is that every group mean is equal; ``p_value`` is
    the upper tail of the F distribution at the observed statistic.
    """
    _check_alpha(alpha)
    gs = _groups(groups)
    sizes = np.array([g.size for g in gs])
    means = np.array([g.mean() for g in gs])
    pooled = np.concatenate(gs)
    grand = pooled.mean()
    ss_total = float(np.sum((pooled - grand) ** 2))
    ss_between = float(np.sum(sizes * (means - grand) ** 2))
    # summing the within-group parts directly avoids cancellation in total - between
    ss_within = float(sum(np.sum((g - g.mean()) ** 2) for g in gs))
    df_b = len(gs) - 1
    df_w = int(sizes.sum()) - len(gs)
    if ss_between == 0.0 or (ss_within == 0.0 and ss_between <= 1e-12 * max(ss_total, 1.0)):
        f_stat, p = 0.0, 1.0
    elif ss_within == 0.0:
        f_stat, p = float("inf"), 0.0
    else:
        f_stat = (ss_between / df_b) / (ss_within / df_w)
        p = f_sf(f_stat, df_b, df_w)
    return AnovaResult(
        f_statistic=f_stat,
        p_value=p,
        df_between=df_b,
        df_within=df_w,
        ss_between=ss_between,
        ss_within=ss_within,
        ss_total=ss_total,
        group_means=tuple(float(m) for m in means),
        group_sizes=tuple(int(n) for n in sizes),
    )


@dataclass(frozen=True)
class PairComparison:
    group_a: int
    group_b: int
    mean_diff: float
    q_statistic: float
    significant: bool


@dataclass(frozen=True)
class TukeyResult:
    pairwise: tuple[PairComparison, ...]
    outlier_group: int | None
    q_critical: float
    ms_within: float
    df_within: int
    group_means: tuple[float, ...]
    group_sizes: tuple[int, ...]
    tie: bool = field(default=False)

    def interval(self, group: int) -> tuple[float, float]:
        """Comparison interval around a group mean.

        Two groups of equal size differ significantly exactly when their
        intervals do not overlap.
        """
        half = 0.5 * self.q_critical * np.sqrt(self.ms_within / self.group_sizes[group])
        m = self.group_means[group]
        return m - half, m + half


def tukey_hsd(groups, alpha: float = DEFAULT_ALPHA) -> TukeyResult:
    """All pairwise comparisons with the Tukey-Kramer studentized range.

    ``outlier_group`` is the group involved in the most significant pairs.
    Ties go to the group with the largest summed absolute mean difference
    over its significant pairs, then to the lowest index.
    """
    _check_alpha(alpha)
    gs = _groups(groups)
    k = len(gs)
    sizes = [g.size for g in gs]
    means = [float(g.mean()) for g in gs]
    ss_within = float(sum(np.sum((g - g.mean()) ** 2) for g in gs))
    df_w = sum(sizes) - k
    if ss_within == 0.0:
        raise DetectionError("degenerate-variance", "all groups have zero within-group variance")
    msw = ss_within / df_w
    q_crit = studentized_range_quantile(k, df_w, alpha)

    pairs = []
    hits = [0] * k
    weight = [0.0] * k
    for a, b in combinations(range(k), 2):
        diff = means[a] - means[b]
        se = np.sqrt(msw / 2.0 * (1.0 / sizes[a] + 1.0 / sizes[b]))
        q = abs(diff) / se
        sig = bool(q > q_crit)
        pairs.append(PairComparison(a, b, diff, float(q), sig))
        if sig:
            for g in (a, b):
                hits[g] += 1
                weight[g] += abs(diff)

    outlier = None
    tie = False
    if max(hits) > 0:
        best = max(hits)
        leaders = [g for g in range(k) if hits[g] == best]
        tie = len(leaders) > 1
        outlier = min(leaders, key=lambda g: (-weight[g], g))
    return TukeyResult(
        pairwise=tuple(pairs),
        outlier_group=outlier,
        q_critical=q_crit,
        ms_within=msw,
        df_within=df_w,
        group_means=tuple(means),
        group_sizes=tuple(sizes),
        tie=tie,
    )
