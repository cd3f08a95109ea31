"""Classic step-down and step-up procedures on pairwise statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .decisions import DecisionReport
from .errors import DataError
from .families import HypothesisFamily, Pair
from .statistics import (
    ContingencyTable,
    CriticalValues,
    SampleMatrix,
    chisq_pair_stat,
    rank_h,
    wmw_midrank_z,
)

STAT_KINDS = ("wmw", "chisq", "z-difference", "difference", "rank-z")


@dataclass(frozen=True)
class StatisticTable:
    """One statistic per tested pair; larger means more evidence against H_ij."""

    family: HypothesisFamily
    entries: dict[Pair, float]

    def __post_init__(self):
        missing = set(self.family.pairs) - set(self.entries)
        if missing:
            raise ValueError(f"missing statistics for pairs {sorted(missing)}")
        bad = [p for p, v in self.entries.items() if not math.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite statistics for pairs {bad}")

    @property
    def sided(self) -> str:
        return self.family.sided

    def __len__(self):
        return len(self.entries)


def default_stat_kind(data) -> str:
    if isinstance(data, ContingencyTable):
        return "wmw"
    if data.kind == "rank-means":
        return "rank-z"
    return "z-difference" if data.q == 1 else "chisq"


def pairwise_stats(data, family: HypothesisFamily, stat_kind: str | None = None,
                   sigma: float = 1.0, w: float | None = None) -> StatisticTable:
    """Two-population statistic ``T_ij(x_i, x_j)`` for every pair in the family.

    Signed statistics measure "j minus i"; two-sided families take the
    absolute value.  ``sigma`` is the known per-observation standard
    deviation used by ``z-difference``.
    """
    kind = stat_kind or default_stat_kind(data)
    if kind not in STAT_KINDS:
        raise ValueError(f"unknown statistic {kind!r}; expected one of {STAT_KINDS}")
    if data.k != family.k:
        raise DataError(f"data has {data.k} populations but the family expects {family.k}")
    needs = {"wmw": "multinomial", "rank-z": "rank"}.get(kind, "normal")
    if data.model != needs:
        raise DataError(f"statistic {kind!r} needs {needs} data, got {data.model}")
    if kind in ("z-difference", "difference") and data.q != 1:
        raise DataError(f"statistic {kind!r} needs scalar observations")

    entries = {}
    for i, j in family.pairs:
        if kind == "wmw":
            t = wmw_midrank_z(data.row(i), data.row(j))
        elif kind == "chisq":
            t = chisq_pair_stat(data.row(i), data.row(j))
        elif kind == "rank-z":
            t = rank_h((j,), (i,), data.rank_sums, data.n, data.k, "one", w)
        else:
            t = float(data.row(j)[0] - data.row(i)[0])
            if kind == "z-difference":
                t /= sigma * math.sqrt(2.0)
        entries[(i, j)] = abs(t) if family.sided == "two" else t
    return StatisticTable(family, entries)


def _check_lengths(stats: StatisticTable, criticals: CriticalValues) -> int:
    K = len(stats)
    if len(criticals) != K:
        raise ValueError(f"{K} hypotheses but {len(criticals)} critical values")
    return K


def step_down(stats: StatisticTable, criticals: CriticalValues) -> DecisionReport:
    """Test the largest remaining statistic against ``C_K, C_{K-1}, ...``.

    Stops at the first statistic that does not strictly exceed its
    constant; all remaining hypotheses are accepted.
    """
    K = _check_lengths(stats, criticals)
    order = sorted(stats.entries, key=lambda p: (-stats.entries[p], p))
    rejected = {p: False for p in stats.entries}
    stages: dict = {p: None for p in stats.entries}
    for m, pair in enumerate(order, start=1):
        if stats.entries[pair] <= criticals[K - m + 1]:
            break
        rejected[pair] = True
        stages[pair] = m
    return DecisionReport("step-down", stats.family, rejected, dict(stats.entries), stages)


def step_up(stats: StatisticTable, criticals: CriticalValues) -> DecisionReport:
    """Step-up: compare ordered ``T_(1) <= ... <= T_(K)`` with ``C_1 < ... < C_K``.

    With ``m`` the smallest index such that ``T_(m) > C_m``, the hypotheses
    holding ``T_(m), ..., T_(K)`` are rejected.  With the two-sided BH
    constants this is the usual FDR step-up rule.
    """
    K = _check_lengths(stats, criticals)
    order = sorted(stats.entries, key=lambda p: (stats.entries[p], p))
    rejected = {p: False for p in stats.entries}
    stages: dict = {p: None for p in stats.entries}
    for m, pair in enumerate(order, start=1):
        if stats.entries[pair] > criticals[m]:
            for p in order[m - 1:]:
                rejected[p] = True
                stages[p] = 1
            break
    return DecisionReport("step-up", stats.family, rejected, dict(stats.entries), stages)
