"""Residual-based step-down (RSD) partitioning of population indices.

Starting from the single block ``{1..k}``, every stage looks at each block
that the family allows to split, finds the split maximizing the
dispersion statistic ``H(A, B minus A)``, and splits the block with the
largest such maximum if it strictly exceeds the stage threshold.  Stage
``m`` uses ``C_{K+1-m}``, so thresholds decrease as the partition grows.
``H_ij`` is rejected exactly when ``i`` and ``j`` end up in different
blocks.

Split statistics (``h_fn``) are called as ``h_fn(data, A, rest)`` and
are signed "rest minus A" when one-sided.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .decisions import DecisionReport
from .errors import DataError
from .families import Block, HypothesisFamily
from .statistics import (
    ContingencyTable,
    CriticalValues,
    SampleMatrix,
    normal_h,
    rank_h,
    wmw_midrank_z,
)

Data = Union[ContingencyTable, SampleMatrix]
SplitStatistic = Callable[[Data, Block, Block], float]

POOLINGS = ("mean", "sum")


@dataclass(frozen=True)
class PooledGroup:
    """Pooled summary of a set of populations.

    ``size`` is the number of populations, ``total`` is ``Y(A)`` (row sum,
    vector sum, or total joint-rank sum), ``count`` is the number of
    underlying observations where that differs from ``size`` (rank model),
    and ``summary`` is what the split statistics consume.
    """

    size: int
    total: np.ndarray
    summary: np.ndarray
    count: float


def pool(A, data: Data, pooling: str = "mean") -> PooledGroup:
    """Combine the populations in ``A`` (1-based indices).

    Contingency rows are averaged by default (``pooling="sum"`` adds them
    instead); normal observations are averaged; rank data keeps the total
    rank sum over ``n * |A|`` observations.
    """
    idx = [i - 1 for i in set(A)]
    if not idx:
        raise ValueError("cannot pool an empty set")
    if min(idx) < 0 or max(idx) >= data.k:
        raise ValueError(f"indices {sorted(A)} outside 1..{data.k}")
    size = len(idx)
    if isinstance(data, ContingencyTable):
        if pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}")
        total = data.counts[idx].sum(axis=0)
        summary = total / size if pooling == "mean" else total
        return PooledGroup(size, total, summary, float(size))
    if data.kind == "rank-means":
        total = data.rank_sums[idx].sum(keepdims=True)
        count = float(data.n * size)
        return PooledGroup(size, total, total / count, count)
    total = data.values[idx].sum(axis=0)
    return PooledGroup(size, total, total / size, float(size))


# ------------------------------------------------------------------ #
# Split statistics
# ------------------------------------------------------------------ #


def wmw_split(data: ContingencyTable, a: Block, rest: Block, sided: str = "two",
              pooling: str = "mean") -> float:
    z = wmw_midrank_z(pool(a, data, pooling).summary, pool(rest, data, pooling).summary)
    return z if sided == "one" else abs(z)


def normal_split(data: SampleMatrix, a: Block, rest: Block, sided: str = "two") -> float:
    pa, pr = pool(a, data), pool(rest, data)
    return normal_h(pa.summary, pa.size, pr.summary, pr.size, sided)


def rank_split(data: SampleMatrix, a: Block, rest: Block, sided: str = "two",
               w: float | None = None) -> float:
    return rank_h(rest, a, data.rank_sums, data.n, data.k, sided, w)


def split_statistic(data: Data, sided: str = "two", *, pooling: str = "mean",
                    w: float | None = None) -> SplitStatistic:
    """Default dispersion statistic for the model ``data`` belongs to."""
    if isinstance(data, ContingencyTable):
        return functools.partial(wmw_split, sided=sided, pooling=pooling)
    if data.kind == "rank-means":
        return functools.partial(rank_split, sided=sided, w=w)
    if sided == "one" and data.q > 1:
        raise ValueError("one-sided splits need scalar observations")
    return functools.partial(normal_split, sided=sided)


# ------------------------------------------------------------------ #
# Partitions and traces
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class Partition:
    blocks: tuple[Block, ...]

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition contains an empty block")
        seen = [i for b in blocks for i in b]
        if len(seen) != len(set(seen)):
            raise ValueError("partition blocks overlap")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def trivial(cls, k: int) -> "Partition":
        return cls((tuple(range(1, k + 1)),))

    @property
    def elements(self) -> set[int]:
        return {i for b in self.blocks for i in b}

    def block_of(self, i: int) -> Block:
        for b in self.blocks:
            if i in b:
                return b
        raise KeyError(i)

    def together(self, i: int, j: int) -> bool:
        return j in self.block_of(i)

    def refine(self, block: Block, a: Block, rest: Block) -> "Partition":
        if block not in self.blocks:
            raise ValueError(f"{block} is not a block of {self.blocks}")
        return Partition(tuple(b for b in self.blocks if b != block) + (a, rest))

    def __len__(self):
        return len(self.blocks)

    def __str__(self):
        return ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)


@dataclass(frozen=True)
class Candidate:
    block: Block
    split: Block
    rest: Block
    value: float


@dataclass(frozen=True)
class SplitStep:
    """One stage: the best split found, its threshold, and whether it ran.

    The last step of a trace that stopped on the threshold has
    ``executed=False``; a trace that ran out of eligible blocks ends on an
    executed step.
    """

    stage: int
    block: Block
    split: Block
    rest: Block
    value: float
    threshold: float
    executed: bool
    candidates: tuple[Candidate, ...] = ()

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "block": list(self.block),
            "split": list(self.split),
            "rest": list(self.rest),
            "value": self.value,
            "threshold": self.threshold,
            "executed": self.executed,
            "candidates": [
                {"block": list(c.block), "split": list(c.split), "rest": list(c.rest), "value": c.value}
                for c in self.candidates
            ],
        }


@dataclass
class PartitionTrace:
    steps: list[SplitStep] = field(default_factory=list)
    final: Partition | None = None

    @property
    def splits(self) -> list[SplitStep]:
        return [s for s in self.steps if s.executed]

    def to_dict(self) -> dict:
        return {
            "steps": [s.to_dict() for s in self.steps],
            "final": [list(b) for b in self.final.blocks] if self.final else None,
        }


# ------------------------------------------------------------------ #
# Core procedure
# ------------------------------------------------------------------ #


def _best_split(block: Block, family: HypothesisFamily, data: Data, h_fn: SplitStatistic):
    best = None
    cands = []
    for a, rest in family.splits(block):
        value = float(h_fn(data, a, rest))
        cands.append(Candidate(block, a, rest, value))
        if best is None or value > best.value:
            best = cands[-1]
    if best is None:
        raise ValueError(f"block {block} has no admissible split")
    return best, cands


def dispersion_max(B, family: HypothesisFamily, data: Data,
                   h_fn: SplitStatistic | None = None) -> tuple[Block, float]:
    """Maximizing admissible split ``A_B`` of ``B`` and its value ``D(B)``.

    Ties go to the lexicographically smallest ``A``.
    """
    if h_fn is None:
        h_fn = split_statistic(data, family.sided)
    best, _ = _best_split(tuple(sorted(B)), family, data, h_fn)
    return best.split, best.value


def rsd_run(data: Data, family: HypothesisFamily, h_fn: SplitStatistic | None,
            criticals: CriticalValues, record_candidates: bool = True
            ) -> tuple[PartitionTrace, DecisionReport]:
    """Run the partitioning procedure and extract decisions.

    ``criticals`` must hold at least ``k - 1`` values, the most splits any
    family allows.  With ``K`` values, stage ``m`` compares against
    ``C_{K+1-m}``; equality stops.
    """
    if data.k != family.k:
        raise DataError(f"data has {data.k} populations but the family expects {family.k}")
    K = len(criticals)
    if K < family.max_splits:
        raise ValueError(
            f"need at least {family.max_splits} critical values for k={family.k}, got {K}")
    if h_fn is None:
        h_fn = split_statistic(data, family.sided)

    partition = Partition.trivial(family.k)
    trace = PartitionTrace()
    stage = 1
    while True:
        eligible = [b for b in partition.blocks if family.eligible(b)]
        if not eligible:
            break
        threshold = criticals[K + 1 - stage]
        best = None
        candidates: list[Candidate] = []
        for block in eligible:
            top, cands = _best_split(block, family, data, h_fn)
            if record_candidates:
                candidates.extend(cands)
            if best is None or top.value > best.value:
                best = top
        executed = best.value > threshold
        trace.steps.append(SplitStep(stage, best.block, best.split, best.rest, best.value,
                                     threshold, executed, tuple(candidates)))
        if not executed:
            break
        partition = partition.refine(best.block, best.split, best.rest)
        stage += 1
    trace.final = partition
    return trace, decisions_from_partition(partition, family, trace)


def decisions_from_partition(partition: Partition, family: HypothesisFamily,
                             trace: PartitionTrace | None = None) -> DecisionReport:
    """Reject ``H_ij`` exactly when ``i`` and ``j`` sit in different blocks."""
    missing = set(family.populations) - partition.elements
    if missing:
        raise ValueError(f"partition does not cover populations {sorted(missing)}")
    rejected = {p: not partition.together(*p) for p in family.pairs}
    stages: dict = {p: None for p in family.pairs}
    stats: dict = {p: None for p in family.pairs}
    if trace is not None:
        for step in trace.splits:
            for p in family.pairs:
                if stages[p] is None and (
                        (p[0] in step.split and p[1] in step.rest)
                        or (p[1] in step.split and p[0] in step.rest)):
                    stages[p] = step.stage
                    stats[p] = step.value
    return DecisionReport("rsd", family, rejected, stats, stages)
