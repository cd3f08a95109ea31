"""Hypothesis families and the set families that govern partition splits.

A family fixes which pairs ``(i, j)`` are tested and, for the partition
procedure, which blocks may be split and what shape the two parts may
take:

* change-point: only blocks of >= 2 consecutive indices split, into a
  left run and a right run;
* treatments-vs-control: only the block holding the control (plus at
  least one treatment) splits, by peeling off a single treatment;
* all-pairwise: any block of >= 2 indices splits into two nonempty parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

SHAPES = ("all-pairwise", "change-point", "treatments-vs-control")
_ALIASES = {"tvc": "treatments-vs-control", "pairwise": "all-pairwise", "changepoint": "change-point"}

Block = tuple[int, ...]
Pair = tuple[int, int]


def canonical_shape(name: str) -> str:
    shape = _ALIASES.get(name, name)
    if shape not in SHAPES:
        raise ValueError(f"unknown family {name!r}; expected one of {SHAPES} or 'tvc'")
    return shape


@dataclass(frozen=True)
class HypothesisFamily:
    """Tested pairs plus the split rules for one problem shape.

    Pairs are oriented ``(i, j)`` with the one-sided alternative "population
    j is larger".  For treatments-vs-control the pair is ``(i, control)``.
    """

    shape: str
    k: int
    sided: str = "two"
    control: int | None = None
    max_block: int = 20

    def __post_init__(self):
        object.__setattr__(self, "shape", canonical_shape(self.shape))
        if self.k < 2:
            raise ValueError("a family needs at least 2 populations")
        if self.sided not in ("one", "two"):
            raise ValueError(f"sided must be 'one' or 'two', got {self.sided!r}")
        if self.shape == "treatments-vs-control":
            c = self.k if self.control is None else self.control
            if not 1 <= c <= self.k:
                raise ValueError(f"control index {c} outside 1..{self.k}")
            object.__setattr__(self, "control", c)
        elif self.control is not None:
            raise ValueError("control index only applies to treatments-vs-control")

    @property
    def populations(self) -> Block:
        return tuple(range(1, self.k + 1))

    @property
    def pairs(self) -> list[Pair]:
        if self.shape == "change-point":
            return [(i, i + 1) for i in range(1, self.k)]
        if self.shape == "treatments-vs-control":
            return [(i, self.control) for i in self.populations if i != self.control]
        return list(combinations(self.populations, 2))

    @property
    def max_splits(self) -> int:
        return self.k - 1

    def eligible(self, block: Block) -> bool:
        """Whether ``block`` may still be split."""
        if len(block) < 2:
            return False
        if self.shape == "treatments-vs-control":
            return self.control in block
        if self.shape == "change-point":
            return all(b - a == 1 for a, b in zip(block, block[1:]))
        return True

    def splits(self, block: Block) -> Iterator[tuple[Block, Block]]:
        """Admissible ``(A, B minus A)`` divisions of an eligible block.

        Yielded in increasing lexicographic order of ``A``.  For one-sided
        statistics ``A`` is the part expected to be smaller: the left run
        for change points, the peeled-off treatment for treatments-vs-control.
        """
        block = tuple(sorted(block))
        if not self.eligible(block):
            raise ValueError(f"block {block} is not eligible for splitting in a {self.shape} family")
        if self.shape == "change-point":
            for t in range(1, len(block)):
                yield block[:t], block[t:]
        elif self.shape == "treatments-vs-control":
            for i in block:
                if i != self.control:
                    yield (i,), tuple(b for b in block if b != i)
        else:
            if len(block) > self.max_block:
                raise ValueError(
                    f"block of size {len(block)} exceeds the all-pairwise limit of {self.max_block}")
            yield from _subset_splits(block, ordered=self.sided == "one")

    def as_dict(self) -> dict:
        return {"shape": self.shape, "k": self.k, "sided": self.sided, "control": self.control}


def _subset_splits(block: Block, ordered: bool) -> Iterator[tuple[Block, Block]]:
    # two-sided statistics are symmetric in the parts, so A always holds min(block)
    rest_pool = block if ordered else block[1:]
    found = []
    for r in range(0, len(rest_pool) + 1):
        for combo in combinations(rest_pool, r):
            a = combo if ordered else (block[0],) + combo
            if 0 < len(a) < len(block):
                found.append(a)
    for a in sorted(found):
        yield a, tuple(b for b in block if b not in a)
