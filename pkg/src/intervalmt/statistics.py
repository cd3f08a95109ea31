"""Two-sample and pooled-group test statistics, plus critical values.

Population indices in the public API are 1-based, matching the usual
``H_ij`` notation.  One-sided statistics are oriented so that a positive
value says the *second* argument is larger (stochastically, or in mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import DataError, DegenerateSampleError

SIDES = ("one", "two")


def _check_sided(sided: str) -> None:
    if sided not in SIDES:
        raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")


# ------------------------------------------------------------------ #
# Data containers
# ------------------------------------------------------------------ #


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """k x q table of (possibly fractional) cell counts, one row per population."""

    counts: np.ndarray
    row_labels: tuple[str, ...] = ()

    def __post_init__(self):
        counts = np.array(self.counts, dtype=float)
        if counts.ndim != 2:
            raise DataError("contingency table must be two-dimensional")
        k, q = counts.shape
        if k < 2 or q < 2:
            raise DataError(f"need at least 2 rows and 2 columns, got {k}x{q}")
        if not np.all(np.isfinite(counts)):
            raise DataError("contingency table has non-finite entries")
        bad = np.argwhere(counts < 0)
        if bad.size:
            r, c = bad[0]
            raise DataError(f"negative count {counts[r, c]} at row {r + 1}, column {c + 1}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        labels = tuple(self.row_labels) or tuple(str(i) for i in range(1, k + 1))
        if len(labels) != k:
            raise DataError("row_labels length does not match the number of rows")
        object.__setattr__(self, "row_labels", labels)

    model = "multinomial"

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def q(self) -> int:
        return self.counts.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.counts[i - 1]

    def flat(self) -> np.ndarray:
        return self.counts.ravel().copy()

    def with_flat(self, vec: np.ndarray) -> "ContingencyTable":
        return ContingencyTable(np.asarray(vec, float).reshape(self.counts.shape), self.row_labels)

    def __eq__(self, other):
        return (isinstance(other, ContingencyTable)
                and self.row_labels == other.row_labels
                and np.array_equal(self.counts, other.counts))


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """k x q real observations.

    ``kind="normal"`` holds one q-vector per population.  ``kind="rank-means"``
    holds a k x 1 column of average joint ranks; ``n`` is then the common
    per-population sample size.
    """

    values: np.ndarray
    kind: str = "normal"
    n: int | None = None
    row_labels: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataError("sample matrix must be one- or two-dimensional")
        if values.shape[0] < 2:
            raise DataError("need at least 2 populations")
        if not np.all(np.isfinite(values)):
            raise DataError("sample matrix has non-finite entries")
        if self.kind not in ("normal", "rank-means"):
            raise ValueError(f"unknown sample kind {self.kind!r}")
        if self.kind == "rank-means":
            if values.shape[1] != 1:
                raise DataError("rank means must be a single column")
            if self.n is None or self.n < 1:
                raise DataError("rank means need a per-population sample size n >= 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        labels = tuple(self.row_labels) or tuple(str(i) for i in range(1, values.shape[0] + 1))
        if len(labels) != values.shape[0]:
            raise DataError("row_labels length does not match the number of rows")
        object.__setattr__(self, "row_labels", labels)

    @property
    def model(self) -> str:
        return "normal" if self.kind == "normal" else "rank"

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.values[i - 1]

    @property
    def rank_sums(self) -> np.ndarray:
        """Per-population joint-rank totals (rank model only)."""
        return self.values[:, 0] * self.n

    def flat(self) -> np.ndarray:
        return self.values.ravel().copy()

    def with_flat(self, vec: np.ndarray) -> "SampleMatrix":
        return SampleMatrix(np.asarray(vec, float).reshape(self.values.shape),
                            self.kind, self.n, self.row_labels)

    def __eq__(self, other):
        return (isinstance(other, SampleMatrix)
                and (self.kind, self.n, self.row_labels) == (other.kind, other.n, other.row_labels)
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class CriticalValues:
    """Strictly increasing critical values ``C_1 < ... < C_K``."""

    values: tuple[float, ...]
    source: str = "user"
    alpha: float | None = field(default=None, compare=False)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("need at least one critical value")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("critical values must be finite")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"critical values must be strictly increasing: {vals}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, m: int) -> float:
        """1-based access, ``cv[m] == C_m``."""
        if not 1 <= m <= len(self.values):
            raise IndexError(m)
        return self.values[m - 1]

    @classmethod
    def parse(cls, text: str) -> "CriticalValues":
        return cls(tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip()))


# ------------------------------------------------------------------ #
# Statistics
# ------------------------------------------------------------------ #


def midranks(pooled: Sequence[float]) -> list[float]:
    """Midrank of each ordered cell of a pooled frequency vector.

    Cell ``l`` gets (count in cells before ``l``) + (count in ``l`` + 1) / 2.
    Works unchanged for fractional counts.
    """
    out = []
    cum = 0.0
    for t in pooled:
        out.append(cum + (t + 1.0) / 2.0)
        cum += t
    return out


def wmw_midrank_z(row_a: Sequence[float], row_b: Sequence[float]) -> float:
    """Normalized Wilcoxon-Mann-Whitney statistic for a 2 x q ordinal table.

    W is the midrank sum of ``row_b`` in the pooled table, so a positive
    value means ``row_b`` is stochastically larger.  No tie correction is
    applied to the variance.

    Raises
    ------
    DegenerateSampleError
        If either row has a zero total.
    """
    a = [float(v) for v in row_a]
    b = [float(v) for v in row_b]
    if len(a) != len(b):
        raise DataError(f"rows have different numbers of cells ({len(a)} vs {len(b)})")
    m = sum(a)
    n = sum(b)
    if m <= 0 or n <= 0:
        raise DegenerateSampleError("degenerate sample: a row total is zero")
    w = 0.0
    cum = 0.0
    for x, y in zip(a, b):
        t = x + y
        w += y * (cum + (t + 1.0) / 2.0)
        cum += t
    mean = n * (m + n + 1.0) / 2.0
    var = m * n * (m + n + 1.0) / 12.0
    return (w - mean) / math.sqrt(var)


def normal_h(mean_a, n_a: float, mean_b, n_b: float, sided: str = "two") -> float:
    """Standardized difference between two pooled normal group means.

    For scalar data this is ``(b - a) / sqrt(1/n_a + 1/n_b)`` (absolute value
    when two-sided).  For q > 1 it is the quadratic form
    ``|a - b|^2 / (1/n_a + 1/n_b)``, which is two-sided only.
    """
    _check_sided(sided)
    if n_a <= 0 or n_b <= 0:
        raise DegenerateSampleError("degenerate sample: group size must be positive")
    a = np.atleast_1d(np.asarray(mean_a, float))
    b = np.atleast_1d(np.asarray(mean_b, float))
    if a.shape != b.shape:
        raise DataError("group means have different dimensions")
    scale = 1.0 / n_a + 1.0 / n_b
    if a.size == 1:
        d = (b[0] - a[0]) / math.sqrt(scale)
        return d if sided == "one" else abs(d)
    if sided == "one":
        raise ValueError("one-sided statistic is only defined for scalar observations")
    d = a - b
    return float(d @ d) / scale


def chisq_pair_stat(x_i, x_j) -> float:
    """``(x_i - x_j)'(x_i - x_j) / 2``; chi-square with q df under H_ij."""
    xi = np.atleast_1d(np.asarray(x_i, float))
    xj = np.atleast_1d(np.asarray(x_j, float))
    if xi.shape != xj.shape:
        raise DataError(f"dimension mismatch: {xi.shape} vs {xj.shape}")
    d = xi - xj
    return float(d @ d) / 2.0


def rank_h(group_a: Iterable[int], group_b: Iterable[int], rank_sums: Sequence[float],
           n: int, k: int | None = None, sided: str = "two", w: float | None = None) -> float:
    """Standardized difference of pooled mean joint ranks, group a minus group b.

    ``rank_sums[i-1]`` is the total of the joint ranks of population ``i``
    and every population contributes ``n`` observations, so a group of
    ``m`` populations has ``N = n*m`` observations.  The variance constant
    ``w`` defaults to ``k*(k*n + 1)``; pass ``w=n*k*(n*k + 1)`` for the exact
    permutation variance of a difference of mean ranks.
    """
    _check_sided(sided)
    ga = sorted(set(group_a))
    gb = sorted(set(group_b))
    if not ga or not gb:
        raise ValueError("rank groups must be nonempty")
    if set(ga) & set(gb):
        raise ValueError(f"rank groups overlap: {sorted(set(ga) & set(gb))}")
    if k is None:
        k = len(rank_sums)
    if w is None:
        w = k * (k * n + 1.0)
    n_a = n * len(ga)
    n_b = n * len(gb)
    mean_a = sum(rank_sums[i - 1] for i in ga) / n_a
    mean_b = sum(rank_sums[i - 1] for i in gb) / n_b
    sigma = math.sqrt(w * (1.0 / n_a + 1.0 / n_b) / 12.0)
    d = (mean_a - mean_b) / sigma
    return d if sided == "one" else abs(d)


# ------------------------------------------------------------------ #
# Critical values
# ------------------------------------------------------------------ #


def _check_alpha(K: int, alpha: float) -> None:
    if K < 1:
        raise ValueError("K must be at least 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def critical_values_bh(K: int, alpha: float) -> CriticalValues:
    """Two-sided step-up constants ``Phi^-1(1 - (K+1-i) (alpha/2) / K)``."""
    _check_alpha(K, alpha)
    i = np.arange(1, K + 1)
    vals = norm.ppf(1.0 - (K + 1 - i) * (alpha / 2.0) / K)
    return CriticalValues(tuple(np.sort(vals)), source="BH", alpha=alpha)


def critical_values_bg(K: int, alpha: float) -> CriticalValues:
    """Step-down constants ``Phi^-1(1 - i (alpha/2) / (K + 1 - i (1 - alpha/2)))``.

    The formula decreases in ``i``; the result is reindexed increasingly,
    so ``C_1`` comes from ``i = K``.
    """
    _check_alpha(K, alpha)
    i = np.arange(1, K + 1)
    vals = norm.ppf(1.0 - i * (alpha / 2.0) / (K + 1 - i * (1.0 - alpha / 2.0)))
    return CriticalValues(tuple(np.sort(vals)), source="BG", alpha=alpha)
