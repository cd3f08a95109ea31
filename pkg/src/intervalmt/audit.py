"""Ray scans for the interval property, counterexample generators, and a
randomized certification harness.

For a tested pair ``(i, j)`` every model has a direction ``g_ij`` along
which evidence against ``H_ij`` grows.  A procedure has the interval
property for ``H_ij`` when, along ``x + a*g_ij``, its decision is
monotone accept -> reject (one-sided) or its acceptance set in ``a`` is
an interval (two-sided).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .decisions import DecisionReport
from .errors import DataError, DomainError
from .families import HypothesisFamily, Pair
from .partition import Data, rsd_run, split_statistic
from .statistics import (
    ContingencyTable,
    CriticalValues,
    SampleMatrix,
    critical_values_bg,
)
from .stepwise import pairwise_stats, step_down

Procedure = Callable[[Data], DecisionReport]


@dataclass(frozen=True, eq=False)
class DirectionVector:
    g: np.ndarray
    pair: Pair
    model: str

    def to_dict(self) -> dict:
        return {"g": self.g.tolist(), "pair": list(self.pair), "model": self.model}


def direction_vector(data: Data, pair: Pair) -> DirectionVector:
    """``g_ij`` in the flat layout of ``data.flat()``.

    Multinomial: population i moves mass from its last cell to its first,
    population j from its first to its last.  Normal: -1 on every
    coordinate of i, +1 on every coordinate of j.  Rank: -1 at i, +1 at j.
    """
    i, j = pair
    if i == j or not (1 <= i <= data.k and 1 <= j <= data.k):
        raise ValueError(f"invalid pair {pair} for k={data.k}")
    q = data.q
    g = np.zeros(data.k * q)
    if isinstance(data, ContingencyTable):
        g[(i - 1) * q] = 1.0
        g[i * q - 1] = -1.0
        g[(j - 1) * q] = -1.0
        g[j * q - 1] = 1.0
    else:
        g[(i - 1) * q:i * q] = -1.0
        g[(j - 1) * q:j * q] = 1.0
    return DirectionVector(g, (i, j), data.model)


def shift(x: Data, g: DirectionVector, a: float) -> Data:
    """The point ``x + a*g``; raises ``DomainError`` outside the sample space."""
    try:
        return x.with_flat(x.flat() + a * g.g)
    except DataError as exc:
        raise DomainError(f"x + a*g invalid at a={a}: {exc}") from exc


def valid_grid(x: Data, g: DirectionVector, a_grid: Sequence[float]) -> list[float]:
    """Grid points for which ``x + a*g`` stays in the sample space."""
    if not isinstance(x, ContingencyTable):
        return list(a_grid)
    base = x.flat()
    return [a for a in a_grid if np.all(base + a * g.g >= 0)]


def ray_decisions(procedure: Procedure, x: Data, g: DirectionVector,
                  a_grid: Sequence[float], survey: bool = False) -> list[bool]:
    """Decision on ``H_ij`` (True = reject) at each ``x + a*g``.

    In survey mode grid points outside the sample space are dropped
    rather than raising; use ``valid_grid`` to recover which were kept.
    """
    grid = valid_grid(x, g, a_grid) if survey else list(a_grid)
    return [procedure(shift(x, g, a)).rejected[g.pair] for a in grid]


@dataclass(frozen=True)
class Violation:
    kind: str  # "one-sided" or "two-sided"
    indices: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "indices": list(self.indices)}


def check_one_sided(pattern: Sequence[bool]) -> Violation | None:
    """First reject -> accept transition, if any."""
    seen_reject = False
    for idx, rej in enumerate(pattern):
        if rej:
            seen_reject = True
        elif seen_reject:
            return Violation("one-sided", (idx,))
    return None


def check_two_sided(pattern: Sequence[bool]) -> Violation | None:
    """An accept, reject, accept subsequence (acceptance set not an interval).

    Reports the indices of the first accept, the first reject after it,
    and the next accept.
    """
    first_acc = next((i for i, r in enumerate(pattern) if not r), None)
    if first_acc is None:
        return None
    rej = None
    for idx in range(first_acc + 1, len(pattern)):
        if pattern[idx]:
            if rej is None:
                rej = idx
        elif rej is not None:
            return Violation("two-sided", (first_acc, rej, idx))
    return None


def check_pattern(pattern: Sequence[bool], sided: str) -> Violation | None:
    return check_one_sided(pattern) if sided == "one" else check_two_sided(pattern)


# ------------------------------------------------------------------ #
# Counterexamples for the classic step-down procedure
# ------------------------------------------------------------------ #


@dataclass
class Counterexample:
    """Points along one ray where classic step-down breaks the interval property.

    ``points[0]`` is the base point; ``points[t] = x + a_values[t]*g``.
    ``expected[t]`` lists the step-down decisions (True = reject) per pair.
    """

    name: str
    family: HypothesisFamily
    criticals: CriticalValues
    direction: DirectionVector
    a_values: tuple[float, ...]
    points: list[SampleMatrix]
    expected: list[dict[Pair, bool]]
    stat_kind: str = "difference"

    @property
    def pair(self) -> Pair:
        return self.direction.pair

    def step_down(self, data: Data) -> DecisionReport:
        return step_down(pairwise_stats(data, self.family, self.stat_kind), self.criticals)

    def rsd(self, data: Data) -> DecisionReport:
        return rsd_run(data, self.family, None, self.criticals, record_candidates=False)[1]


def counterexample_change_point(c1: float = 1.0, c2: float = 2.0, eps1: float = 0.05,
                                eps2: float = 0.05, eps: float = 0.1) -> Counterexample:
    """One-sided change point, three populations, ``T_ij = x_j - x_i``.

    At ``x`` both hypotheses are rejected (``T_12 = C_1 + eps1`` at stage 2).
    Moving by ``2*eps`` along ``g_12`` raises ``T_12`` but pushes ``T_23``
    to ``C_2`` or below, so the procedure stops at stage 1 and accepts H_12.
    """
    if not 0 < c1 < c2:
        raise ValueError("need 0 < c1 < c2")
    if not (c2 + eps2 - 2 * eps <= c2 and c1 + eps1 + 4 * eps < c2):
        raise ValueError("eps too small or too large for the construction")
    family = HypothesisFamily("change-point", 3, sided="one")
    x = SampleMatrix([0.0, c1 + eps1, c1 + eps1 + c2 + eps2])
    g = direction_vector(x, (1, 2))
    a_values = (0.0, 2 * eps)
    points = [shift(x, g, a) for a in a_values]
    expected = [{(1, 2): True, (2, 3): True}, {(1, 2): False, (2, 3): False}]
    return Counterexample("figure1", family, CriticalValues((c1, c2)), g, a_values, points, expected)


def counterexample_tvc(c1: float = 1.0, c2: float = 2.0, eps: float = 0.1) -> Counterexample:
    """Two-sided treatments vs control (control = 3), ``T_i3 = |x_i - x_3|``.

    Along ``g_13`` the step-down decision on H_13 goes accept, reject,
    accept at ``a = 0``, ``(C_1 + eps)/2`` and ``(C_1 + eps)/2 + 2*eps``.
    """
    if not 0 < c1 < c2:
        raise ValueError("need 0 < c1 < c2")
    a1 = (c1 + eps) / 2
    a2 = a1 + 2 * eps
    if not (2 * a2 <= c2 and eps > 0):
        raise ValueError("eps too large for the construction")
    family = HypothesisFamily("tvc", 3, sided="two")
    x = SampleMatrix([0.0, c2 + a1 + eps, 0.0])
    g = direction_vector(x, (1, 3))
    a_values = (0.0, a1, a2)
    points = [shift(x, g, a) for a in a_values]
    expected = [
        {(1, 3): False, (2, 3): True},
        {(1, 3): True, (2, 3): True},
        {(1, 3): False, (2, 3): False},
    ]
    return Counterexample("figure2", family, CriticalValues((c1, c2)), g, a_values, points, expected)


def tvc_construction_fits_all_pairwise(criticals: CriticalValues) -> bool:
    c1, c2, c3 = criticals.values[:3]
    return c1 + 2 * c2 > 2 * c3


def counterexample_all_pairwise(criticals: CriticalValues = CriticalValues((1.0, 2.0, 2.4)),
                                eps: float = 0.1) -> Counterexample:
    """The treatments-vs-control construction transplanted to all pairs of three.

    Only built when ``C_1 + 2*C_2 > 2*C_3``.
    """
    if len(criticals) != 3:
        raise ValueError("need exactly three critical values")
    if not tvc_construction_fits_all_pairwise(criticals):
        raise ValueError("construction requires C_1 + 2*C_2 > 2*C_3")
    c1, c2, c3 = criticals.values
    a1 = (c1 + eps) / 2
    delta = min(eps, (c2 - c1 - eps) / 2)
    if delta <= 0:
        raise ValueError("eps too large for these critical values")
    a2 = a1 + delta
    d = c2 + a1 + delta / 2
    family = HypothesisFamily("all-pairwise", 3, sided="two")
    x = SampleMatrix([0.0, d, 0.0])
    g = direction_vector(x, (1, 3))
    a_values = (0.0, a1, a2)
    points = [shift(x, g, a) for a in a_values]
    expected = [
        {(1, 2): True, (1, 3): False, (2, 3): True},
        {(1, 2): True, (1, 3): True, (2, 3): True},
        {(1, 2): True, (1, 3): False, (2, 3): False},
    ]
    return Counterexample("figure2-all-pairwise", family, criticals, g, a_values, points, expected)


BUILTINS = {
    "figure1": counterexample_change_point,
    "figure2": counterexample_tvc,
    "figure2-all-pairwise": counterexample_all_pairwise,
}


@dataclass
class AuditResult:
    """Outcome of one ray scan, serializable for reports."""

    procedure: str
    family: HypothesisFamily
    data: Data
    direction: DirectionVector
    grid: list[float]
    pattern: list[bool]
    violation: Violation | None

    def to_dict(self) -> dict:
        values = self.data.counts if isinstance(self.data, ContingencyTable) else self.data.values
        return {
            "procedure": self.procedure,
            "family": self.family.as_dict(),
            "model": self.data.model,
            "data": values.tolist(),
            "ray": self.direction.to_dict(),
            "grid": list(self.grid),
            "pattern": ["reject" if r else "accept" for r in self.pattern],
            "violation": self.violation.to_dict() if self.violation else None,
        }


def audit_counterexample(cx: Counterexample, procedure: str = "step-down",
                         grid: Sequence[float] | None = None) -> AuditResult:
    """Scan a counterexample's ray with classic step-down or RSD."""
    proc = cx.step_down if procedure == "step-down" else cx.rsd
    grid = list(cx.a_values if grid is None else grid)
    pattern = ray_decisions(proc, cx.points[0], cx.direction, grid)
    return AuditResult(procedure, cx.family, cx.points[0], cx.direction, grid, pattern,
                       check_pattern(pattern, cx.family.sided))


# ------------------------------------------------------------------ #
# Randomized certification of the partition procedure
# ------------------------------------------------------------------ #

# (model, family shape, sidedness) combinations covered by an interval-property guarantee
CERTIFIED_CASES = [
    ("multinomial", "change-point", "one"),
    ("multinomial", "treatments-vs-control", "two"),
    ("multinomial", "all-pairwise", "two"),
    ("normal", "all-pairwise", "two"),
    ("normal", "change-point", "two"),
    ("normal", "treatments-vs-control", "two"),
    ("rank", "all-pairwise", "two"),
    ("rank", "change-point", "one"),
    ("rank", "treatments-vs-control", "two"),
]


@dataclass
class Instance:
    data: Data
    family: HypothesisFamily
    criticals: CriticalValues
    direction: DirectionVector
    grid: list[float]


def _random_criticals(rng: np.random.Generator, K: int, squared: bool) -> CriticalValues:
    alpha = float(rng.choice([0.05, 0.1, 0.2, 0.4]))
    cv = critical_values_bg(K, alpha)
    return CriticalValues(tuple(v * v for v in cv.values), "BG^2", alpha) if squared else cv


def random_instance(model: str, shape: str, sided: str, rng: np.random.Generator) -> Instance:
    """Draw data, family, constants and a ray for one certification scan."""
    k_max = 5 if shape == "all-pairwise" else 6
    k = int(rng.integers(3, k_max + 1))
    family = HypothesisFamily(shape, k, sided=sided)
    pair = family.pairs[int(rng.integers(len(family.pairs)))]
    squared = False
    if model == "normal":
        q = 1 if sided == "one" else int(rng.choice([1, 1, 2]))
        squared = q > 1
        scale = float(rng.uniform(0.5, 2.5))
        data = SampleMatrix(rng.normal(0.0, scale, size=(k, q)) + rng.normal(0, 1.5, size=(k, 1)))
        grid = list(np.linspace(-3 * scale, 3 * scale, 41))
    elif model == "rank":
        n = int(rng.integers(2, 7))
        shifts = rng.normal(0.0, 1.0, size=k)
        obs = rng.normal(size=(k, n)) + shifts[:, None]
        ranks = np.empty(k * n)
        ranks[np.argsort(obs.ravel(), kind="stable")] = np.arange(1, k * n + 1)
        data = SampleMatrix(ranks.reshape(k, n).mean(axis=1), kind="rank-means", n=n)
        half = n * k / 3.0
        grid = list(np.linspace(-half, half, 41))
    elif model == "multinomial":
        q = int(rng.integers(3, 5))
        probs = rng.dirichlet(np.ones(q) * 1.5, size=k)
        totals = rng.integers(15, 45, size=k)
        counts = np.array([rng.multinomial(t, p) for t, p in zip(totals, probs)], dtype=float)
        data = ContingencyTable(counts)
        i, j = pair
        lo = -min(counts[i - 1, 0], counts[j - 1, q - 1])
        hi = min(counts[i - 1, q - 1], counts[j - 1, 0])
        grid = [float(a) for a in np.arange(lo, hi + 1)]
    else:
        raise ValueError(f"unknown model {model!r}")
    return Instance(data, family, _random_criticals(rng, k - 1, squared),
                    direction_vector(data, pair), grid)


@dataclass
class CertificationReport:
    model: str
    shape: str
    sided: str
    instances: int = 0
    informative: int = 0  # scans whose decision changed along the ray
    violations: list[AuditResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "family": self.shape,
            "sided": self.sided,
            "instances": self.instances,
            "informative": self.informative,
            "violations": [v.to_dict() for v in self.violations],
        }


def _certify_chunk(args) -> CertificationReport:
    model, shape, sided, seeds = args
    report = CertificationReport(model, shape, sided)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        inst = random_instance(model, shape, sided, rng)
        h_fn = split_statistic(inst.data, sided)

        def proc(d, inst=inst, h_fn=h_fn):
            return rsd_run(d, inst.family, h_fn, inst.criticals, record_candidates=False)[1]

        pattern = ray_decisions(proc, inst.data, inst.direction, inst.grid)
        report.instances += 1
        report.informative += len(set(pattern)) > 1
        v = check_pattern(pattern, sided)
        if v is not None:
            report.violations.append(AuditResult("rsd", inst.family, inst.data, inst.direction,
                                                 inst.grid, pattern, v))
    return report


def certify(model: str, shape: str, sided: str, n_instances: int = 1000, seed: int = 0,
            workers: int = 1) -> CertificationReport:
    """Ray-scan the partition procedure on ``n_instances`` random instances.

    Instance ``t`` is seeded from child ``t`` of ``SeedSequence(seed)``, so
    results do not depend on ``workers``.
    """
    seeds = np.random.SeedSequence(seed).spawn(n_instances)
    if workers <= 1:
        return _certify_chunk((model, shape, sided, seeds))
    size = math.ceil(n_instances / workers)
    chunks = [(model, shape, sided, seeds[s:s + size]) for s in range(0, n_instances, size)]
    total = CertificationReport(model, shape, sided)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_certify_chunk, chunks):
            total.instances += part.instances
            total.informative += part.informative
            total.violations.extend(part.violations)
    return total
