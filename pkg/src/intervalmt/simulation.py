"""Monte Carlo comparison of RSD and BH step-up for many treatments vs one control.

Each iteration draws one observation per population, runs both procedures
on the two-sided treatments-vs-control family, and tallies Type I errors
(true hypotheses rejected), Type II errors (false hypotheses accepted) and
the false discovery proportion (0 when nothing is rejected).

The RSD path here is a batched equivalent of ``partition.rsd_run`` for
this one family and statistic; the test suite checks the two agree
draw by draw.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .statistics import critical_values_bg, critical_values_bh

METRICS = ("type1", "type2", "total", "fdr")


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``blocks`` holds ``((first, last), mean)`` entries over 1-based
    treatment indices (inclusive); unlisted treatments and the control
    (population ``k``) have mean ``control_mean``.  ``noise_sd`` is the
    known per-observation standard deviation.
    """

    k: int = 101
    blocks: tuple = ()
    control_mean: float = 0.0
    iterations: int = 5000
    rsd_alpha: float = 0.05
    su_alpha: float = 0.07
    seed: int = 0
    noise_sd: float = 1.0
    chunk_size: int = 1000

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least one treatment and a control")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be positive")
        blocks = tuple(((int(r[0]), int(r[1])), float(m)) for r, m in self.blocks)
        covered = set()
        for (lo, hi), _ in blocks:
            if not 1 <= lo <= hi <= self.k - 1:
                raise ValueError(f"treatment range {lo}-{hi} outside 1..{self.k - 1}")
            span = set(range(lo, hi + 1))
            if covered & span:
                raise ValueError(f"treatment range {lo}-{hi} overlaps another block")
            covered |= span
        object.__setattr__(self, "blocks", blocks)

    def treatment_means(self) -> np.ndarray:
        mu = np.full(self.k - 1, self.control_mean, dtype=float)
        for (lo, hi), m in self.blocks:
            mu[lo - 1:hi] = m
        return mu

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blocks"] = [[list(r), m] for r, m in self.blocks]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        d["blocks"] = tuple((tuple(r), m) for r, m in d.get("blocks", ()))
        return cls(**d)


@dataclass
class ProcedureMetrics:
    """Averages over iterations with their Monte Carlo standard errors."""

    type1: float
    type2: float
    total: float
    fdr: float
    type1_se: float
    type2_se: float
    total_se: float
    fdr_se: float

    def value(self, metric: str) -> float:
        return getattr(self, metric)

    def se(self, metric: str) -> float:
        return getattr(self, metric + "_se")


@dataclass
class SimResult:
    config: SimConfig
    rsd: ProcedureMetrics
    su: ProcedureMetrics
    total_diff: float  # mean of (RSD total - SU total), paired by iteration
    total_diff_se: float

    def procedure(self, name: str) -> ProcedureMetrics:
        return {"rsd": self.rsd, "su": self.su}[name]

    def to_dict(self) -> dict:
        # standard errors are undefined (NaN) for a single iteration; emit null
        def clean(d):
            return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}

        return {
            "config": self.config.to_dict(),
            "rsd": clean(asdict(self.rsd)),
            "su": clean(asdict(self.su)),
            **clean({"total_diff": self.total_diff, "total_diff_se": self.total_diff_se}),
        }


def rsd_tvc_batch(z: np.ndarray, criticals: np.ndarray) -> np.ndarray:
    """RSD rejections for a batch of standardized treatments-vs-control draws.

    ``z`` has shape (iterations, k) with the control in the last column and
    unit noise variance.  ``criticals`` is increasing with length >= k-1.
    At each stage the block holding the control peels off the treatment
    maximizing ``|z_i - mean(rest)| / sqrt(1 + 1/|rest|)``.
    Returns a boolean (iterations, k-1) rejection matrix.
    """
    n_it, k = z.shape
    K = len(criticals)
    if K < k - 1:
        raise ValueError(f"need at least {k - 1} critical values, got {K}")
    treat = z[:, :k - 1]
    in_block = np.ones((n_it, k - 1), dtype=bool)
    block_sum = z.sum(axis=1)
    block_size = np.full(n_it, float(k))
    active = np.ones(n_it, dtype=bool)
    rows = np.arange(n_it)
    for stage in range(1, k):
        threshold = criticals[K - stage]
        rest = block_size - 1.0
        rest_mean = (block_sum[:, None] - treat) / rest[:, None]
        h = np.abs(treat - rest_mean) / np.sqrt(1.0 + 1.0 / rest)[:, None]
        h = np.where(in_block, h, -np.inf)
        best = h.argmax(axis=1)
        split = active & (h[rows, best] > threshold)
        if not split.any():
            break
        hit = rows[split]
        in_block[hit, best[split]] = False
        block_sum[hit] -= treat[hit, best[split]]
        block_size[hit] -= 1.0
        active = split
    return ~in_block


def step_up_tvc_batch(z: np.ndarray, criticals: np.ndarray) -> np.ndarray:
    """BH-type step-up on ``|z_i - z_k| / sqrt(2)`` for a batch of draws."""
    n_it, k = z.shape
    K = k - 1
    if len(criticals) != K:
        raise ValueError(f"need exactly {K} critical values, got {len(criticals)}")
    t = np.abs(z[:, :K] - z[:, [K]]) / math.sqrt(2.0)
    order = np.argsort(t, axis=1, kind="stable")
    ranked = np.take_along_axis(t, order, axis=1)
    exceed = ranked > criticals[None, :]
    any_exceed = exceed.any(axis=1)
    first = np.where(any_exceed, exceed.argmax(axis=1), K)
    position = np.empty_like(order)
    np.put_along_axis(position, order, np.arange(K)[None, :].repeat(n_it, axis=0), axis=1)
    return position >= first[:, None]


def _tally(rejected: np.ndarray, null: np.ndarray):
    type1 = (rejected & null).sum(axis=1).astype(float)
    type2 = (~rejected & ~null).sum(axis=1).astype(float)
    fdp = type1 / np.maximum(rejected.sum(axis=1), 1)
    return type1, type2, fdp


def _summarize(type1, type2, fdp) -> ProcedureMetrics:
    total = type1 + type2
    n = len(type1)

    def se(v):
        return float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")

    return ProcedureMetrics(float(type1.mean()), float(type2.mean()), float(total.mean()),
                            float(fdp.mean()), se(type1), se(type2), se(total), se(fdp))


def simulate(config: SimConfig) -> SimResult:
    """Run both procedures on ``config.iterations`` independent draws.

    Draws are generated in chunks, chunk ``c`` from child ``c`` of
    ``SeedSequence(config.seed)``; results are reproducible bit for bit.
    """
    k = config.k
    mu = np.append(config.treatment_means(), config.control_mean)
    null = config.treatment_means() == config.control_mean
    rsd_c = np.asarray(critical_values_bg(k - 1, config.rsd_alpha).values)
    su_c = np.asarray(critical_values_bh(k - 1, config.su_alpha).values)

    n_chunks = math.ceil(config.iterations / config.chunk_size)
    children = np.random.SeedSequence(config.seed).spawn(n_chunks)
    parts = {"rsd": [], "su": []}
    for c, child in enumerate(children):
        size = min(config.chunk_size, config.iterations - c * config.chunk_size)
        rng = np.random.default_rng(child)
        x = mu + config.noise_sd * rng.standard_normal((size, k))
        z = x / config.noise_sd
        parts["rsd"].append(_tally(rsd_tvc_batch(z, rsd_c), null[None, :]))
        parts["su"].append(_tally(step_up_tvc_batch(z, su_c), null[None, :]))

    stacked = {name: [np.concatenate(col) for col in zip(*chunks)] for name, chunks in parts.items()}
    diff = (stacked["rsd"][0] + stacked["rsd"][1]) - (stacked["su"][0] + stacked["su"][1])
    diff_se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else float("nan")
    return SimResult(config, _summarize(*stacked["rsd"]), _summarize(*stacked["su"]),
                     float(diff.mean()), diff_se)


# ------------------------------------------------------------------ #
# Published reference tables
# ------------------------------------------------------------------ #

_BLOCK_MEANS = [
    (0, 0, 0), (0, 0, -2), (0, 0, -4), (0, 2, -2), (0, 2, 2), (0, 2, -4), (0, 2, 4),
    (0, 4, -4), (0, 4, 4), (2, 2, -2), (2, 2, 2), (2, 2, -4), (2, 2, 4), (2, 4, -4),
    (2, 4, 4), (4, 4, -4), (4, 4, 4),
]

# type I (RSD, SU), type II (RSD, SU), total (RSD, SU), FDR (RSD, SU)
_TABLE5_VALUES = [
    (0.1, 0.7, 0.0, 0.0, 0.1, 0.7, 0.048, 0.045),
    (0.1, 0.7, 3.5, 4.4, 3.6, 5.1, 0.046, 0.050),
    (0.3, 0.8, 0.0, 0.8, 0.4, 1.6, 0.051, 0.054),
    (0.3, 0.7, 6.0, 8.8, 6.2, 9.5, 0.045, 0.044),
    (0.2, 0.8, 6.8, 8.5, 7.0, 9.2, 0.048, 0.044),
    (0.4, 1.0, 2.7, 4.6, 3.1, 5.6, 0.049, 0.054),
    (0.4, 0.8, 2.7, 4.8, 3.2, 5.6, 0.048, 0.048),
    (0.6, 0.9, 0.0, 1.0, 0.6, 1.9, 0.050, 0.052),
    (0.6, 0.9, 0.0, 1.1, 0.6, 2.0, 0.049, 0.050),
    (0.4, 0.9, 8.1, 12.8, 8.5, 13.7, 0.045, 0.048),
    (0.4, 0.9, 10.0, 12.3, 10.3, 13.2, 0.055, 0.045),
    (0.6, 0.9, 5.3, 8.2, 5.9, 9.2, 0.051, 0.048),
    (0.6, 0.9, 5.3, 8.6, 5.9, 9.4, 0.034, 0.047),
    (0.7, 1.1, 2.3, 4.6, 3.0, 5.7, 0.049, 0.052),
    (0.7, 1.0, 2.3, 4.7, 3.0, 5.7, 0.049, 0.049),
    (0.8, 1.2, 0.0, 1.1, 0.8, 2.3, 0.048, 0.050),
    (0.8, 1.3, 0.0, 1.3, 0.9, 2.6, 0.050, 0.055),
]

_TABLE6_VALUES = [
    (0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.031, 0.038),
    (0.1, 0.7, 6.1, 6.9, 6.2, 7.6, 0.029, 0.046),
    (0.3, 0.8, 0.0, 0.9, 0.3, 1.8, 0.031, 0.051),
    (0.2, 0.8, 9.6, 13.7, 9.8, 14.5, 0.027, 0.043),
    (0.2, 0.8, 12.1, 13.0, 12.3, 13.8, 0.037, 0.043),
    (0.4, 1.1, 4.5, 6.7, 4.9, 7.8, 0.030, 0.051),
    (0.4, 1.0, 4.6, 6.9, 5.0, 7.9, 0.029, 0.048),
    (0.5, 1.4, 0.0, 1.2, 0.6, 2.6, 0.030, 0.056),
    (0.5, 1.3, 0.0, 1.3, 0.6, 2.6, 0.030, 0.053),
    (0.3, 1.0, 13.3, 19.6, 13.6, 20.6, 0.028, 0.045),
    (0.3, 1.0, 19.2, 18.8, 19.5, 19.7, 0.058, 0.040),
    (0.5, 1.0, 9.4, 12.1, 9.9, 13.1, 0.034, 0.045),
    (0.5, 1.0, 9.4, 12.5, 10.0, 13.5, 0.034, 0.045),
    (0.6, 1.3, 3.8, 6.5, 4.5, 7.8, 0.030, 0.048),
    (0.6, 1.2, 3.8, 6.7, 4.5, 7.9, 0.029, 0.046),
    (0.8, 1.4, 0.0, 1.3, 0.8, 2.7, 0.030, 0.047),
    (0.8, 1.6, 0.0, 1.4, 0.8, 3.0, 0.030, 0.052),
]


@dataclass(frozen=True)
class TableSpec:
    number: int
    block_size: int
    rsd_alpha: float
    su_alpha: float
    values: list

    def published(self, row: int) -> dict[str, dict[str, float]]:
        v = self.values[row - 1]
        return {
            "rsd": dict(zip(METRICS, (v[0], v[2], v[4], v[6]))),
            "su": dict(zip(METRICS, (v[1], v[3], v[5], v[7]))),
        }

    def means(self, row: int) -> tuple[float, float, float]:
        return tuple(float(m) for m in _BLOCK_MEANS[row - 1])


TABLES = {
    5: TableSpec(5, 5, 0.05, 0.07, _TABLE5_VALUES),
    6: TableSpec(6, 8, 0.03, 0.07, _TABLE6_VALUES),
}
N_ROWS = len(_BLOCK_MEANS)

# Table means are in units of the standard deviation of a treatment-minus-control
# difference, i.e. one observation has variance 1/2.
TABLE_NOISE_SD = math.sqrt(0.5)


def table_config(table: int, row: int, iterations: int = 5000, seed: int = 0) -> SimConfig:
    spec = _table(table)
    if not 1 <= row <= N_ROWS:
        raise ValueError(f"table {table} has rows 1..{N_ROWS}, got {row}")
    b = spec.block_size
    blocks = tuple(((t * b + 1, (t + 1) * b), m) for t, m in enumerate(spec.means(row)) if m != 0)
    row_seed = int(np.random.SeedSequence([seed, table, row]).generate_state(1, np.uint32)[0])
    return SimConfig(k=101, blocks=blocks, iterations=iterations, rsd_alpha=spec.rsd_alpha,
                     su_alpha=spec.su_alpha, seed=row_seed, noise_sd=TABLE_NOISE_SD)


def _table(table: int) -> TableSpec:
    if table not in TABLES:
        raise ValueError(f"unknown table {table}; expected one of {sorted(TABLES)}")
    return TABLES[table]


@dataclass
class RowComparison:
    table: int
    row: int
    means: tuple[float, float, float]
    result: SimResult
    published: dict[str, dict[str, float]]
    error_tol_floor: float = 0.1
    fdr_tol: float = 0.01

    def tolerance(self, procedure: str, metric: str) -> float:
        """``max(3*MCSE, 0.1)`` for error counts, a fixed band for FDR."""
        if metric == "fdr":
            return self.fdr_tol
        return max(3 * self.result.procedure(procedure).se(metric), self.error_tol_floor)

    def difference(self, procedure: str, metric: str) -> float:
        return self.result.procedure(procedure).value(metric) - self.published[procedure][metric]

    def within(self, procedure: str, metric: str) -> bool:
        return abs(self.difference(procedure, metric)) <= self.tolerance(procedure, metric)

    def failures(self) -> list[tuple[str, str]]:
        return [(p, m) for p in ("rsd", "su") for m in METRICS if not self.within(p, m)]

    def rsd_not_worse(self) -> bool:
        """RSD total errors <= SU total errors, up to 3 paired standard errors."""
        return self.result.total_diff <= max(3 * self.result.total_diff_se, 0.0)

    def csv_row(self) -> dict:
        out = {"table": self.table, "row": self.row}
        out.update({f"mean_block{t + 1}": m for t, m in enumerate(self.means)})
        for metric in METRICS:
            for proc in ("rsd", "su"):
                pm = self.result.procedure(proc)
                out[f"{proc}_{metric}"] = pm.value(metric)
                out[f"{proc}_{metric}_mcse"] = pm.se(metric)
                out[f"{proc}_{metric}_published"] = self.published[proc][metric]
        return out


def table_runner(table: int, rows=None, iterations: int = 5000, seed: int = 0) -> list[RowComparison]:
    """Simulate the requested rows (1-based; default all) of a reference table."""
    spec = _table(table)
    rows = list(range(1, N_ROWS + 1)) if rows is None else list(rows)
    out = []
    for row in rows:
        cfg = table_config(table, row, iterations, seed)
        out.append(RowComparison(table, row, spec.means(row), simulate(cfg), spec.published(row)))
    return out


def format_comparison(rows: list[RowComparison]) -> str:
    """Side-by-side simulated vs published values in the reference layout."""
    if not rows:
        return "(no rows)"
    head = f"{'row':>3} {'means':>17} |"
    for metric in METRICS:
        head += f" {metric:^27} |"
    lines = [head, " " * 23 + "|" + "  RSD sim/pub   SU sim/pub    |" * len(METRICS)]
    for rc in rows:
        line = f"{rc.row:>3} {' '.join(f'{m:5.2f}' for m in rc.means):>17} |"
        for metric in METRICS:
            fmt = "{:.3f}" if metric == "fdr" else "{:.2f}"
            cells = []
            for proc in ("rsd", "su"):
                sim = fmt.format(rc.result.procedure(proc).value(metric))
                pub = fmt.format(rc.published[proc][metric])
                flag = "" if rc.within(proc, metric) else "*"
                cells.append(f"{sim}/{pub}{flag}")
            line += f" {cells[0]:>13} {cells[1]:>13} |"
        lines.append(line)
    lines.append("(* outside tolerance)")
    return "\n".join(lines)
