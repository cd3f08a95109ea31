"""Multiple testing of pairwise-difference hypotheses with the interval property.

Provides the residual-based step-down partition procedure (RSD), classic
step-down and step-up procedures, ray-scan audits of the interval
property, and a Monte Carlo harness comparing RSD with step-up.
"""

from .audit import (
    BUILTINS,
    CERTIFIED_CASES,
    audit_counterexample,
    certify,
    check_one_sided,
    check_pattern,
    check_two_sided,
    counterexample_all_pairwise,
    counterexample_change_point,
    counterexample_tvc,
    direction_vector,
    ray_decisions,
    shift,
)
from .decisions import DecisionReport
from .errors import DataError, DegenerateSampleError, DomainError
from .families import HypothesisFamily
from .io import RunSpec, emit_table, ingest_table
from .partition import (
    Partition,
    PartitionTrace,
    decisions_from_partition,
    dispersion_max,
    pool,
    rsd_run,
    split_statistic,
)
from .simulation import SimConfig, SimResult, simulate, table_runner
from .statistics import (
    ContingencyTable,
    CriticalValues,
    SampleMatrix,
    chisq_pair_stat,
    critical_values_bg,
    critical_values_bh,
    midranks,
    normal_h,
    rank_h,
    wmw_midrank_z,
)
from .stepwise import StatisticTable, pairwise_stats, step_down, step_up

__version__ = "0.1.0"
