import itertools
import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from intervalmt.errors import DataError, DegenerateSampleError
from intervalmt.statistics import (
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

TABLE1 = [[15, 226, 4], [4, 226, 15], [6, 196, 43]]
TABLE2 = [[16, 226, 3], [3, 226, 16], [6, 196, 43]]


def wmw_oracle(row_a, row_b):
    """W from observation-level midranks, standardized without tie correction."""
    obs_a = [c for c, t in enumerate(row_a) for _ in range(int(t))]
    obs_b = [c for c, t in enumerate(row_b) for _ in range(int(t))]
    ranks = rankdata(obs_a + obs_b)
    w = ranks[len(obs_a):].sum()
    m, n = len(obs_a), len(obs_b)
    return (w - n * (m + n + 1) / 2) / math.sqrt(m * n * (m + n + 1) / 12)


# ---------------------------------------------------------------- WMW


def test_wmw_table1_pairs():
    assert wmw_midrank_z(TABLE1[0], TABLE1[1]) == pytest.approx(1.653, abs=1e-3)
    assert wmw_midrank_z(TABLE1[1], TABLE1[2]) == pytest.approx(2.006, abs=1e-3)


def test_wmw_table2_pairs():
    assert wmw_midrank_z(TABLE2[0], TABLE2[1]) == pytest.approx(1.954, abs=1e-3)
    assert wmw_midrank_z(TABLE2[1], TABLE2[2]) == pytest.approx(1.865, abs=1e-3)


def test_wmw_pooled_rows_fractional():
    pooled12 = np.mean(TABLE1[:2], axis=0)
    assert list(pooled12) == [9.5, 226.0, 9.5]
    assert wmw_midrank_z(pooled12, TABLE1[2]) == pytest.approx(2.78, abs=5e-3)
    pooled23 = np.mean(TABLE1[1:], axis=0)
    assert wmw_midrank_z(TABLE1[0], pooled23) == pytest.approx(2.603, abs=1e-3)


def test_wmw_identical_rows_zero():
    assert wmw_midrank_z([3, 5, 2], [3, 5, 2]) == 0.0


def test_wmw_matches_observation_level_oracle_all_small_tables():
    checked = 0
    cells = range(0, 9)
    for table in itertools.product(cells, repeat=6):
        if sum(table) > 8:
            continue
        a, b = table[:3], table[3:]
        if sum(a) == 0 or sum(b) == 0:
            continue
        assert wmw_midrank_z(a, b) == pytest.approx(wmw_oracle(a, b), abs=1e-12)
        checked += 1
    assert checked > 1000


def test_wmw_errors():
    with pytest.raises(DegenerateSampleError, match="degenerate sample"):
        wmw_midrank_z([0, 0, 0], [1, 2, 3])
    with pytest.raises(DataError):
        wmw_midrank_z([1, 2], [1, 2, 3])


# quarter counts keep fractional pooling in play without subnormal underflow
cell = st.integers(0, 200).map(lambda v: v / 4)


@given(st.data())
def test_wmw_antisymmetric(data):
    a = data.draw(st.lists(cell, min_size=2, max_size=5))
    b = data.draw(st.lists(cell, min_size=len(a), max_size=len(a)))
    assume(sum(a) > 0 and sum(b) > 0)
    assert wmw_midrank_z(a, b) == pytest.approx(-wmw_midrank_z(b, a), abs=1e-9)


def test_midranks():
    assert midranks([2, 3, 1]) == [1.5, 4.0, 6.0]


# ---------------------------------------------------------------- normal


def test_normal_h_example_values():
    assert normal_h(1, 1, (4 - 2 + 0) / 3, 3) == pytest.approx(0.29, abs=5e-3)
    assert normal_h(4, 1, -1 / 3, 3) == pytest.approx(3.75, abs=5e-3)
    assert normal_h(2.5, 1, 2.5, 4) == 0.0


def test_normal_h_sign_one_sided():
    assert normal_h(0.0, 1, 1.0, 1, sided="one") == pytest.approx(1 / math.sqrt(2))
    assert normal_h(1.0, 1, 0.0, 1, sided="one") == pytest.approx(-1 / math.sqrt(2))


def test_normal_h_quadratic_form():
    assert normal_h([1.0, 0.0], 1, [0.0, 1.0], 1) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        normal_h([1.0, 0.0], 1, [0.0, 1.0], 1, sided="one")
    with pytest.raises(DegenerateSampleError):
        normal_h(1.0, 0, 0.0, 1)


@given(st.floats(-100, 100), st.floats(-100, 100), st.integers(1, 20), st.integers(1, 20),
       st.floats(0.01, 100))
def test_normal_h_symmetric_and_scales(a, b, na, nb, c):
    h = normal_h(a, na, b, nb)
    assert h == pytest.approx(normal_h(b, nb, a, na))
    assert normal_h(c * a, na, c * b, nb) == pytest.approx(c * h, rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------- chi-square


def test_chisq_examples():
    assert chisq_pair_stat([1, 2], [1, 2]) == 0.0
    assert chisq_pair_stat([1, 0], [0, 1]) == 1.0
    assert chisq_pair_stat(3, 0) == 4.5
    with pytest.raises(DataError):
        chisq_pair_stat([1, 2], [1, 2, 3])


coord = st.integers(-4000, 4000).map(lambda v: v / 4)


@given(st.lists(coord, min_size=1, max_size=4), st.data())
def test_chisq_nonnegative_zero_iff_equal(x, data):
    y = data.draw(st.lists(coord, min_size=len(x), max_size=len(x)))
    v = chisq_pair_stat(x, y)
    assert v >= 0
    assert (v == 0) == (x == y)


# ---------------------------------------------------------------- ranks


def test_rank_h_hand_example():
    assert rank_h([1], [2], [3, 7], n=2, k=2, sided="one") == pytest.approx(-2.191, abs=1e-3)
    assert rank_h([1], [2], [3, 7], n=2, k=2) == pytest.approx(2.191, abs=1e-3)


def test_rank_h_equal_means_zero():
    assert rank_h([1], [2], [5, 5], n=2) == 0.0


def test_rank_h_errors():
    with pytest.raises(ValueError):
        rank_h([1], [1, 2], [3, 7], n=2)
    with pytest.raises(ValueError):
        rank_h([], [2], [3, 7], n=2)


@pytest.mark.parametrize("w_kind", ["printed", "permutation"])
def test_rank_h_permutation_oracle(w_kind):
    """k=2, n=3: every assignment of ranks 1..6, computed from the raw ranks."""
    k, n = 2, 3
    N = k * n
    w = None if w_kind == "printed" else n * k * (n * k + 1)
    w_used = k * (k * n + 1) if w is None else w
    values = []
    for group1 in itertools.combinations(range(1, N + 1), n):
        group2 = [r for r in range(1, N + 1) if r not in group1]
        sums = [sum(group1), sum(group2)]
        direct = (np.mean(group1) - np.mean(group2)) / math.sqrt(w_used * (2 / n) / 12)
        h = rank_h([1], [2], sums, n=n, k=k, sided="one", w=w)
        assert h == pytest.approx(direct, abs=1e-12)
        values.append(h)
    values = np.array(values)
    assert len(values) == 20
    assert values.mean() == pytest.approx(0.0, abs=1e-12)
    # exact permutation variance is 1 for the conventional constant, n for the printed one
    expected_var = 1.0 if w_kind == "permutation" else float(n)
    assert values.var() == pytest.approx(expected_var)


# ---------------------------------------------------------------- critical values


def oracle_bh(K, alpha):
    nd = NormalDist()
    return sorted(nd.inv_cdf(1 - (K + 1 - i) * (alpha / 2) / K) for i in range(1, K + 1))


def oracle_bg(K, alpha):
    nd = NormalDist()
    return sorted(nd.inv_cdf(1 - i * (alpha / 2) / (K + 1 - i * (1 - alpha / 2))) for i in range(1, K + 1))


def test_bg_example():
    cv = critical_values_bg(3, 0.05)
    assert cv.values == pytest.approx([1.48, 1.97, 2.40], abs=5e-3)
    assert cv.source == "BG"


def test_bh_example():
    assert critical_values_bh(3, 0.05).values == pytest.approx([1.960, 2.128, 2.394], abs=5e-3)


def test_single_constant():
    assert critical_values_bh(1, 0.05).values == pytest.approx([1.959964], abs=1e-6)
    # the step-down formula at K=1 is Phi^-1(1 - 0.025/1.025), not Phi^-1(0.975)
    expected = NormalDist().inv_cdf(1 - 0.025 / 1.025)
    assert critical_values_bg(1, 0.05).values == pytest.approx([expected], abs=1e-9)
    assert expected == pytest.approx(1.9705, abs=1e-4)


@settings(max_examples=60)
@given(st.integers(1, 200), st.floats(0.001, 0.5))
def test_critical_values_match_oracle(K, alpha):
    assert critical_values_bh(K, alpha).values == pytest.approx(oracle_bh(K, alpha), abs=1e-7)
    assert critical_values_bg(K, alpha).values == pytest.approx(oracle_bg(K, alpha), abs=1e-7)


@settings(max_examples=60)
@given(st.integers(1, 100), st.floats(0.001, 0.4), st.floats(0.001, 0.1))
def test_critical_values_decrease_in_alpha(K, alpha, bump):
    for gen in (critical_values_bh, critical_values_bg):
        lo, hi = gen(K, alpha).values, gen(K, alpha + bump).values
        assert all(b < a for a, b in zip(lo, hi))


def test_critical_value_errors():
    with pytest.raises(ValueError):
        critical_values_bh(0, 0.05)
    with pytest.raises(ValueError):
        critical_values_bg(3, 1.5)
    with pytest.raises(ValueError):
        CriticalValues((2.0, 1.0))
    with pytest.raises(ValueError):
        CriticalValues(())


def test_critical_values_parse_and_index():
    cv = CriticalValues.parse("1.645, 1.96")
    assert len(cv) == 2 and cv[1] == 1.645 and cv[2] == 1.96
    with pytest.raises(IndexError):
        cv[0]


# ---------------------------------------------------------------- containers


def test_contingency_validation():
    t = ContingencyTable(TABLE1, ("Placebo", "Dose 1", "Dose 2"))
    assert t.k == 3 and t.q == 3
    assert list(t.counts.sum(axis=1)) == [245, 245, 245]
    with pytest.raises(DataError, match="row 2, column 3"):
        ContingencyTable([[1, 2, 3], [1, 2, -1]])
    with pytest.raises(DataError):
        ContingencyTable([[1, 2, 3]])


def test_sample_matrix_validation():
    s = SampleMatrix([1, 4, -2, 0])
    assert (s.k, s.q, s.model) == (4, 1, "normal")
    r = SampleMatrix([1.5, 3.5], kind="rank-means", n=2)
    assert r.model == "rank" and list(r.rank_sums) == [3.0, 7.0]
    with pytest.raises(DataError):
        SampleMatrix([1.0, float("nan")])
    with pytest.raises(DataError):
        SampleMatrix([1.5, 3.5], kind="rank-means")
