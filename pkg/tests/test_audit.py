import numpy as np
import pytest

from intervalmt.audit import (
    BUILTINS,
    CERTIFIED_CASES,
    Violation,
    audit_counterexample,
    certify,
    check_one_sided,
    check_pattern,
    check_two_sided,
    counterexample_all_pairwise,
    counterexample_change_point,
    counterexample_tvc,
    direction_vector,
    tvc_construction_fits_all_pairwise,
    random_instance,
    ray_decisions,
    shift,
    valid_grid,
)
from intervalmt.decisions import DecisionReport
from intervalmt.errors import DomainError
from intervalmt.families import HypothesisFamily
from intervalmt.partition import rsd_run
from intervalmt.statistics import ContingencyTable, CriticalValues, SampleMatrix
from intervalmt.stepwise import pairwise_stats, step_down

TABLE1 = ContingencyTable([[15, 226, 4], [4, 226, 15], [6, 196, 43]])
TABLE2 = ContingencyTable([[16, 226, 3], [3, 226, 16], [6, 196, 43]])
CP3 = HypothesisFamily("change-point", 3, sided="one")
C_ONE = CriticalValues((1.645, 1.96))


# ---------------------------------------------------------------- directions


def test_multinomial_direction_layout():
    g = direction_vector(TABLE1, (1, 2))
    # +1 at (i-1)q+1 and jq, -1 at iq and (j-1)q+1 (1-based positions)
    expected = np.zeros(9)
    expected[[0, 5]] = 1
    expected[[2, 3]] = -1
    assert np.array_equal(g.g, expected)
    assert shift(TABLE1, g, 1.0) == TABLE2


def test_normal_and_rank_directions():
    g = direction_vector(SampleMatrix([[0, 0], [1, 1], [2, 2]]), (1, 3))
    assert g.g.tolist() == [-1, -1, 0, 0, 1, 1]
    r = SampleMatrix([2.0, 5.0, 3.5], kind="rank-means", n=2)
    assert direction_vector(r, (2, 3)).g.tolist() == [0, -1, 1]


def test_multinomial_rays_preserve_row_totals():
    g = direction_vector(TABLE1, (1, 3))
    for a in valid_grid(TABLE1, g, np.arange(-10, 11)):
        moved = shift(TABLE1, g, a)
        assert moved.counts.sum(axis=1).tolist() == [245, 245, 245]


def test_shift_outside_domain():
    g = direction_vector(TABLE1, (1, 2))
    with pytest.raises(DomainError, match="a=5"):
        shift(TABLE1, g, 5.0)
    assert 5.0 not in valid_grid(TABLE1, g, [0.0, 1.0, 5.0])
    assert ray_decisions(lambda d: _rsd_cp(d), TABLE1, g, [0.0, 1.0, 5.0], survey=True) == [True, True]
    with pytest.raises(DomainError):
        ray_decisions(lambda d: _rsd_cp(d), TABLE1, g, [0.0, 5.0])


# ---------------------------------------------------------------- ray scans


def _rsd_cp(data):
    return rsd_run(data, CP3, None, C_ONE)[1]


def _sd_cp(data):
    return step_down(pairwise_stats(data, CP3), C_ONE)


def test_rsd_ordinal_ray_monotone():
    g = direction_vector(TABLE1, (1, 2))
    pattern = ray_decisions(_rsd_cp, TABLE1, g, [0, 1, 2, 3])
    assert check_one_sided(pattern) is None


def test_step_down_ordinal_ray_violates():
    g = direction_vector(TABLE1, (1, 2))
    pattern = ray_decisions(_sd_cp, TABLE1, g, [0, 1])
    assert pattern == [True, False]
    assert check_one_sided(pattern) == Violation("one-sided", (1,))


def test_constant_procedure_constant_pattern():
    fam = HypothesisFamily("tvc", 3)

    def always(data):
        return DecisionReport("const", fam, {p: True for p in fam.pairs})

    x = SampleMatrix([0.0, 1.0, 2.0])
    assert ray_decisions(always, x, direction_vector(x, (1, 3)), np.linspace(0, 3, 7)) == [True] * 7


# ---------------------------------------------------------------- pattern checks


@pytest.mark.parametrize("pattern, expected", [
    ([False, False, True, True], None),
    ([True, False], (1,)),
    ([False], None),
    ([], None),
])
def test_check_one_sided(pattern, expected):
    v = check_one_sided(pattern)
    assert (v.indices if v else None) == expected


@pytest.mark.parametrize("pattern, expected", [
    ([False, True, False], (0, 1, 2)),
    ([True, False, True], None),
    ([False, False], None),
    ([True, True, False, False, True, True, False], (2, 4, 6)),
])
def test_check_two_sided(pattern, expected):
    v = check_two_sided(pattern)
    assert (v.indices if v else None) == expected


def test_check_pattern_dispatch():
    assert check_pattern([True, False], "one") is not None
    assert check_pattern([True, False], "two") is None


# ---------------------------------------------------------------- counterexamples


def test_change_point_counterexample_points():
    cx = counterexample_change_point()
    assert cx.points[0].values.ravel().tolist() == pytest.approx([0, 1.05, 3.10])
    assert cx.points[1].values.ravel().tolist() == pytest.approx([-0.2, 1.25, 3.10])
    stats = pairwise_stats(cx.points[1], cx.family, "difference").entries
    assert stats[(1, 2)] == pytest.approx(1.45) and stats[(2, 3)] == pytest.approx(1.85)
    for point, expected in zip(cx.points, cx.expected):
        assert cx.step_down(point).rejected == expected


def test_tvc_counterexample_points():
    cx = counterexample_tvc()
    assert [p.values.ravel().tolist() for p in cx.points] == [
        pytest.approx([0, 2.65, 0]), pytest.approx([-0.55, 2.65, 0.55]),
        pytest.approx([-0.75, 2.65, 0.75])]
    for point, expected in zip(cx.points, cx.expected):
        assert cx.step_down(point).rejected == expected


def test_all_pairwise_counterexample_points():
    cv = CriticalValues((1.0, 2.0, 2.4))
    assert tvc_construction_fits_all_pairwise(cv)
    cx = counterexample_all_pairwise(cv)
    for point, expected in zip(cx.points, cx.expected):
        assert cx.step_down(point).rejected == expected
    with pytest.raises(ValueError):
        counterexample_all_pairwise(CriticalValues((1.0, 2.0, 3.0)))


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_flag_step_down_but_not_rsd(name):
    cx = BUILTINS[name]()
    sd = audit_counterexample(cx, "step-down")
    assert sd.violation is not None
    rsd = audit_counterexample(cx, "rsd")
    assert rsd.violation is None
    dense = audit_counterexample(cx, "rsd", grid=np.linspace(0, max(cx.a_values) * 2, 81))
    assert dense.violation is None


def test_audit_result_serializes():
    d = audit_counterexample(counterexample_tvc(), "step-down").to_dict()
    assert d["pattern"] == ["accept", "reject", "accept"]
    assert d["violation"] == {"kind": "two-sided", "indices": [0, 1, 2]}
    assert d["ray"]["pair"] == [1, 3]


# ---------------------------------------------------------------- certification


@pytest.mark.parametrize("model, shape, sided", CERTIFIED_CASES)
def test_random_instances_are_valid(model, shape, sided):
    rng = np.random.default_rng(7)
    for _ in range(5):
        inst = random_instance(model, shape, sided, rng)
        assert inst.direction.pair in inst.family.pairs
        assert valid_grid(inst.data, inst.direction, inst.grid) == inst.grid


@pytest.mark.parametrize("model, shape, sided", CERTIFIED_CASES)
def test_certify_small_sample(model, shape, sided):
    rep = certify(model, shape, sided, n_instances=40, seed=11)
    assert rep.instances == 40
    assert rep.violations == []


def test_certify_detects_a_broken_procedure(monkeypatch):
    """The harness is not vacuous: swapping in step-down yields violations."""
    import intervalmt.audit as audit

    def fake_rsd_run(data, family, h_fn, criticals, record_candidates=True):
        K = len(family.pairs)
        cv = CriticalValues(criticals.values[-K:]) if len(criticals) >= K else criticals
        return None, step_down(pairwise_stats(data, family), cv)

    monkeypatch.setattr(audit, "rsd_run", fake_rsd_run)
    rep = certify("normal", "treatments-vs-control", "two", n_instances=300, seed=3)
    assert rep.violations


def test_certify_reproducible_across_workers():
    a = certify("normal", "change-point", "two", n_instances=20, seed=5)
    b = certify("normal", "change-point", "two", n_instances=20, seed=5, workers=2)
    assert (a.instances, a.informative, len(a.violations)) == (b.instances, b.informative,
                                                                len(b.violations))
