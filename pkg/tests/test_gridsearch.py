import numpy as np
import pytest

from fair_reductions.const import LearnerKind
from fair_reductions.dataset import TrainingSet
from fair_reductions.exceptions import ArgumentError, DegenerateDataError, LearnerError, NotApplicableError
from fair_reductions.gridsearch import (
    GridDimension,
    GridPointResult,
    GridSpec,
    default_grid_spec,
    dp3_adjust_costs,
    dp_adjust_costs,
    eo_adjust_costs,
    grid_search,
    pareto_front,
    select_pareto,
)
from fair_reductions.learners import ConstantClassifier, LearnerConfig, cost_to_weighted, fit
from fair_reductions.moments import build_dp, build_eo, build_tpr
from fair_reductions.reduction import LambdaVector, compute_costs, misclassification_costs

from .conftest import disparity_set

THRESHOLD = LearnerConfig(kind=LearnerKind.THRESHOLD_1D)


@pytest.fixture
def skewed() -> TrainingSet:
    return TrainingSet.from_arrays([0.0, 1.0, 2.0, 3.0], ["a", "a", "a", "b"], [0, 1, 0, 1])


def _result(error: float, violation: float) -> GridPointResult:
    return GridPointResult((0.0,), ConstantClassifier(n_features=1), error, violation)


def test_grid_dimension() -> None:
    assert GridDimension("d", -2.0, 2.0, 5).values == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert GridDimension("d", 0.5, 3.0, 1).values == [0.5]

    with pytest.raises(ArgumentError):
        GridDimension("d", 1.0, -1.0, 3)

    with pytest.raises(ArgumentError):
        GridDimension("d", -1.0, 1.0, 0)


def test_grid_spec_points_are_row_major() -> None:
    spec = GridSpec([GridDimension("x", 0.0, 1.0, 2), GridDimension("y", 0.0, 2.0, 3)])

    assert spec.labels == ["x", "y"]
    assert spec.points() == [(0.0, 0.0), (0.0, 1.0), (0.0, 2.0), (1.0, 0.0), (1.0, 1.0), (1.0, 2.0)]


def test_default_grid_spec(d4: TrainingSet, d6: TrainingSet) -> None:
    spec = default_grid_spec(d4, build_dp(d4))

    assert spec.labels == ["delta_a"]
    (dimension,) = spec.dimensions
    assert (dimension.lo, dimension.hi, dimension.points) == (-4.0, 4.0, 33)

    assert default_grid_spec(d6, build_eo(d6), lo=-1.0, hi=1.0, points=5).labels == ["delta_a,0", "delta_a,1"]


def test_grid_not_applicable(d6: TrainingSet) -> None:
    four_groups = TrainingSet.from_arrays([0.0, 1.0, 2.0, 3.0], ["a", "b", "c", "d"], [0, 1, 0, 1])

    with pytest.raises(NotApplicableError):
        default_grid_spec(four_groups, build_dp(four_groups))

    with pytest.raises(NotApplicableError):
        default_grid_spec(d6, build_tpr(d6))


def test_dp_adjust_costs(skewed: TrainingSet) -> None:
    costs = dp_adjust_costs(skewed, 0.2)
    base = misclassification_costs(skewed)

    np.testing.assert_allclose(costs.c1 - base.c1, [0.2, 0.2, 0.2, -0.6])
    assert costs.c0.tolist() == base.c0.tolist()


def test_dp_adjustment_is_a_lagrangian_cost(skewed: TrainingSet) -> None:
    cs = build_dp(skewed)
    delta = 0.4
    # collapsed multipliers lambda_a = p_a delta_a, split into the + and - constraints
    values = np.zeros(cs.n_constraints)
    values[cs.constraint_position(("a", "+"))] = 0.75 * delta
    values[cs.constraint_position(("b", "-"))] = 0.75 * delta

    lagrangian_costs = compute_costs(skewed, cs, LambdaVector(values, 10.0))
    adjusted = dp_adjust_costs(skewed, delta)

    np.testing.assert_allclose(lagrangian_costs.c1, adjusted.c1, atol=1e-12)
    np.testing.assert_allclose(lagrangian_costs.c0, adjusted.c0, atol=1e-12)


def test_dp3_adjust_costs() -> None:
    ts = TrainingSet.from_arrays(np.arange(6.0), ["a", "a", "a", "b", "b", "c"], [0, 1, 0, 1, 0, 1])
    adjustment = dp3_adjust_costs(ts, 0.1, 0.3).c1 - misclassification_costs(ts).c1

    np.testing.assert_allclose(adjustment, [0.1, 0.1, 0.1, 0.3, 0.3, -(0.5 * 0.1 + 2 / 6 * 0.3) * 6])
    assert float(adjustment.sum()) == pytest.approx(0.0)


def test_eo_adjust_costs(d6: TrainingSet) -> None:
    adjustment = eo_adjust_costs(d6, 0.1, 0.0).c1 - misclassification_costs(d6).c1

    # (a, 0) rows are 0 and 4, the only (b, 0) row is 2
    np.testing.assert_allclose(adjustment, [0.1, 0.0, -0.2, 0.0, 0.1, 0.0], atol=1e-12)


def test_eo_adjust_costs_needs_all_cells(d4: TrainingSet) -> None:
    with pytest.raises(DegenerateDataError):
        eo_adjust_costs(d4, 0.1, 0.1)


def test_single_zero_point_is_unconstrained_fit(disparity: TrainingSet) -> None:
    spec = GridSpec([GridDimension("delta_a", 0.0, 0.0, 1)])
    (result,) = grid_search(disparity, build_dp(disparity), spec, THRESHOLD)

    plain = fit(THRESHOLD, disparity, cost_to_weighted(misclassification_costs(disparity)))
    assert result.classifier.key == plain.key
    assert result.adjustments == (0.0,)


def test_grid_reaches_zero_violation(d4: TrainingSet) -> None:
    cs = build_dp(d4)
    results = grid_search(d4, cs, default_grid_spec(d4, cs, lo=-2.0, hi=2.0, points=41), THRESHOLD)

    assert len(results) == 41
    assert min(r.train_violation for r in results) == 0.0
    assert [r.adjustments[0] for r in results][:3] == pytest.approx([-2.0, -1.9, -1.8])


def test_grid_reports_test_metrics() -> None:
    train, test = disparity_set(300), disparity_set(100, seed=9)
    cs = build_eo(train)
    results = grid_search(train, cs, default_grid_spec(train, cs, points=3), THRESHOLD, test=test)

    assert len(results) == 9
    for result in results:
        assert result.test_error is not None and 0 <= result.test_error <= 1
        assert result.test_violation is not None and 0 <= result.test_violation <= 1


def test_grid_jobs_do_not_change_results(disparity: TrainingSet) -> None:
    cs = build_dp(disparity)
    spec = default_grid_spec(disparity, cs, points=9)

    sequential = grid_search(disparity, cs, spec, THRESHOLD)
    threaded = grid_search(disparity, cs, spec, THRESHOLD, jobs=3)

    assert [r.classifier.key for r in sequential] == [r.classifier.key for r in threaded]
    assert [r.train_error for r in sequential] == [r.train_error for r in threaded]


def test_grid_learner_failure(d4: TrainingSet, monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(*args: object) -> None:
        raise RuntimeError("boom")

    monkeypatch.setattr("fair_reductions.gridsearch.fit", broken)
    cs = build_dp(d4)

    with pytest.raises(LearnerError):
        grid_search(d4, cs, default_grid_spec(d4, cs, points=3), THRESHOLD)


def test_grid_dimension_count_mismatch(d4: TrainingSet) -> None:
    spec = GridSpec([GridDimension("x", 0.0, 1.0, 2), GridDimension("y", 0.0, 1.0, 2)])

    with pytest.raises(ArgumentError):
        grid_search(d4, build_dp(d4), spec, THRESHOLD)


def test_select_pareto() -> None:
    results = [_result(0.2, 0.1), _result(0.1, 0.3), _result(0.3, 0.0), _result(0.25, 0.1), _result(0.2, 0.1)]
    front = select_pareto(results)

    assert [(r.train_error, r.train_violation) for r in front] == [(0.3, 0.0), (0.2, 0.1), (0.2, 0.1), (0.1, 0.3)]
    assert results[3] not in front


def test_select_pareto_empty() -> None:
    with pytest.raises(ArgumentError):
        select_pareto([])


def test_pareto_front_is_mutually_non_dominated() -> None:
    rng = np.random.default_rng(4)
    points = [(float(e), float(v)) for e, v in rng.random((40, 2)).round(2)]
    front = pareto_front(points, lambda p: p)

    for e, v in front:
        assert not any(o_e <= e and o_v <= v and (o_e < e or o_v < v) for o_e, o_v in points)

    for point in points:
        if point not in front:
            assert any(e <= point[0] and v <= point[1] for e, v in front)
