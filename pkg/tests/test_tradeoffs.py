from pathlib import Path

import numpy as np
import numpy.typing as npt
import pytest

from fair_reductions.const import ConstraintKind, SolverPreset, SyntheticKind
from fair_reductions.dataset import (
    DatasetSchema,
    TrainingSet,
    fit_standardization,
    load_csv,
    split,
    standardize_features,
)
from fair_reductions.evaluate import headline_violation, metrics_of, predict_expected
from fair_reductions.expgrad import resolve_config, solve
from fair_reductions.gridsearch import default_grid_spec, grid_search, pareto_front, select_pareto
from fair_reductions.learners import LearnerConfig, cost_to_weighted, fit
from fair_reductions.moments import build_constraint_system, with_epsilon
from fair_reductions.reduction import misclassification_costs
from fair_reductions.synthetic import write_synthetic

SEED = 1
FRONTIER_TOLERANCE = 0.02


def _prepared(tmp_path: Path, kind: SyntheticKind, rows: int, schema: DatasetSchema) -> tuple[TrainingSet, TrainingSet]:
    path = tmp_path / f"{kind}.csv"
    write_synthetic(kind, rows, SEED, path)
    train, test = split(load_csv(path, schema), 0.75, SEED)
    standardization = fit_standardization(train)
    return standardize_features(train, standardization), standardize_features(test, standardization)


def _linf_to_polyline(point: tuple[float, float], polyline: npt.NDArray[np.float64]) -> float:
    if len(polyline) == 1:
        return float(np.abs(polyline[0] - point).max())

    steps = np.linspace(0.0, 1.0, 201)[:, None, None]
    samples = polyline[:-1] + steps * (polyline[1:] - polyline[:-1])
    return float(np.abs(samples - np.asarray(point)).max(axis=-1).min())


@pytest.mark.slow
@pytest.mark.parametrize("constraint", [ConstraintKind.DP, ConstraintKind.EO])
def test_tight_slack_halves_test_disparity(tmp_path: Path, constraint: ConstraintKind) -> None:
    schema = DatasetSchema(label_column="income", protected_column="sex", categorical_columns=["workclass", "race"])
    train, test = _prepared(tmp_path, SyntheticKind.ADULT, 5000, schema)
    learner = LearnerConfig(seed=SEED)

    baseline = fit(learner, train, cost_to_weighted(misclassification_costs(train)))
    unconstrained = metrics_of(baseline.predict(test.features), test)

    cs = with_epsilon(build_constraint_system(constraint, train), 0.001)
    result = solve(train, cs, resolve_config(train, cs, seed=SEED, learner=learner, preset=SolverPreset.PRACTICAL))
    fair = metrics_of(predict_expected(result.ensemble, test.features), test)

    assert headline_violation(constraint, fair) < 0.5 * headline_violation(constraint, unconstrained)
    assert fair.error <= unconstrained.error + 0.05


@pytest.mark.slow
def test_grid_frontier_tracks_expgrad_frontier(tmp_path: Path) -> None:
    schema = DatasetSchema(label_column="label", protected_column="group")
    train, test = _prepared(tmp_path, SyntheticKind.DISPARITY, 2000, schema)
    learner = LearnerConfig(seed=SEED)
    base = build_constraint_system(ConstraintKind.DP, train)

    expgrad_points = []
    for eps in np.geomspace(0.001, 0.1, 10):
        cs = with_epsilon(base, float(eps))
        result = solve(train, cs, resolve_config(train, cs, seed=SEED, learner=learner, preset=SolverPreset.PRACTICAL))
        metrics = metrics_of(predict_expected(result.ensemble, test.features), test)
        expgrad_points.append((metrics.dp_violation, metrics.error))

    polyline = np.array(pareto_front(expgrad_points, lambda p: (p[1], p[0])))
    low, high = polyline[0, 0] - FRONTIER_TOLERANCE, polyline[-1, 0] + FRONTIER_TOLERANCE

    grid = grid_search(train, base, default_grid_spec(train, base), learner, test=test)
    matched = [
        (r.test_violation, r.test_error)
        for r in select_pareto(grid)
        if r.test_violation is not None and r.test_error is not None and low <= r.test_violation <= high
    ]

    assert matched
    for point in matched:
        assert _linf_to_polyline(point, polyline) <= FRONTIER_TOLERANCE, point
