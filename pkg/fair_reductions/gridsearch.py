"""Grid search over collapsed cost adjustments for binary (or three-valued DP) protected attributes.

Each grid point fixes per-group adjustments delta added to the cost of predicting 1, with the
remaining adjustments derived from the balance identity sum_a p_a delta_a = 0 (per label for EO).
One weighted fit per point yields a deterministic classifier.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
import functools
import itertools
import logging
from typing import TypeVar

import numpy as np
import numpy.typing as npt

from .const import DEFAULT_GRID_POINTS, ConstraintKind
from .dataset import TrainingSet
from .evaluate import headline_violation, metrics_of
from .exceptions import ArgumentError, DegenerateDataError, FairReductionsError, LearnerError, NotApplicableError
from .learners import BaseClassifier, LearnerConfig, cost_to_weighted, fit
from .moments import ConstraintSystem, rho_bound
from .reduction import CostPairSet, misclassification_costs
from .runner import run_bounded

_LOGGER = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class GridDimension:
    label: str
    lo: float
    hi: float
    points: int

    def __post_init__(self) -> None:
        if self.points < 1:
            raise ArgumentError(f"grid dimension {self.label!r} needs at least one point")

        if self.lo > self.hi:
            raise ArgumentError(f"grid dimension {self.label!r} has lo {self.lo} above hi {self.hi}")

    @property
    def values(self) -> list[float]:
        if self.points == 1:
            return [self.lo]

        return [float(v) for v in np.linspace(self.lo, self.hi, self.points)]


@dataclass(frozen=True)
class GridSpec:
    dimensions: list[GridDimension]

    def __post_init__(self) -> None:
        if not self.dimensions:
            raise ArgumentError("grid spec needs at least one dimension")

    @property
    def labels(self) -> list[str]:
        return [d.label for d in self.dimensions]

    def points(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*(d.values for d in self.dimensions)))


@dataclass(frozen=True, eq=False)
class GridPointResult:
    adjustments: tuple[float, ...]
    classifier: BaseClassifier
    train_error: float
    train_violation: float
    test_error: float | None = None
    test_violation: float | None = None


def _group_probs(ts: TrainingSet, arity: int) -> list[float]:
    if len(ts.attribute_values) != arity:
        raise NotApplicableError(
            f"this grid needs exactly {arity} protected values, got {len(ts.attribute_values)}; "
            "grid search is not feasible for larger protected attributes"
        )

    return [float(ts.group_mask(a).mean()) for a in ts.attribute_values]


def _with_predict_one_adjustment(ts: TrainingSet, adjustment: npt.NDArray[np.float64]) -> CostPairSet:
    base = misclassification_costs(ts)
    return CostPairSet(c0=base.c0, c1=base.c1 + adjustment)


def dp_adjust_costs(ts: TrainingSet, delta_a: float) -> CostPairSet:
    """C1 gains delta_A; the second group's delta is -p_a delta_a / p_a'."""
    p_a, p_b = _group_probs(ts, 2)
    deltas = {ts.attribute_values[0]: delta_a, ts.attribute_values[1]: -p_a * delta_a / p_b}
    return _with_predict_one_adjustment(ts, np.array([deltas[a] for a in ts.protected.tolist()]))


def dp3_adjust_costs(ts: TrainingSet, delta_a: float, delta_a2: float) -> CostPairSet:
    """Three groups: the third adjustment is fixed by p_1 delta_1 + p_2 delta_2 + p_3 delta_3 = 0."""
    p_1, p_2, p_3 = _group_probs(ts, 3)
    first, second, third = ts.attribute_values
    deltas = {first: delta_a, second: delta_a2, third: -(p_1 * delta_a + p_2 * delta_a2) / p_3}
    return _with_predict_one_adjustment(ts, np.array([deltas[a] for a in ts.protected.tolist()]))


def eo_adjust_costs(ts: TrainingSet, delta_a0: float, delta_a1: float) -> CostPairSet:
    """C1 gains delta_(A, Y), balanced per label between the two groups."""
    _group_probs(ts, 2)
    a, b = ts.attribute_values
    deltas: dict[tuple[object, int], float] = {}
    for y, delta in ((0, delta_a0), (1, delta_a1)):
        p_a = float((ts.group_mask(a) & (ts.labels == y)).mean())
        p_b = float((ts.group_mask(b) & (ts.labels == y)).mean())
        if p_a == 0 or p_b == 0:
            raise DegenerateDataError(f"cell (group, label={y}) is empty; equalized-odds grid needs all four cells")

        deltas[(a, y)] = delta
        deltas[(b, y)] = -p_a * delta / p_b

    adjustment = np.array([deltas[(g, int(y))] for g, y in zip(ts.protected.tolist(), ts.labels.tolist())])
    return _with_predict_one_adjustment(ts, adjustment)


def _dimension_labels(ts: TrainingSet, cs: ConstraintSystem) -> list[str]:
    values = ts.attribute_values
    if cs.kind == ConstraintKind.DP and len(values) == 2:
        return [f"delta_{values[0]}"]

    if cs.kind == ConstraintKind.DP and len(values) == 3:
        return [f"delta_{values[0]}", f"delta_{values[1]}"]

    if cs.kind == ConstraintKind.EO and len(values) == 2:
        return [f"delta_{values[0]},0", f"delta_{values[0]},1"]

    if cs.kind not in (ConstraintKind.DP, ConstraintKind.EO):
        raise NotApplicableError(f"grid search supports dp and eo constraints, got {cs.kind}")

    raise NotApplicableError(
        f"{cs.kind} grid search needs {'2 or 3' if cs.kind == ConstraintKind.DP else '2'} protected values, "
        f"got {len(values)}; grid search is not feasible for non-binary protected attributes"
    )


def default_grid_spec(
    ts: TrainingSet,
    cs: ConstraintSystem,
    lo: float | None = None,
    hi: float | None = None,
    points: int = DEFAULT_GRID_POINTS,
) -> GridSpec:
    """[-2 rho, 2 rho] per dimension unless bounds are given; a heuristic range."""
    rho = rho_bound(cs)
    return GridSpec(
        [
            GridDimension(label, lo if lo is not None else -2 * rho, hi if hi is not None else 2 * rho, points)
            for label in _dimension_labels(ts, cs)
        ]
    )


def _cost_function(ts: TrainingSet, cs: ConstraintSystem, spec: GridSpec) -> Callable[..., CostPairSet]:
    labels = _dimension_labels(ts, cs)
    if len(labels) != len(spec.dimensions):
        raise ArgumentError(f"{cs.kind} grid over {len(ts.attribute_values)} groups needs {len(labels)} dimensions")

    if cs.kind == ConstraintKind.EO:
        return lambda d0, d1: eo_adjust_costs(ts, d0, d1)

    if len(labels) == 2:
        return lambda d, d2: dp3_adjust_costs(ts, d, d2)

    return lambda d: dp_adjust_costs(ts, d)


def grid_search(
    ts: TrainingSet,
    cs: ConstraintSystem,
    spec: GridSpec,
    learner: LearnerConfig,
    test: TrainingSet | None = None,
    jobs: int = 1,
) -> list[GridPointResult]:
    costs_at = _cost_function(ts, cs, spec)
    points = spec.points()
    _LOGGER.info(f"Grid search over {len(points)} points ({', '.join(spec.labels)})")

    def _evaluate(index: int, adjustments: tuple[float, ...]) -> GridPointResult:
        try:
            h = fit(learner, ts, cost_to_weighted(costs_at(*adjustments)))
        except FairReductionsError:
            raise
        except Exception as e:
            raise LearnerError(e, index) from e

        train_metrics = metrics_of(h.predict(ts.features), ts)
        test_error = test_violation = None
        if test is not None:
            test_metrics = metrics_of(h.predict(test.features), test)
            test_error = test_metrics.error
            test_violation = headline_violation(cs.kind, test_metrics)

        return GridPointResult(
            adjustments=tuple(adjustments),
            classifier=h,
            train_error=train_metrics.error,
            train_violation=headline_violation(cs.kind, train_metrics),
            test_error=test_error,
            test_violation=test_violation,
        )

    calls = [functools.partial(_evaluate, i, p) for i, p in enumerate(points)]
    results = run_bounded(jobs, calls)

    rv: list[GridPointResult] = []
    for result in results:
        if isinstance(result, BaseException):
            raise result

        rv.append(result)

    return rv


def pareto_front(items: Sequence[T], key: Callable[[T], tuple[float, float]]) -> list[T]:
    """Items not dominated in (error, violation), by violation ascending. Identical points are all kept."""
    points = [key(item) for item in items]
    kept = []
    for item, (error, violation) in zip(items, points):
        dominated = any(e <= error and v <= violation and (e < error or v < violation) for e, v in points)
        if not dominated:
            kept.append((violation, error, item))

    return [item for _, _, item in sorted(kept, key=lambda entry: (entry[0], entry[1]))]


def select_pareto(results: Sequence[GridPointResult]) -> list[GridPointResult]:
    if not results:
        raise ArgumentError("no grid results to filter")

    return pareto_front(results, lambda r: (r.train_error, r.train_violation))
