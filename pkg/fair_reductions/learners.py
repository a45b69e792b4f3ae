"""Weighted-classification oracles and the cost to weight conversion."""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Iterator
from dataclasses import asdict, dataclass, field
import json
import logging
import math
from typing import TYPE_CHECKING, Any, ClassVar

import dacite
import numpy as np
import numpy.typing as npt

from .const import LOGISTIC_L2, LOGISTIC_MAX_ITER, LOGISTIC_TOLERANCE, STUMP_ROUNDS, LearnerKind
from .exceptions import ArgumentError, NumericError, ParseError

if TYPE_CHECKING:
    from .dataset import TrainingSet
    from .reduction import CostPairSet

_LOGGER = logging.getLogger(__name__)

POLARITY_GE = ">="
POLARITY_LT = "<"
STAGE_ERROR_FLOOR = 1e-10
CURVATURE_FLOOR = 1e-10
ARMIJO_SLOPE = 1e-4
MIN_STEP = 1e-12


@dataclass(frozen=True)
class WeightedSample:
    row: int
    target: int
    weight: float


@dataclass(frozen=True, eq=False)
class WeightedSampleSet:
    targets: npt.NDArray[np.int64]
    weights: npt.NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.targets)

    def __iter__(self) -> Iterator[WeightedSample]:
        for row, (target, weight) in enumerate(zip(self.targets.tolist(), self.weights.tolist())):
            yield WeightedSample(row, int(target), float(weight))

    def weighted_error(self, predictions: npt.NDArray[np.int64]) -> float:
        return float(self.weights[predictions != self.targets].sum())


def cost_to_weighted(costs: CostPairSet) -> WeightedSampleSet:
    """W_i = |C0_i - C1_i| and target_i = 1{C0_i >= C1_i}; ties give target 1 with weight 0."""
    return WeightedSampleSet(
        targets=(costs.c0 >= costs.c1).astype(np.int64),
        weights=np.abs(costs.c0 - costs.c1),
    )


@dataclass(frozen=True)
class LearnerConfig:
    kind: LearnerKind = LearnerKind.LOGISTIC
    seed: int = 0
    l2: float = LOGISTIC_L2
    max_iter: int = LOGISTIC_MAX_ITER
    tolerance: float = LOGISTIC_TOLERANCE
    rounds: int = STUMP_ROUNDS


@dataclass(frozen=True)
class BaseClassifier(ABC):
    kind: ClassVar[LearnerKind]

    n_features: int

    @abstractmethod
    def _predict(self, features: npt.NDArray[np.float64]) -> npt.NDArray[np.int64]: ...

    def predict(self, features: npt.ArrayLike) -> npt.NDArray[np.int64]:
        matrix = np.asarray(features, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.n_features:
            raise ArgumentError(f"expected {self.n_features} features, got matrix of shape {matrix.shape}")

        return self._predict(matrix)

    def as_dict(self) -> dict[str, Any]:
        return {"kind": str(self.kind), **asdict(self)}

    @property
    def key(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    @staticmethod
    def from_dict(data: dict[str, Any]) -> BaseClassifier:
        params = dict(data)
        try:
            cls = CLASSIFIER_TYPES[LearnerKind(params.pop("kind"))]
            return dacite.from_dict(cls, params, config=dacite.Config(strict=True))
        except (KeyError, ValueError, dacite.DaciteError) as e:
            raise ParseError(f"invalid classifier record: {e!r}")


@dataclass(frozen=True)
class ConstantClassifier(BaseClassifier):
    kind = LearnerKind.CONSTANT

    bit: int = 1

    def _predict(self, features: npt.NDArray[np.float64]) -> npt.NDArray[np.int64]:
        return np.full(features.shape[0], self.bit, dtype=np.int64)


@dataclass(frozen=True)
class ThresholdClassifier(BaseClassifier):
    kind = LearnerKind.THRESHOLD_1D

    feature: int = 0
    threshold: float = 0.0
    polarity: str = POLARITY_GE

    def _predict(self, features: npt.NDArray[np.float64]) -> npt.NDArray[np.int64]:
        above = features[:, self.feature] >= self.threshold
        if self.polarity == POLARITY_LT:
            above = ~above

        return above.astype(np.int64)


@dataclass(frozen=True)
class LogisticClassifier(BaseClassifier):
    kind = LearnerKind.LOGISTIC

    coefficients: list[float] = field(default_factory=list)
    intercept: float = 0.0

    def scores(self, features: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        rv: npt.NDArray[np.float64] = features @ np.asarray(self.coefficients, dtype=np.float64) + self.intercept
        return rv

    def _predict(self, features: npt.NDArray[np.float64]) -> npt.NDArray[np.int64]:
        return (self.scores(features) >= 0).astype(np.int64)


@dataclass(frozen=True)
class StumpEnsembleClassifier(BaseClassifier):
    kind = LearnerKind.STUMPS

    features: list[int] = field(default_factory=list)
    thresholds: list[float] = field(default_factory=list)
    left_votes: list[int] = field(default_factory=list)
    right_votes: list[int] = field(default_factory=list)
    stage_weights: list[float] = field(default_factory=list)

    def _predict(self, features: npt.NDArray[np.float64]) -> npt.NDArray[np.int64]:
        score = np.zeros(features.shape[0])
        for feature, threshold, left, right, alpha in zip(
            self.features, self.thresholds, self.left_votes, self.right_votes, self.stage_weights
        ):
            score += alpha * np.where(features[:, feature] >= threshold, right, left)

        return (score >= 0).astype(np.int64)


CLASSIFIER_TYPES: dict[LearnerKind, type[BaseClassifier]] = {
    LearnerKind.CONSTANT: ConstantClassifier,
    LearnerKind.THRESHOLD_1D: ThresholdClassifier,
    LearnerKind.LOGISTIC: LogisticClassifier,
    LearnerKind.STUMPS: StumpEnsembleClassifier,
}


@dataclass(frozen=True)
class ThresholdFit:
    feature: int
    threshold: float
    polarity: str
    error: float


def _feature_thresholds(
    x: npt.NDArray[np.float64], targets: npt.NDArray[np.int64], weights: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Candidate thresholds (ascending) and the weighted error of the >= polarity at each.

    Candidates are one below the minimum, the midpoints between consecutive distinct values and one
    above the maximum, so every split of the sorted values (including both constants) is reachable.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    positive = np.where(targets[order] == 1, weights[order], 0.0)
    negative = np.where(targets[order] == 0, weights[order], 0.0)

    values, starts = np.unique(xs, return_index=True)
    boundaries = np.append(starts, len(xs))
    cum_positive = np.concatenate(([0.0], np.cumsum(positive)))
    cum_negative = np.concatenate(([0.0], np.cumsum(negative)))

    # rows before a boundary are predicted 0, rows from it onwards 1
    errors = cum_positive[boundaries] + (cum_negative[-1] - cum_negative[boundaries])
    thresholds = np.concatenate(([values[0] - 1.0], (values[:-1] + values[1:]) / 2, [values[-1] + 1.0]))
    return thresholds, errors


def best_threshold(
    features: npt.NDArray[np.float64], targets: npt.NDArray[np.int64], weights: npt.NDArray[np.float64]
) -> ThresholdFit:
    """Exact weighted-error minimizer over single-feature thresholds and both polarities.

    Ties go to the lowest feature index, then the smallest threshold, then the >= polarity.
    """
    total = float(weights.sum())
    best: ThresholdFit | None = None
    for feature in range(features.shape[1]):
        thresholds, errors = _feature_thresholds(features[:, feature], targets, weights)
        candidates = np.column_stack((errors, total - errors)).ravel()
        pos = int(np.argmin(candidates))
        if best is None or candidates[pos] < best.error:
            best = ThresholdFit(
                feature=feature,
                threshold=float(thresholds[pos // 2]),
                polarity=POLARITY_GE if pos % 2 == 0 else POLARITY_LT,
                error=float(candidates[pos]),
            )

    if best is None:
        raise ArgumentError("threshold learner needs at least one feature")

    return best


def _fit_threshold(ts: TrainingSet, samples: WeightedSampleSet) -> BaseClassifier:
    if ts.d == 0:
        return _fit_constant(ts, samples)

    fit = best_threshold(ts.features, samples.targets, samples.weights)
    return ThresholdClassifier(n_features=ts.d, feature=fit.feature, threshold=fit.threshold, polarity=fit.polarity)


def _fit_constant(ts: TrainingSet, samples: WeightedSampleSet) -> BaseClassifier:
    error_one = samples.weighted_error(np.ones(len(samples), dtype=np.int64))
    error_zero = samples.weighted_error(np.zeros(len(samples), dtype=np.int64))
    return ConstantClassifier(n_features=ts.d, bit=int(error_one <= error_zero))


def _logistic_objective(
    params: npt.NDArray[np.float64],
    design: npt.NDArray[np.float64],
    targets: npt.NDArray[np.float64],
    weights: npt.NDArray[np.float64],
    penalty: npt.NDArray[np.float64],
) -> tuple[float, npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Penalized weighted log loss, its gradient and the fitted probabilities."""
    z = design @ params
    probs = 0.5 * (1 + np.tanh(z / 2))
    loss = float(weights @ (np.logaddexp(0.0, z) - targets * z)) + 0.5 * float(penalty @ params**2)
    gradient: npt.NDArray[np.float64] = design.T @ (weights * (probs - targets)) + penalty * params
    return loss, gradient, probs


def _newton_direction(
    design: npt.NDArray[np.float64],
    weights: npt.NDArray[np.float64],
    probs: npt.NDArray[np.float64],
    penalty: npt.NDArray[np.float64],
    gradient: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    curvature = weights * np.clip(probs * (1 - probs), CURVATURE_FLOOR, None)
    hessian = (design * curvature[:, None]).T @ design + np.diag(penalty + CURVATURE_FLOOR)
    try:
        rv: npt.NDArray[np.float64] = -np.linalg.solve(hessian, gradient)
    except np.linalg.LinAlgError:
        rv = -gradient

    return rv


def _fit_logistic(ts: TrainingSet, samples: WeightedSampleSet, config: LearnerConfig) -> BaseClassifier:
    """Damped Newton (IRLS) on the weighted logistic loss; the intercept is not penalized."""
    design = np.column_stack((ts.features, np.ones(ts.n)))
    weights = samples.weights / samples.weights.sum()
    targets = samples.targets.astype(np.float64)
    penalty = np.full(design.shape[1], config.l2)
    penalty[-1] = 0.0

    params = np.zeros(design.shape[1])
    value, gradient, probs = _logistic_objective(params, design, targets, weights, penalty)
    for _ in range(config.max_iter):
        if float(np.linalg.norm(gradient)) < config.tolerance:
            break

        direction = _newton_direction(design, weights, probs, penalty, gradient)
        slope = float(gradient @ direction)
        step = 1.0
        while True:
            candidate = params + step * direction
            candidate_value, candidate_gradient, candidate_probs = _logistic_objective(
                candidate, design, targets, weights, penalty
            )
            if candidate_value <= value + ARMIJO_SLOPE * step * slope or step < MIN_STEP:
                break

            step /= 2

        if candidate_value >= value:
            break

        decrease = value - candidate_value
        params, value, gradient, probs = candidate, candidate_value, candidate_gradient, candidate_probs
        if decrease <= config.tolerance * max(1.0, abs(value)):
            break
    else:
        _LOGGER.debug(f"Logistic fit stopped at {config.max_iter} Newton steps, loss {value:.6g}")

    return LogisticClassifier(n_features=ts.d, coefficients=params[:-1].tolist(), intercept=float(params[-1]))


def _fit_stumps(ts: TrainingSet, samples: WeightedSampleSet, config: LearnerConfig) -> BaseClassifier:
    """Boosted stumps: each round fits the exact weighted stump and reweights multiplicatively."""
    if ts.d == 0:
        return _fit_constant(ts, samples)

    signs = np.where(samples.targets == 1, 1.0, -1.0)
    distribution = samples.weights / samples.weights.sum()
    stumps: dict[str, list[Any]] = {k: [] for k in ("features", "thresholds", "left", "right", "alphas")}
    for _ in range(config.rounds):
        fit = best_threshold(ts.features, samples.targets, distribution)
        error = min(max(fit.error, STAGE_ERROR_FLOOR), 1 - STAGE_ERROR_FLOOR)
        if error >= 0.5:
            break

        alpha = 0.5 * math.log((1 - error) / error)
        right = 1 if fit.polarity == POLARITY_GE else -1
        stumps["features"].append(fit.feature)
        stumps["thresholds"].append(fit.threshold)
        stumps["left"].append(-right)
        stumps["right"].append(right)
        stumps["alphas"].append(alpha)

        votes = np.where(ts.features[:, fit.feature] >= fit.threshold, right, -right)
        distribution = distribution * np.exp(-alpha * signs * votes)
        distribution /= distribution.sum()
        if fit.error <= STAGE_ERROR_FLOOR:
            break

    if not stumps["features"]:
        return _fit_constant(ts, samples)

    return StumpEnsembleClassifier(
        n_features=ts.d,
        features=stumps["features"],
        thresholds=stumps["thresholds"],
        left_votes=stumps["left"],
        right_votes=stumps["right"],
        stage_weights=stumps["alphas"],
    )


def fit(config: LearnerConfig, ts: TrainingSet, samples: WeightedSampleSet) -> BaseClassifier:
    if len(samples) != ts.n:
        raise ArgumentError(f"got {len(samples)} weighted samples for {ts.n} rows")

    if not np.isfinite(samples.weights).all():
        raise NumericError("weights must be finite")

    if (samples.weights < 0).any():
        raise ArgumentError("weights must be nonnegative")

    if samples.weights.sum() <= 0:
        return ConstantClassifier(n_features=ts.d, bit=1)

    match config.kind:
        case LearnerKind.THRESHOLD_1D:
            return _fit_threshold(ts, samples)
        case LearnerKind.CONSTANT:
            return _fit_constant(ts, samples)
        case LearnerKind.LOGISTIC:
            return _fit_logistic(ts, samples, config)
        case LearnerKind.STUMPS:
            return _fit_stumps(ts, samples, config)

    raise ArgumentError(f"unknown learner kind {config.kind!r}")
