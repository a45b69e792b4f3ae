"""Lagrangian costs and the two best-response oracles."""

from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
import numpy.typing as npt

from .dataset import TrainingSet
from .exceptions import ArgumentError, NumericError
from .learners import BaseClassifier, LearnerConfig, cost_to_weighted, fit
from .moments import ConstraintSystem, gamma, moment_of

_LOGGER = logging.getLogger(__name__)

BUDGET_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class LambdaVector:
    values: npt.NDArray[np.float64]
    budget: float

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise ArgumentError(f"budget B must be positive, got {self.budget}")

        if (self.values < 0).any():
            raise ArgumentError("Lagrange multipliers must be nonnegative")

        if self.values.sum() > self.budget * (1 + BUDGET_TOLERANCE):
            raise ArgumentError(f"multipliers exceed the l1 budget {self.budget}")

    @classmethod
    def zeros(cls, n_constraints: int, budget: float) -> LambdaVector:
        return cls(np.zeros(n_constraints), budget)


@dataclass(frozen=True, eq=False)
class CostPairSet:
    c0: npt.NDArray[np.float64]
    c1: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.c0.shape != self.c1.shape:
            raise ArgumentError("c0 and c1 must have the same length")

        if not (np.isfinite(self.c0).all() and np.isfinite(self.c1).all()):
            raise NumericError("costs must be finite")

    def objective(self, predictions: npt.ArrayLike) -> float:
        """Total cost sum h(X_i) C1_i + (1 - h(X_i)) C0_i."""
        pred = np.asarray(predictions, dtype=np.float64)
        return float(pred @ self.c1 + (1 - pred) @ self.c0)


def misclassification_costs(ts: TrainingSet) -> CostPairSet:
    return CostPairSet(c0=(ts.labels != 0).astype(np.float64), c1=(ts.labels != 1).astype(np.float64))


def compute_costs(ts: TrainingSet, cs: ConstraintSystem, lam: LambdaVector) -> CostPairSet:
    """C_i^y = 1{Y_i != y} + sum_{k,j} M_kj lambda_k / p_j * g_j(..., y) * 1{i in E_j}."""
    if lam.values.shape != (cs.n_constraints,) or cs.n != ts.n:
        raise ArgumentError("lambda, constraint system and training set dimensions disagree")

    per_moment = (cs.M.T @ lam.values) / cs.probs
    base = misclassification_costs(ts)
    return CostPairSet(c0=base.c0 + cs.g0 @ per_moment, c1=base.c1 + cs.g1 @ per_moment)


def best_h(lam: LambdaVector, ts: TrainingSet, cs: ConstraintSystem, learner: LearnerConfig) -> BaseClassifier:
    return fit(learner, ts, cost_to_weighted(compute_costs(ts, cs, lam)))


def violations(q_predictions: npt.ArrayLike, cs: ConstraintSystem) -> npt.NDArray[np.float64]:
    """gamma(Q) - c_hat."""
    rv: npt.NDArray[np.float64] = gamma(cs, moment_of(cs, q_predictions)) - cs.c_hat
    return rv


def best_lambda(q_predictions: npt.ArrayLike, cs: ConstraintSystem, budget: float) -> LambdaVector:
    """Zero when every constraint holds, otherwise all of B on the most violated one (lowest index on ties)."""
    excess = violations(q_predictions, cs)
    rv = LambdaVector.zeros(cs.n_constraints, budget)
    if not len(excess) or (excess <= 0).all():
        return rv

    values = rv.values.copy()
    values[int(np.argmax(excess))] = budget
    return LambdaVector(values, budget)


def lagrangian(q_predictions: npt.ArrayLike, q_error: float, cs: ConstraintSystem, lam: LambdaVector) -> float:
    """L(Q, lambda) = err(Q) + lambda . (M mu(Q) - c_hat)."""
    value = q_error + float(lam.values @ violations(q_predictions, cs))
    if not np.isfinite(value):
        raise NumericError(f"Lagrangian is not finite: {value}")

    return value
