"""Exponentiated-gradient saddle-point solver."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
import math
from typing import TypeAlias

import numpy as np
import numpy.typing as npt
from scipy.optimize import linprog

from .const import (
    DEFAULT_MAX_ITER,
    ENVELOPE_TOLERANCE,
    ETA_SHRINK,
    GAP_SHRINK,
    ORACLE_TOLERANCE,
    PRACTICAL_ETA0,
    PRACTICAL_MAX_ITER,
    PRACTICAL_MIN_ITER,
    REGRET_CHECK_GROWTH,
    REGRET_CHECK_START,
    EnvelopePolicy,
    SolverPreset,
)
from .dataset import TrainingSet
from .evaluate import RandomizedClassifier, error_of
from .exceptions import ArgumentError, FairReductionsError, LearnerError, NumericError
from .learners import BaseClassifier, ConstantClassifier, LearnerConfig
from .moments import ConstraintSystem, GammaVector, gamma, moment_of, rho_bound
from .reduction import LambdaVector, best_h, best_lambda, lagrangian, violations

_LOGGER = logging.getLogger(__name__)

ThetaVector: TypeAlias = npt.NDArray[np.float64]

LP_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    B: float
    nu: float
    eta: float
    max_iter: int
    seed: int = 0
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    rho: float | None = None
    envelope_policy: EnvelopePolicy = EnvelopePolicy.WARN
    preset: SolverPreset = SolverPreset.THEORY

    def __post_init__(self) -> None:
        for name in ("B", "nu", "eta"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ArgumentError(f"{name} must be positive and finite, got {value}")

        if self.max_iter < 1:
            raise ArgumentError(f"max_iter must be positive, got {self.max_iter}")


@dataclass(frozen=True)
class GapRecord:
    t: int
    nu_t: float
    lagrangian: float
    upper: float
    lower: float
    max_violation: float
    envelope: float


@dataclass(frozen=True, eq=False)
class SaddleResult:
    ensemble: RandomizedClassifier
    lambda_avg: LambdaVector
    gap_history: list[GapRecord]
    iterations: int
    converged: bool
    rho: float
    selected: int = -1

    @property
    def final_gap(self) -> float:
        """Gap of the returned ensemble: the last iterate, or the best one under the practical preset."""
        return self.gap_history[self.selected].nu_t


def lambda_from_theta(theta: ThetaVector, B: float) -> LambdaVector:
    """lambda_k = B exp(theta_k) / (1 + sum exp(theta)), evaluated after shifting by max(0, max theta)."""
    if B <= 0:
        raise ArgumentError(f"B must be positive, got {B}")

    shift = max(0.0, float(theta.max())) if len(theta) else 0.0
    scaled = np.exp(theta - shift)
    return LambdaVector(B * scaled / (math.exp(-shift) + scaled.sum()), B)


def theta_update(theta: ThetaVector, gamma_h: GammaVector, c_hat: npt.NDArray[np.float64], eta: float) -> ThetaVector:
    rv: ThetaVector = theta + eta * (gamma_h - c_hat)
    return rv


def iteration_cap(rho: float, B: float, nK: int, nu: float) -> int:
    """4 rho^2 B^2 ln(|K|+1) / nu^2, rounded up."""
    return math.ceil(4 * rho**2 * B**2 * math.log(nK + 1) / nu**2)


def gap_envelope(rho: float, B: float, nK: int, eta: float, t: int) -> float:
    return B * math.log(nK + 1) / (eta * t) + eta * rho**2 * B


def default_config(ts: TrainingSet, cs: ConstraintSystem, learner: LearnerConfig | None = None) -> SolverConfig:
    """nu = n^-1/2 / 2, B = 2 sqrt(n) and eta = nu / (2 rho^2 B)."""
    return resolve_config(ts, cs, learner=learner)


def resolve_config(
    ts: TrainingSet,
    cs: ConstraintSystem,
    B: float | None = None,
    nu: float | None = None,
    eta: float | None = None,
    max_iter: int | None = None,
    seed: int = 0,
    learner: LearnerConfig | None = None,
    envelope_policy: EnvelopePolicy = EnvelopePolicy.WARN,
    preset: SolverPreset = SolverPreset.THEORY,
) -> SolverConfig:
    """Defaults for every parameter left unset; eta follows nu and B unless given explicitly.

    The practical preset sets B = 1 / min(eps) (2 sqrt(n) when some eps is zero), eta = 2 / B and 50 iterations.
    """
    rho = rho_bound(cs) or 1.0
    nu = nu if nu is not None else 0.5 / math.sqrt(ts.n)
    if preset == SolverPreset.PRACTICAL:
        smallest = float(cs.eps.min()) if cs.n_constraints else 0.0
        B = B if B is not None else (1 / smallest if smallest > 0 else 2 * math.sqrt(ts.n))
        eta = eta if eta is not None else PRACTICAL_ETA0 / B
        max_iter = max_iter if max_iter is not None else PRACTICAL_MAX_ITER
    else:
        B = B if B is not None else 2 * math.sqrt(ts.n)
        eta = eta if eta is not None else nu / (2 * rho**2 * B)

    if max_iter is None:
        max_iter = max(1, min(iteration_cap(rho, B, cs.n_constraints, nu), DEFAULT_MAX_ITER))

    return SolverConfig(
        B=B,
        nu=nu,
        eta=eta,
        max_iter=max_iter,
        seed=seed,
        learner=learner if learner is not None else LearnerConfig(seed=seed),
        rho=rho,
        envelope_policy=envelope_policy,
        preset=preset,
    )


class _Oracle:
    def __init__(self, ts: TrainingSet, cs: ConstraintSystem, learner: LearnerConfig) -> None:
        self._ts = ts
        self._cs = cs
        self._learner = learner

    def __call__(self, lam: LambdaVector, iteration: int) -> tuple[BaseClassifier, npt.NDArray[np.int64]]:
        try:
            h = best_h(lam, self._ts, self._cs, self._learner)
            return h, h.predict(self._ts.features)
        except FairReductionsError:
            raise
        except Exception as e:
            raise LearnerError(e, iteration) from e


class _Pool:
    """Distinct classifiers played so far, both constants included, with cached error and gamma."""

    def __init__(self, ts: TrainingSet, cs: ConstraintSystem, oracle: _Oracle) -> None:
        self._ts = ts
        self._cs = cs
        self._oracle = oracle
        self._positions: dict[str, int] = {}
        self.classifiers: list[BaseClassifier] = []
        self._predictions: list[npt.NDArray[np.int8]] = []
        self._errors: list[float] = []
        self._gammas: list[GammaVector] = []

        for bit in (0, 1):
            h = ConstantClassifier(n_features=ts.d, bit=bit)
            self.add(h, h.predict(ts.features))

    def __len__(self) -> int:
        return len(self.classifiers)

    @property
    def errors(self) -> npt.NDArray[np.float64]:
        return np.array(self._errors, dtype=np.float64)

    @property
    def excess(self) -> npt.NDArray[np.float64]:
        """Rows gamma(h) - c_hat, one per member."""
        rv: npt.NDArray[np.float64] = np.vstack(self._gammas) - self._cs.c_hat
        return rv

    def gamma_of(self, position: int) -> GammaVector:
        return self._gammas[position]

    def add(self, h: BaseClassifier, predictions: npt.NDArray[np.int64]) -> int:
        position = self._positions.get(h.key)
        if position is not None:
            return position

        self._positions[h.key] = len(self.classifiers)
        self.classifiers.append(h)
        self._predictions.append(predictions.astype(np.int8))
        self._errors.append(error_of(predictions, self._ts.labels))
        self._gammas.append(gamma(self._cs, moment_of(self._cs, predictions)))
        return len(self.classifiers) - 1

    def respond(self, lam: LambdaVector, iteration: int) -> int:
        """Fresh oracle fit, replaced by a pool member only when that is better by more than the tolerance."""
        fresh = self.add(*self._oracle(lam, iteration))
        values = self.errors + self.excess @ lam.values
        best = int(np.argmin(values))
        return best if values[best] < values[fresh] - ORACLE_TOLERANCE else fresh

    def predictions(self, position: int) -> npt.NDArray[np.float64]:
        return self._predictions[position].astype(np.float64)

    def mixture(self, weights: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        rv: npt.NDArray[np.float64] = weights @ np.vstack(self._predictions).astype(np.float64)
        return rv

    def ensemble(self, weights: npt.NDArray[np.float64]) -> RandomizedClassifier:
        return RandomizedClassifier([(self.classifiers[i], float(w)) for i, w in enumerate(weights) if w > 0])


def solve(ts: TrainingSet, cs: ConstraintSystem, config: SolverConfig) -> SaddleResult:
    if cs.n != ts.n:
        raise ArgumentError("constraint system was built on a different training set")

    rho = config.rho if config.rho is not None else rho_bound(cs)
    oracle = _Oracle(ts, cs, replace(config.learner, seed=config.seed))
    if config.preset == SolverPreset.PRACTICAL:
        return _solve_practical(ts, cs, config, oracle, rho)

    nK = cs.n_constraints
    theta: ThetaVector = np.zeros(nK)
    played: list[BaseClassifier] = []
    prediction_sum = np.zeros(ts.n)
    lambda_sum = np.zeros(nK)
    history: list[GapRecord] = []
    converged = False

    for t in range(1, config.max_iter + 1):
        lam = lambda_from_theta(theta, config.B)
        h, h_pred = oracle(lam, t)
        played.append(h)
        prediction_sum += h_pred
        lambda_sum += lam.values

        lambda_avg = LambdaVector(lambda_sum / t, config.B)
        _, lower_pred = oracle(lambda_avg, t)
        record = _gap_record(
            t, prediction_sum / t, lambda_avg, lower_pred, ts, cs, gap_envelope(rho, config.B, nK, config.eta, t)
        )
        history.append(record)
        _check_envelope(record, config.envelope_policy)

        if record.nu_t <= config.nu:
            converged = True
            break

        theta = theta_update(theta, gamma(cs, moment_of(cs, h_pred)), cs.c_hat, config.eta)

    _log_outcome(converged, history[-1], config)
    return SaddleResult(
        ensemble=RandomizedClassifier.from_counts(played),
        lambda_avg=LambdaVector(lambda_sum / len(history), config.B),
        gap_history=history,
        iterations=len(history),
        converged=converged,
        rho=rho,
    )


def _solve_practical(
    ts: TrainingSet, cs: ConstraintSystem, config: SolverConfig, oracle: _Oracle, rho: float
) -> SaddleResult:
    """Exponentiated gradient with a shrinking step and an LP over the pool; the iterate with the smallest gap wins."""
    pool = _Pool(ts, cs, oracle)
    nK = cs.n_constraints
    theta: ThetaVector = np.zeros(nK)
    eta = config.eta
    counts: list[int] = []
    lambda_sum = np.zeros(nK)
    history: list[GapRecord] = []
    best: tuple[GapRecord, npt.NDArray[np.float64], LambdaVector] | None = None
    next_check, checked_gap = REGRET_CHECK_START, math.inf

    for t in range(1, config.max_iter + 1):
        lam = lambda_from_theta(theta, config.B)
        played = pool.respond(lam, t)
        counts.append(played)
        lambda_sum += lam.values

        lambda_avg = LambdaVector(lambda_sum / t, config.B)
        lower = pool.predictions(pool.respond(lambda_avg, t))
        weights = np.bincount(counts, minlength=len(pool)) / t
        candidate = (_gap_record(t, pool.mixture(weights), lambda_avg, lower, ts, cs, math.inf), weights, lambda_avg)

        planned = _linprog_step(pool, cs, config.B)
        if planned is not None:
            lp_weights, lp_lambda = planned
            lp_lower = pool.predictions(pool.respond(lp_lambda, t))
            lp_weights = np.pad(lp_weights, (0, len(pool) - len(lp_weights)))
            lp_record = _gap_record(t, pool.mixture(lp_weights), lp_lambda, lp_lower, ts, cs, math.inf)
            if lp_record.nu_t < candidate[0].nu_t:
                candidate = (lp_record, lp_weights, lp_lambda)

        history.append(candidate[0])
        if best is None or candidate[0].nu_t <= best[0].nu_t:
            best = candidate

        if t >= PRACTICAL_MIN_ITER and best[0].nu_t <= config.nu:
            break

        if t >= next_check:
            if best[0].nu_t > GAP_SHRINK * checked_gap:
                eta *= ETA_SHRINK
                _LOGGER.debug(f"t={t} gap stalled at {best[0].nu_t:.6g}, eta shrinks to {eta:.6g}")

            checked_gap = best[0].nu_t
            next_check = max(t + 1, math.ceil(t * REGRET_CHECK_GROWTH))

        theta = theta_update(theta, pool.gamma_of(played), cs.c_hat, eta)

    assert best is not None
    record, weights, lambda_best = best
    converged = record.nu_t <= config.nu
    _log_outcome(converged, record, config)
    return SaddleResult(
        ensemble=pool.ensemble(np.pad(weights, (0, len(pool) - len(weights)))),
        lambda_avg=lambda_best,
        gap_history=history,
        iterations=len(history),
        converged=converged,
        rho=rho,
        selected=record.t - 1,
    )


def _gap_record(
    t: int,
    q_pred: npt.NDArray[np.float64],
    lam: LambdaVector,
    lower_pred: npt.NDArray[np.float64] | npt.NDArray[np.int64],
    ts: TrainingSet,
    cs: ConstraintSystem,
    envelope: float,
) -> GapRecord:
    """nu_t = max(L(Q, lambda) - L(best h, lambda), L(Q, best lambda) - L(Q, lambda))."""
    q_error = error_of(q_pred, ts.labels)
    value = lagrangian(q_pred, q_error, cs, lam)
    upper = lagrangian(q_pred, q_error, cs, best_lambda(q_pred, cs, lam.budget))
    lower = lagrangian(lower_pred, error_of(lower_pred, ts.labels), cs, lam)
    nu_t = max(value - lower, upper - value)
    excess = violations(q_pred, cs)
    _LOGGER.debug(f"t={t} nu_t={nu_t:.6g} L={value:.6g} upper={upper:.6g} lower={lower:.6g}")
    return GapRecord(
        t=t,
        nu_t=nu_t,
        lagrangian=value,
        upper=upper,
        lower=lower,
        max_violation=float(excess.max()) if cs.n_constraints else 0.0,
        envelope=envelope,
    )


def _linprog_step(
    pool: _Pool, cs: ConstraintSystem, B: float
) -> tuple[npt.NDArray[np.float64], LambdaVector] | None:
    """min over Q on the pool of err(Q) + B max(0, max_k gamma_k(Q) - c_hat_k), with lambda read off the duals."""
    size, nK = len(pool), cs.n_constraints
    objective = np.append(pool.errors, B)
    coupling = None
    if nK:
        coupling = np.hstack([pool.excess.T, -np.ones((nK, 1))])

    res = linprog(
        objective,
        A_ub=coupling,
        b_ub=np.zeros(nK) if nK else None,
        A_eq=np.append(np.ones(size), 0.0)[None, :],
        b_eq=[1.0],
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        _LOGGER.debug(f"LP step skipped: {res.message}")
        return None

    weights = np.where(res.x[:size] < LP_WEIGHT_FLOOR, 0.0, res.x[:size])
    weights /= weights.sum()
    lam = np.clip(-res.ineqlin.marginals, 0.0, None) if nK else np.zeros(0)
    if lam.sum() > B:
        lam *= B / lam.sum()

    return weights, LambdaVector(lam, B)


def _log_outcome(converged: bool, record: GapRecord, config: SolverConfig) -> None:
    if converged:
        _LOGGER.info(f"Converged after {record.t} iterations, gap {record.nu_t:.4g}")
    else:
        _LOGGER.warning(
            f"Stopped after {config.max_iter} iterations without reaching gap {config.nu:.4g} "
            f"(returned gap {record.nu_t:.4g})"
        )


def _check_envelope(record: GapRecord, policy: EnvelopePolicy) -> None:
    if record.nu_t <= record.envelope + ENVELOPE_TOLERANCE:
        return

    message = f"gap {record.nu_t:.6g} at t={record.t} exceeds the regret envelope {record.envelope:.6g}"
    if policy == EnvelopePolicy.RAISE:
        raise NumericError(message)

    # only exact oracles are covered by the envelope
    _LOGGER.warning(message)
