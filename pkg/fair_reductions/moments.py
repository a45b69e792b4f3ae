"""Linear-moment constraint systems M·mu(h) <= c + eps."""

from __future__ import annotations

from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field, replace
import json
import logging
from pathlib import Path
from typing import Any, Self, TypeAlias

import dacite
import numpy as np
import numpy.typing as npt
import voluptuous as vol

from .const import CONSTRAINT_FILE_PREFIX, NEGATIVE, POSITIVE, STAR, ConstraintKind
from .dataset import TrainingSet
from .exceptions import ArgumentError, DegenerateDataError, EmptyInputError, ParseError

_LOGGER = logging.getLogger(__name__)

MomentVector: TypeAlias = npt.NDArray[np.float64]
GammaVector: TypeAlias = npt.NDArray[np.float64]

MomentId: TypeAlias = Hashable
ConstraintId: TypeAlias = Hashable


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    kind: ConstraintKind
    moment_index: list[MomentId]
    constraint_index: list[ConstraintId]
    membership: npt.NDArray[np.bool_]
    g0: npt.NDArray[np.float64]
    g1: npt.NDArray[np.float64]
    M: npt.NDArray[np.float64]
    c: npt.NDArray[np.float64]
    eps: npt.NDArray[np.float64]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        n_moments = len(self.moment_index)
        n_constraints = len(self.constraint_index)
        if self.membership.shape[1:] != (n_moments,) or self.g0.shape != self.membership.shape:
            raise ArgumentError("membership and g tables must be n x |J|")

        if self.g1.shape != self.membership.shape or self.M.shape != (n_constraints, n_moments):
            raise ArgumentError("g1 must be n x |J| and M must be |K| x |J|")

        if self.c.shape != (n_constraints,) or self.eps.shape != (n_constraints,):
            raise ArgumentError("c and eps must have one entry per constraint")

        if (self.counts < 1).any():
            raise ArgumentError("constraint systems never store empty events")

        if (self.eps < 0).any():
            raise ArgumentError("eps must be nonnegative")

        for table in (self.g0, self.g1):
            if ((table < 0) | (table > 1))[self.membership].any():
                raise ArgumentError("g values must lie in [0, 1] on members")

    @property
    def n(self) -> int:
        return int(self.membership.shape[0])

    @property
    def counts(self) -> npt.NDArray[np.int64]:
        return self.membership.sum(axis=0).astype(np.int64)

    @property
    def probs(self) -> npt.NDArray[np.float64]:
        return self.counts / self.n

    @property
    def c_hat(self) -> npt.NDArray[np.float64]:
        return self.c + self.eps

    @property
    def n_constraints(self) -> int:
        return len(self.constraint_index)

    def moment_position(self, moment_id: MomentId) -> int:
        return self.moment_index.index(moment_id)

    def constraint_position(self, constraint_id: ConstraintId) -> int:
        return self.constraint_index.index(constraint_id)


def _paired_rows(moment_pos: int, reference_pos: int, n_moments: int) -> list[npt.NDArray[np.float64]]:
    plus = np.zeros(n_moments)
    plus[moment_pos] = 1.0
    plus[reference_pos] = -1.0
    return [plus, -plus]


def _parity_system(
    kind: ConstraintKind,
    cells: Sequence[tuple[MomentId, npt.NDArray[np.bool_], MomentId]],
    references: Sequence[tuple[MomentId, npt.NDArray[np.bool_]]],
    g0_column: npt.NDArray[np.float64],
    g1_column: npt.NDArray[np.float64],
) -> ConstraintSystem:
    """Pairs of constraints mu_cell - mu_ref <= 0 and mu_ref - mu_cell <= 0.

    Each cell is (moment id, event mask, reference moment id). Empty cells are dropped with a warning.
    """
    warnings: list[str] = []
    kept_cells = []
    for moment_id, mask, reference in cells:
        if not mask.any():
            message = f"event {moment_id!r} is empty, its constraints are dropped"
            _LOGGER.warning(message)
            warnings.append(message)
            continue

        kept_cells.append((moment_id, mask, reference))

    moment_index: list[MomentId] = [cell[0] for cell in kept_cells] + [ref[0] for ref in references]
    masks = [cell[1] for cell in kept_cells] + [ref[1] for ref in references]
    membership = np.column_stack(masks) if masks else np.zeros((len(g0_column), 0), dtype=bool)

    constraint_index: list[ConstraintId] = []
    rows: list[npt.NDArray[np.float64]] = []
    for pos, (moment_id, _, reference) in enumerate(kept_cells):
        head = moment_id if isinstance(moment_id, tuple) else (moment_id,)
        constraint_index += [(*head, POSITIVE), (*head, NEGATIVE)]
        rows += _paired_rows(pos, moment_index.index(reference), len(moment_index))

    return ConstraintSystem(
        kind=kind,
        moment_index=moment_index,
        constraint_index=constraint_index,
        membership=membership,
        g0=np.where(membership, g0_column[:, None], 0.0),
        g1=np.where(membership, g1_column[:, None], 0.0),
        M=np.vstack(rows) if rows else np.zeros((0, len(moment_index))),
        c=np.zeros(len(constraint_index)),
        eps=np.zeros(len(constraint_index)),
        warnings=warnings,
    )


def _prediction_columns(ts: TrainingSet) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """g_j(...) = h(X): zero at prediction 0, one at prediction 1."""
    return np.zeros(ts.n), np.ones(ts.n)


def build_dp(ts: TrainingSet) -> ConstraintSystem:
    g0, g1 = _prediction_columns(ts)
    cells = [(a, ts.group_mask(a), STAR) for a in ts.attribute_values]
    return _parity_system(ConstraintKind.DP, cells, [(STAR, np.ones(ts.n, dtype=bool))], g0, g1)


def build_error_rate(ts: TrainingSet) -> ConstraintSystem:
    """Error-rate balance: g_j = 1{h(X) != Y} conditioned on group membership."""
    labels = ts.labels.astype(np.float64)
    cells = [(a, ts.group_mask(a), STAR) for a in ts.attribute_values]
    return _parity_system(ConstraintKind.ERROR_RATE, cells, [(STAR, np.ones(ts.n, dtype=bool))], labels, 1 - labels)


def _label_conditioned(ts: TrainingSet, kind: ConstraintKind, label_values: Sequence[int]) -> ConstraintSystem:
    for y in label_values:
        if not (ts.labels == y).any():
            raise DegenerateDataError(f"no examples with label {y}; cannot condition on Y={y}")

    g0, g1 = _prediction_columns(ts)
    cells = []
    for a in ts.attribute_values:
        for y in label_values:
            cells.append(((a, y), ts.group_mask(a) & (ts.labels == y), (STAR, y)))

    references = [((STAR, y), np.asarray(ts.labels == y)) for y in label_values]
    return _parity_system(kind, cells, references, g0, g1)


def build_eo(ts: TrainingSet) -> ConstraintSystem:
    return _label_conditioned(ts, ConstraintKind.EO, (0, 1))


def build_tpr(ts: TrainingSet) -> ConstraintSystem:
    """Equality of opportunity: the equalized-odds constraints for Y=1 only."""
    return _label_conditioned(ts, ConstraintKind.TPR, (1,))


def with_epsilon(cs: ConstraintSystem, eps: float | Sequence[float] | npt.NDArray[np.float64]) -> ConstraintSystem:
    values = np.broadcast_to(np.asarray(eps, dtype=np.float64), (cs.n_constraints,)).copy()
    if (values < 0).any():
        raise ArgumentError(f"eps must be nonnegative, got {eps}")

    return replace(cs, eps=values)


def moment_of(cs: ConstraintSystem, predictions: npt.ArrayLike) -> MomentVector:
    """mu_j = (1/n_j) sum over E_j of (1 - pred) g0 + pred g1; exact for fractional predictions."""
    pred = np.asarray(predictions, dtype=np.float64)
    if pred.shape != (cs.n,):
        raise ArgumentError(f"expected {cs.n} predictions, got {pred.shape}")

    values = (1 - pred)[:, None] * cs.g0 + pred[:, None] * cs.g1
    totals: npt.NDArray[np.float64] = np.where(cs.membership, values, 0.0).sum(axis=0)
    return totals / cs.counts


def gamma(cs: ConstraintSystem, mu: MomentVector) -> GammaVector:
    if mu.shape != (len(cs.moment_index),):
        raise ArgumentError(f"moment vector has shape {mu.shape}, expected ({len(cs.moment_index)},)")

    rv: GammaVector = cs.M @ mu
    return rv


def default_epsilon(cs: ConstraintSystem, cprime: float, alpha: float) -> npt.NDArray[np.float64]:
    """eps_k = C' sum_j |M_kj| n_j^-alpha.

    C' is a heuristic scale here, the Rademacher constant of an arbitrary learner being unknown.
    """
    if cprime < 0 or not 0 < alpha <= 0.5:
        raise ArgumentError(f"need C' >= 0 and alpha in (0, 0.5], got C'={cprime}, alpha={alpha}")

    rv: npt.NDArray[np.float64] = cprime * (np.abs(cs.M) @ cs.counts.astype(np.float64) ** -alpha)
    return rv


def rho_bound(cs: ConstraintSystem) -> float:
    """Upper bound on max_h ||M mu(h) - c_hat||_inf."""
    if cs.kind != ConstraintKind.FILE and (cs.c == 0).all() and (cs.eps <= 1).all():
        return 2.0

    if not cs.n_constraints:
        return 0.0

    return float((np.abs(cs.M).sum(axis=1) + np.abs(cs.c_hat)).max())


CONSTRAINT_FILE_SCHEMA = vol.Schema(
    {
        vol.Required("moments"): vol.All(
            [
                vol.Schema(
                    {
                        vol.Required("id"): str,
                        vol.Required("members"): [vol.All(int, vol.Range(min=0))],
                        vol.Required("g0"): [vol.All(vol.Coerce(float), vol.Range(min=0, max=1))],
                        vol.Required("g1"): [vol.All(vol.Coerce(float), vol.Range(min=0, max=1))],
                    }
                )
            ],
            vol.Length(min=1),
        ),
        vol.Required("constraints"): [
            vol.Schema(
                {
                    vol.Required("id"): str,
                    vol.Required("coefficients"): {str: vol.Coerce(float)},
                    vol.Optional("bound", default=0.0): vol.Coerce(float),
                }
            )
        ],
    }
)


@dataclass
class MomentSpec:
    id: str
    members: list[int]
    g0: list[float]
    g1: list[float]


@dataclass
class ConstraintSpec:
    id: str
    coefficients: dict[str, float]
    bound: float = 0.0


@dataclass
class ConstraintFile:
    moments: list[MomentSpec]
    constraints: list[ConstraintSpec]

    @classmethod
    def from_json(cls, data: Any) -> Self:
        try:
            validated = CONSTRAINT_FILE_SCHEMA(data)
        except vol.Invalid as e:
            raise ParseError(f"invalid constraint file: {e}")

        return dacite.from_dict(cls, validated)


def load_constraint_file(path: str | Path, ts: TrainingSet) -> ConstraintSystem:
    """Generic system from a JSON document.

    Each moment lists its member rows with g0/g1 aligned to them; rows not listed are non-members.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read constraint file {path}: {e}")

    spec = ConstraintFile.from_json(raw)
    return constraint_system_from_spec(spec, ts.n)


def constraint_system_from_spec(spec: ConstraintFile, n: int) -> ConstraintSystem:
    if n < 1:
        raise EmptyInputError("constraint system needs at least one example")

    moment_index = [m.id for m in spec.moments]
    if len(set(moment_index)) != len(moment_index):
        raise ParseError("duplicate moment ids in constraint file")

    membership = np.zeros((n, len(moment_index)), dtype=bool)
    g0 = np.zeros((n, len(moment_index)))
    g1 = np.zeros((n, len(moment_index)))
    for pos, moment in enumerate(spec.moments):
        if not moment.members:
            raise ParseError(f"moment {moment.id!r} has no members")

        if len(moment.g0) != len(moment.members) or len(moment.g1) != len(moment.members):
            raise ParseError(f"moment {moment.id!r}: g0 and g1 must align with members")

        rows = np.asarray(moment.members)
        if rows.max() >= n:
            raise ParseError(f"moment {moment.id!r} references row {rows.max()} of a {n}-row training set")

        membership[rows, pos] = True
        g0[rows, pos] = moment.g0
        g1[rows, pos] = moment.g1

    M = np.zeros((len(spec.constraints), len(moment_index)))
    for k, constraint in enumerate(spec.constraints):
        for moment_id, coefficient in constraint.coefficients.items():
            if moment_id not in moment_index:
                raise ParseError(f"constraint {constraint.id!r} references unknown moment {moment_id!r}")

            M[k, moment_index.index(moment_id)] = coefficient

    return ConstraintSystem(
        kind=ConstraintKind.FILE,
        moment_index=list(moment_index),
        constraint_index=[c.id for c in spec.constraints],
        membership=membership,
        g0=g0,
        g1=g1,
        M=M,
        c=np.array([c.bound for c in spec.constraints], dtype=np.float64),
        eps=np.zeros(len(spec.constraints)),
    )


def build_constraint_system(kind: str, ts: TrainingSet) -> ConstraintSystem:
    builders = {
        ConstraintKind.DP: build_dp,
        ConstraintKind.EO: build_eo,
        ConstraintKind.TPR: build_tpr,
        ConstraintKind.ERROR_RATE: build_error_rate,
    }
    if kind.startswith(CONSTRAINT_FILE_PREFIX):
        return load_constraint_file(kind.removeprefix(CONSTRAINT_FILE_PREFIX), ts)

    try:
        return builders[ConstraintKind(kind)](ts)
    except (ValueError, KeyError):
        raise ArgumentError(f"unknown constraint kind {kind!r}")


def format_id(identifier: Hashable) -> str:
    if isinstance(identifier, tuple):
        return ",".join(str(part) for part in identifier)

    return str(identifier)
