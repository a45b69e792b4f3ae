"""Randomized classifiers, evaluation metrics and model artifacts."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any, Self

import dacite
import numpy as np
import numpy.typing as npt

from .const import ARTIFACT_FORMAT_VERSION, WEIGHT_SUM_TOLERANCE, ConstraintKind
from .dataset import ONE_HOT_SEPARATOR, Standardization, TrainingSet
from .exceptions import ArgumentError, CompatibilityError, DegenerateDataError, ParseError, writing
from .learners import BaseClassifier

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RandomizedClassifier:
    """A distribution over base classifiers; predictions draw a member first."""

    members: list[tuple[BaseClassifier, float]]

    def __post_init__(self) -> None:
        if not self.members:
            raise ArgumentError("a randomized classifier needs at least one member")

        weights = self.weights
        if (weights < 0).any() or abs(weights.sum() - 1) > WEIGHT_SUM_TOLERANCE:
            raise ArgumentError(f"member weights must be nonnegative and sum to 1, got {weights.tolist()}")

        keys = [h.key for h, _ in self.members]
        if len(set(keys)) != len(keys):
            raise ArgumentError("randomized classifier holds duplicate members")

    @classmethod
    def single(cls, h: BaseClassifier) -> Self:
        return cls([(h, 1.0)])

    @classmethod
    def from_counts(cls, classifiers: Sequence[BaseClassifier]) -> Self:
        """Uniform mixture over the sequence; identical classifiers are merged by summing their weights."""
        merged: dict[str, tuple[BaseClassifier, int]] = {}
        for h in classifiers:
            previous = merged.get(h.key)
            merged[h.key] = (h, previous[1] + 1 if previous else 1)

        total = len(classifiers)
        return cls([(h, count / total) for h, count in merged.values()])

    @property
    def weights(self) -> npt.NDArray[np.float64]:
        return np.array([w for _, w in self.members], dtype=np.float64)

    @property
    def classifiers(self) -> list[BaseClassifier]:
        return [h for h, _ in self.members]


def member_predictions(q: RandomizedClassifier, features: npt.ArrayLike) -> npt.NDArray[np.int64]:
    return np.vstack([h.predict(features) for h in q.classifiers])


def predict_expected(q: RandomizedClassifier, features: npt.ArrayLike) -> npt.NDArray[np.float64]:
    rv: npt.NDArray[np.float64] = q.weights @ member_predictions(q, features)
    return np.clip(rv, 0.0, 1.0)


def predict_sampled(q: RandomizedClassifier, features: npt.ArrayLike, seed: int) -> npt.NDArray[np.int64]:
    """One member drawn independently per row according to the weights."""
    predictions = member_predictions(q, features)
    rng = np.random.default_rng(seed)
    drawn = rng.choice(len(q.members), size=predictions.shape[1], p=q.weights / q.weights.sum())
    return predictions[drawn, np.arange(predictions.shape[1])]


def _as_predictions(predictions: npt.ArrayLike, n: int) -> npt.NDArray[np.float64]:
    pred = np.asarray(predictions, dtype=np.float64)
    if pred.shape != (n,):
        raise ArgumentError(f"expected {n} predictions, got shape {pred.shape}")

    return pred


def error_of(predictions: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    y = np.asarray(labels, dtype=np.float64)
    pred = _as_predictions(predictions, len(y))
    return float(np.mean(pred * (1 - y) + (1 - pred) * y))


def dp_violation(predictions: npt.ArrayLike, protected: npt.ArrayLike) -> float:
    """max_a |E[h(X) | A=a] - E[h(X)]|."""
    groups = np.asarray(protected, dtype=object)
    pred = _as_predictions(predictions, len(groups))
    overall = pred.mean()
    return max(abs(float(pred[groups == a].mean()) - overall) for a in dict.fromkeys(groups.tolist()))


def eo_violation(predictions: npt.ArrayLike, protected: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """max_{a,y} |E[h(X) | A=a, Y=y] - E[h(X) | Y=y]| over nonempty (a, y) cells."""
    groups = np.asarray(protected, dtype=object)
    y = np.asarray(labels)
    pred = _as_predictions(predictions, len(groups))

    rv = 0.0
    for label in (0, 1):
        label_mask = y == label
        if not label_mask.any():
            raise DegenerateDataError(f"no examples with label {label}")

        overall = pred[label_mask].mean()
        for a in dict.fromkeys(groups.tolist()):
            cell = label_mask & (groups == a)
            if cell.any():
                rv = max(rv, abs(float(pred[cell].mean()) - overall))

    return rv


@dataclass(frozen=True)
class Metrics:
    error: float
    dp_violation: float
    eo_violation: float


def metrics_of(predictions: npt.ArrayLike, ts: TrainingSet) -> Metrics:
    return Metrics(
        error=error_of(predictions, ts.labels),
        dp_violation=dp_violation(predictions, ts.protected),
        eo_violation=eo_violation(predictions, ts.protected, ts.labels) if len(set(ts.labels.tolist())) == 2 else 0.0,
    )


def headline_violation(kind: ConstraintKind, metrics: Metrics) -> float:
    """The violation a run trained under `kind` is judged by: EO for label-conditioned systems, DP otherwise."""
    if kind in (ConstraintKind.EO, ConstraintKind.TPR):
        return metrics.eo_violation

    return metrics.dp_violation


@dataclass
class ArtifactMember:
    weight: float
    classifier: dict[str, Any]


@dataclass
class ModelArtifact:
    learner_kind: str
    feature_names: list[str]
    members: list[ArtifactMember]
    standardization: Standardization | None = None
    constraint_kind: str | None = None
    format_version: int = ARTIFACT_FORMAT_VERSION
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_model(
        cls,
        q: RandomizedClassifier,
        ts: TrainingSet,
        learner_kind: str,
        constraint_kind: str | None = None,
        extra: dict[str, Any] | None = None,
    ) -> Self:
        return cls(
            learner_kind=learner_kind,
            feature_names=list(ts.feature_names),
            members=[ArtifactMember(weight=w, classifier=h.as_dict()) for h, w in q.members],
            standardization=ts.standardization,
            constraint_kind=constraint_kind,
            extra=extra or {},
        )

    @property
    def model(self) -> RandomizedClassifier:
        return RandomizedClassifier([(BaseClassifier.from_dict(m.classifier), m.weight) for m in self.members])

    def save(self, path: str | Path) -> None:
        document = {
            "format_version": self.format_version,
            "learner_kind": self.learner_kind,
            "constraint_kind": self.constraint_kind,
            "feature_names": self.feature_names,
            "standardization": None,
            "members": [{"weight": m.weight, "classifier": m.classifier} for m in self.members],
            "extra": self.extra,
        }
        if self.standardization:
            document["standardization"] = {
                "columns": self.standardization.columns,
                "means": self.standardization.means,
                "scales": self.standardization.scales,
            }

        # json writes floats with repr, so reloading is bit-exact
        with writing(path) as target:
            target.write_text(json.dumps(document, indent=2), encoding="utf-8")

        _LOGGER.debug(f"Model artifact written to {path}")

    @classmethod
    def load(cls, path: str | Path) -> Self:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            artifact = dacite.from_dict(cls, data, config=dacite.Config(strict=True))
        except (OSError, json.JSONDecodeError, dacite.DaciteError, TypeError) as e:
            raise ParseError(f"cannot read model artifact {path}: {e}")

        if artifact.format_version != ARTIFACT_FORMAT_VERSION:
            raise ParseError(f"unsupported artifact format version {artifact.format_version}")

        try:
            artifact.model
        except ArgumentError as e:
            raise ParseError(f"invalid model artifact {path}: {e}")

        return artifact

    def prepare(self, ts: TrainingSet) -> npt.NDArray[np.float64]:
        """Feature matrix of ts in the artifact's column order, standardized like the training data."""
        features = align_features(ts, self.feature_names)
        if self.standardization:
            features = self.standardization.apply(features)

        return features


def align_features(ts: TrainingSet, feature_names: list[str]) -> npt.NDArray[np.float64]:
    """Columns of ts reordered to feature_names.

    A one-hot level the data never shows is an all-zero column as long as its categorical
    column is present; any other difference is a compatibility error.
    """
    encoded = {name.partition(ONE_HOT_SEPARATOR)[0] for name in ts.feature_names if ONE_HOT_SEPARATOR in name}
    for name in feature_names:
        column, separator, _ = name.partition(ONE_HOT_SEPARATOR)
        if name not in ts.feature_names and not (separator and column in encoded):
            raise CompatibilityError(f"feature {name!r} expected by the model is missing from the data")

    for name in ts.feature_names:
        if name not in feature_names:
            raise CompatibilityError(f"feature {name!r} in the data is unknown to the model")

    rv = np.zeros((ts.n, len(feature_names)))
    for pos, name in enumerate(feature_names):
        if name in ts.feature_names:
            rv[:, pos] = ts.features[:, ts.feature_names.index(name)]

    return rv
