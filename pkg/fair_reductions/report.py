"""Run records, CSV / JSON-lines writers and tradeoff frontiers."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, fields
import json
import logging
import math
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import pandas as pd

from .dataset import ONE_HOT_SEPARATOR, TrainingSet
from .exceptions import writing
from .expgrad import GapRecord
from .gridsearch import GridPointResult, pareto_front

_LOGGER = logging.getLogger(__name__)

T = TypeVar("T")

RUN_STATUS_OK = "ok"
RUN_STATUS_FAILED = "failed"

# wall-clock time varies between identical runs, so it lives in timings.csv only
NONDETERMINISTIC_FIELDS = ("wall_seconds",)


@dataclass
class RunRecord:
    run_id: str
    command: str
    constraint: str
    learner: str
    eps: float
    eps_source: str
    seed: int
    B: float
    nu: float
    eta: float
    max_iter: int
    iterations: int = 0
    converged: bool = False
    final_gap: float = math.nan
    train_error: float = math.nan
    train_violation: float = math.nan
    train_dp: float = math.nan
    train_eo: float = math.nan
    test_error: float = math.nan
    test_violation: float = math.nan
    test_dp: float = math.nan
    test_eo: float = math.nan
    model_path: str = ""
    status: str = RUN_STATUS_OK
    message: str = ""
    wall_seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == RUN_STATUS_OK


def run_columns() -> list[str]:
    return [f.name for f in fields(RunRecord) if f.name not in NONDETERMINISTIC_FIELDS]


def _write_frame(frame: pd.DataFrame, path: str | Path) -> None:
    with writing(path) as target:
        frame.to_csv(target, index=False, lineterminator="\n")

    _LOGGER.debug(f"Wrote {len(frame)} rows to {path}")


def write_runs(records: Sequence[RunRecord], path: str | Path) -> None:
    _write_frame(pd.DataFrame(run_rows(records), columns=run_columns()), path)


def write_timings(records: Sequence[RunRecord], path: str | Path) -> None:
    frame = pd.DataFrame({"run_id": [r.run_id for r in records], "wall_seconds": [r.wall_seconds for r in records]})
    _write_frame(frame, path)


def write_jsonl(rows: Sequence[dict[str, Any]], path: str | Path) -> None:
    with writing(path) as target, open(target, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


def run_rows(records: Sequence[RunRecord]) -> list[dict[str, Any]]:
    columns = run_columns()
    return [{k: v for k, v in asdict(r).items() if k in columns} for r in records]


def _side_key(side: str) -> Callable[[RunRecord], tuple[float, float]]:
    if side == "train":
        return lambda r: (r.train_error, r.train_violation)

    return lambda r: (r.test_error, r.test_violation)


def run_frontier(records: Sequence[RunRecord], side: str) -> list[RunRecord]:
    """Pareto frontier of successful runs; the test side only considers runs on the train frontier."""
    front = pareto_front([r for r in records if r.ok], _side_key("train"))
    if side == "train":
        return front

    return pareto_front(front, _side_key(side))


def convex_envelope(items: Sequence[T], key: Callable[[T], tuple[float, float]]) -> list[T]:
    """Lower-left convex envelope of the (error, violation) points, by violation ascending."""
    front = pareto_front(items, key)
    hull: list[tuple[float, float, T]] = []
    for item in front:
        error, violation = key(item)
        while len(hull) >= 2:
            (v1, e1, _), (v2, e2, _) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly below the chord
            if (v2 - v1) * (error - e1) - (e2 - e1) * (violation - v1) <= 0:
                hull.pop()
            else:
                break

        hull.append((violation, error, item))

    return [item for _, _, item in hull]


def write_frontier(records: Sequence[RunRecord], side: str, path: str | Path) -> None:
    key = _side_key(side)
    front = run_frontier(records, side)
    envelope = {id(r) for r in convex_envelope(front, key)}
    frame = pd.DataFrame(
        {
            "run_id": [r.run_id for r in front],
            "eps": [r.eps for r in front],
            "error": [key(r)[0] for r in front],
            "violation": [key(r)[1] for r in front],
            "on_envelope": [id(r) in envelope for r in front],
        }
    )
    _write_frame(frame, path)


def grid_rows(results: Sequence[GridPointResult], labels: Sequence[str]) -> list[dict[str, Any]]:
    rows = []
    for result in results:
        row: dict[str, Any] = dict(zip(labels, result.adjustments))
        row |= {
            "train_error": result.train_error,
            "train_violation": result.train_violation,
            "test_error": math.nan if result.test_error is None else result.test_error,
            "test_violation": math.nan if result.test_violation is None else result.test_violation,
            "classifier": result.classifier.key,
        }
        rows.append(row)

    return rows


def write_grid(results: Sequence[GridPointResult], labels: Sequence[str], path: str | Path) -> None:
    _write_frame(pd.DataFrame(grid_rows(results, labels)), path)


def write_trace(history: Sequence[GapRecord], path: str | Path) -> None:
    frame = pd.DataFrame(
        {
            "t": [r.t for r in history],
            "nu_t": [r.nu_t for r in history],
            "L": [r.lagrangian for r in history],
            "L_upper": [r.upper for r in history],
            "L_lower": [r.lower for r in history],
            "max_violation": [r.max_violation for r in history],
            "envelope": [r.envelope for r in history],
        }
    )
    _write_frame(frame, path)


def write_training_set(ts: TrainingSet, path: str | Path) -> None:
    """CSV that load_csv reads back into the same set when the one-hot columns are declared categorical.

    One-hot blocks ("column=level") are folded back into a single column, the label goes last.
    """
    columns: dict[str, Any] = {}
    for idx, name in enumerate(ts.feature_names):
        column, separator, level = name.partition(ONE_HOT_SEPARATOR)
        if not separator:
            columns[name] = [repr(float(v)) for v in ts.features[:, idx]]
            continue

        values = columns.setdefault(column, [None] * ts.n)
        for row in np.flatnonzero(ts.features[:, idx] == 1).tolist():
            values[row] = level

    if ts.protected_name not in columns:
        columns[ts.protected_name] = [str(v) for v in ts.protected.tolist()]

    columns[ts.label_name] = ts.labels.tolist()
    _write_frame(pd.DataFrame(columns), path)


def categorical_columns(ts: TrainingSet) -> list[str]:
    names = [name.partition(ONE_HOT_SEPARATOR)[0] for name in ts.feature_names if ONE_HOT_SEPARATOR in name]
    return list(dict.fromkeys(names))


def write_metrics(rows: Sequence[dict[str, Any]], path: str | Path) -> None:
    _write_frame(pd.DataFrame(list(rows)), path)
