"""Bundled synthetic datasets with a built-in group disparity."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd

from .const import SyntheticKind
from .exceptions import ArgumentError, writing

_LOGGER = logging.getLogger(__name__)

ADULT_WORKCLASS = ["Private", "Self-emp", "Gov", "Other"]
ADULT_RACE = ["White", "Black", "Asian-Pac-Islander", "Other"]
ADULT_RACE_PROBS = [0.8, 0.1, 0.06, 0.04]


def _sigmoid(z: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    rv: npt.NDArray[np.float64] = 0.5 * (1 + np.tanh(z / 2))
    return rv


def disparity_frame(rows: int, seed: int) -> pd.DataFrame:
    """Two numeric features, group in {a, b} and a label whose base rate is lower for group b.

    Columns: x1, x2, group, label.
    """
    rng = np.random.default_rng(seed)
    group = np.where(rng.random(rows) < 0.6, "a", "b")
    x1 = rng.normal(np.where(group == "a", 0.5, -0.5), 1.0)
    x2 = rng.normal(0.0, 1.0, rows)
    label = rng.random(rows) < _sigmoid(2.0 * x1 + 0.5 * x2 - np.where(group == "a", 0.0, 1.0))
    return pd.DataFrame(
        {
            "x1": np.round(x1, 4),
            "x2": np.round(x2, 4),
            "group": group,
            "label": label.astype(int),
        }
    )


def adult_frame(rows: int, seed: int) -> pd.DataFrame:
    """Income-style census table: mixed numeric and categorical columns, binary sex and four-valued race.

    Columns: age, education_num, hours_per_week, workclass, race, sex, income (<=50K / >50K).
    """
    rng = np.random.default_rng(seed)
    sex = np.where(rng.random(rows) < 0.67, "Male", "Female")
    race = rng.choice(ADULT_RACE, size=rows, p=ADULT_RACE_PROBS)
    workclass = rng.choice(ADULT_WORKCLASS, size=rows, p=[0.7, 0.12, 0.13, 0.05])
    age = np.clip(rng.normal(38.5, 13.5, rows), 17, 90).round()
    education = np.clip(rng.normal(10.0, 2.5, rows), 1, 16).round()
    hours = np.clip(rng.normal(np.where(sex == "Male", 42.0, 36.0), 11.0), 1, 99).round()

    logit = (
        -8.0
        + 0.04 * age
        + 0.35 * education
        + 0.03 * hours
        + np.where(sex == "Male", 0.9, 0.0)
        + np.where(race == "White", 0.3, 0.0)
        + np.where(workclass == "Self-emp", 0.4, 0.0)
    )
    income = np.where(rng.random(rows) < _sigmoid(logit), ">50K", "<=50K")
    return pd.DataFrame(
        {
            "age": age.astype(int),
            "education_num": education.astype(int),
            "hours_per_week": hours.astype(int),
            "workclass": workclass,
            "race": race,
            "sex": sex,
            "income": income,
        }
    )


def synthetic_frame(kind: str, rows: int, seed: int) -> pd.DataFrame:
    if rows < 1:
        raise ArgumentError(f"rows must be positive, got {rows}")

    try:
        synthetic_kind = SyntheticKind(kind)
    except ValueError:
        raise ArgumentError(f"unknown synthetic dataset {kind!r}, choose from {[str(k) for k in SyntheticKind]}")

    if synthetic_kind == SyntheticKind.ADULT:
        return adult_frame(rows, seed)

    return disparity_frame(rows, seed)


def write_synthetic(kind: str, rows: int, seed: int, path: str | Path) -> None:
    frame = synthetic_frame(kind, rows, seed)
    with writing(path) as target:
        frame.to_csv(target, index=False, lineterminator="\n")

    _LOGGER.info(f"Wrote {rows} {kind} rows to {path}")
