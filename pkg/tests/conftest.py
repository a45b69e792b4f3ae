import numpy as np
import pytest

from fair_reductions.dataset import TrainingSet
from fair_reductions.synthetic import disparity_frame


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale tests")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--runslow"):
        return

    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def d4() -> TrainingSet:
    return TrainingSet.from_arrays([0.0, 0.0, 1.0, 0.0], ["a", "a", "b", "b"], [0, 0, 1, 1])


@pytest.fixture
def d6() -> TrainingSet:
    return TrainingSet.from_arrays(
        [0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
        ["a", "a", "b", "b", "a", "b"],
        [0, 1, 0, 1, 0, 1],
    )


@pytest.fixture
def single_group() -> TrainingSet:
    return TrainingSet.from_arrays([0.0, 1.0, 2.0, 3.0, 4.0], ["a"] * 5, [0, 0, 1, 1, 1])


def disparity_set(rows: int, seed: int = 3) -> TrainingSet:
    frame = disparity_frame(rows, seed)
    return TrainingSet.from_arrays(
        frame[["x1", "x2"]].to_numpy(dtype=np.float64),
        frame["group"].to_numpy(dtype=object),
        frame["label"].to_numpy(),
        feature_names=["x1", "x2"],
    )


@pytest.fixture
def disparity() -> TrainingSet:
    return disparity_set(500)
