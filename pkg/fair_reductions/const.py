from enum import Enum, IntEnum, StrEnum
from typing import Final

POSITIVE: Final = "+"
NEGATIVE: Final = "-"

DEFAULT_CPRIME: Final = 0.1
DEFAULT_ALPHA: Final = 0.5
DEFAULT_MAX_ITER: Final = 5000
DEFAULT_TEST_FRACTION: Final = 0.25
DEFAULT_SEED: Final = 1

DEFAULT_GRID_POINTS: Final = 33

PRACTICAL_ETA0: Final = 2.0
PRACTICAL_MAX_ITER: Final = 50
PRACTICAL_MIN_ITER: Final = 5
REGRET_CHECK_START: Final = 5
REGRET_CHECK_GROWTH: Final = 1.6
GAP_SHRINK: Final = 0.8
ETA_SHRINK: Final = 0.8
ORACLE_TOLERANCE: Final = 1e-9

DEFAULT_SWEEP_EPS_LO: Final = 0.001
DEFAULT_SWEEP_EPS_HI: Final = 0.1
DEFAULT_SWEEP_EPS_POINTS: Final = 10

LOGISTIC_L2: Final = 1e-6
LOGISTIC_MAX_ITER: Final = 100
LOGISTIC_TOLERANCE: Final = 1e-8
STUMP_ROUNDS: Final = 50

ARTIFACT_FORMAT_VERSION: Final = 1
WEIGHT_SUM_TOLERANCE: Final = 1e-12
ENVELOPE_TOLERANCE: Final = 1e-9

CONSTRAINT_FILE_PREFIX: Final = "file:"


class ConstraintKind(StrEnum):
    DP = "dp"
    EO = "eo"
    TPR = "tpr"
    ERROR_RATE = "error_rate"
    FILE = "file"


class LearnerKind(StrEnum):
    LOGISTIC = "logistic"
    STUMPS = "stumps"
    THRESHOLD_1D = "threshold1d"
    CONSTANT = "constant"


class EnvelopePolicy(StrEnum):
    RAISE = "raise"
    WARN = "warn"


class ExitStatus(IntEnum):
    OK = 0
    FAILURE = 1
    USAGE = 2
    NOT_APPLICABLE = 3
    ARTIFACT = 4
    NUMERIC = 5


class SyntheticKind(StrEnum):
    DISPARITY = "disparity"
    ADULT = "adult"


class SolverPreset(StrEnum):
    THEORY = "theory"
    PRACTICAL = "practical"


class Population(Enum):
    """Moment id of the whole population, distinct from every protected value."""

    ALL = "*"

    def __str__(self) -> str:
        return str(self.value)


STAR: Final = Population.ALL
