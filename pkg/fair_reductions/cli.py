"""Command-line entry point: train, sweep, grid, evaluate and synthesize."""

from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
import functools
import json
import logging
import math
from pathlib import Path
import sys
import time
from typing import Any

import colorlog
import dacite
import numpy as np
import voluptuous as vol

from .const import (
    DEFAULT_ALPHA,
    DEFAULT_CPRIME,
    DEFAULT_GRID_POINTS,
    DEFAULT_SEED,
    DEFAULT_SWEEP_EPS_HI,
    DEFAULT_SWEEP_EPS_LO,
    DEFAULT_SWEEP_EPS_POINTS,
    DEFAULT_TEST_FRACTION,
    ConstraintKind,
    EnvelopePolicy,
    ExitStatus,
    LearnerKind,
    SolverPreset,
    SyntheticKind,
)
from .dataset import (
    DatasetSchema,
    TrainingSet,
    fit_standardization,
    load_csv,
    read_columns,
    split,
    standardize_features,
)
from .evaluate import Metrics, ModelArtifact, headline_violation, metrics_of, predict_expected
from .exceptions import ArgumentError, FairReductionsError, ensure_directory
from .expgrad import resolve_config, solve
from .gridsearch import default_grid_spec, grid_search, select_pareto
from .learners import LearnerConfig
from .moments import ConstraintSystem, build_constraint_system, default_epsilon, with_epsilon
from .report import (
    RUN_STATUS_FAILED,
    RunRecord,
    categorical_columns,
    grid_rows,
    run_rows,
    write_frontier,
    write_grid,
    write_jsonl,
    write_metrics,
    write_runs,
    write_timings,
    write_trace,
    write_training_set,
)
from .runner import run_bounded
from .synthetic import write_synthetic

_LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"
DEFAULT_SYNTHETIC_ROWS = 500


def eps_list(value: Any) -> list[float] | None:
    if value is None:
        return None

    try:
        values = [float(v) for v in str(value).split(",") if v.strip()]
    except ValueError:
        raise vol.Invalid(f"cannot parse eps list {value!r}")

    if not values:
        raise vol.Invalid("eps list is empty")

    if any(not math.isfinite(v) or v < 0 for v in values):
        raise vol.Invalid(f"eps values must be finite and nonnegative, got {value!r}")

    return values


def column_list(value: Any) -> list[str]:
    if value is None:
        return []

    return [v.strip() for v in str(value).split(",") if v.strip()]


def _optional(validator: Any) -> Any:
    return vol.Any(None, validator)


_POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))

OPTIONS_SCHEMA = vol.Schema(
    {
        vol.Optional("eps"): eps_list,
        vol.Optional("categorical"): column_list,
        vol.Optional("drop"): column_list,
        vol.Optional("B"): _optional(_POSITIVE),
        vol.Optional("nu"): _optional(_POSITIVE),
        vol.Optional("eta"): _optional(_POSITIVE),
        vol.Optional("max_iter"): _optional(vol.All(int, vol.Range(min=1))),
        vol.Optional("jobs"): vol.All(int, vol.Range(min=1)),
        vol.Optional("rows"): vol.All(int, vol.Range(min=1)),
        vol.Optional("grid_points"): vol.All(int, vol.Range(min=1)),
        vol.Optional("test_fraction"): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=1, min_included=False, max_included=False)
        ),
        vol.Optional("cprime"): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Optional("alpha"): vol.All(vol.Coerce(float), vol.Range(min=0, max=0.5, min_included=False)),
    },
    extra=vol.ALLOW_EXTRA,
)


@dataclass
class CommandOptions:
    command: str
    data: str | None = None
    label: str | None = None
    protected: str | None = None
    categorical: list[str] = field(default_factory=list)
    drop: list[str] = field(default_factory=list)
    test_fraction: float = DEFAULT_TEST_FRACTION
    seed: int = DEFAULT_SEED
    standardize: bool = True
    constraint: str = ConstraintKind.DP
    eps: list[float] | None = None
    cprime: float = DEFAULT_CPRIME
    alpha: float = DEFAULT_ALPHA
    B: float | None = None
    nu: float | None = None
    eta: float | None = None
    max_iter: int | None = None
    learner: LearnerKind = LearnerKind.LOGISTIC
    jobs: int = 1
    out: str | None = None
    jsonl: bool = False
    trace: bool = False
    strict_envelope: bool = False
    preset: SolverPreset = SolverPreset.THEORY
    grid_lo: float | None = None
    grid_hi: float | None = None
    grid_points: int = DEFAULT_GRID_POINTS
    model: str | None = None
    kind: SyntheticKind = SyntheticKind.DISPARITY
    rows: int = DEFAULT_SYNTHETIC_ROWS

    @property
    def out_dir(self) -> Path:
        return Path(self.out or ".")

    @property
    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(kind=self.learner, seed=self.seed)

    def schema(self) -> DatasetSchema:
        if not self.label or not self.protected:
            raise ArgumentError("--label and --protected are required")

        return DatasetSchema(
            label_column=self.label,
            protected_column=self.protected,
            categorical_columns=self.categorical,
            drop_columns=self.drop,
        )

    def echo(self, **resolved: Any) -> str:
        options = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(options | resolved, sort_keys=True)


def parse_options(args: argparse.Namespace) -> CommandOptions:
    try:
        validated = OPTIONS_SCHEMA({k: v for k, v in vars(args).items() if k not in ("verbose", "quiet")})
    except vol.Invalid as e:
        raise ArgumentError(f"invalid option {'.'.join(str(p) for p in e.path) or ''}: {e.msg}")

    return dacite.from_dict(
        CommandOptions,
        {k: v for k, v in validated.items() if v is not None},
        config=dacite.Config(cast=[LearnerKind, SolverPreset, SyntheticKind]),
    )


@dataclass(frozen=True, eq=False)
class PreparedData:
    raw_train: TrainingSet
    raw_test: TrainingSet
    train: TrainingSet
    test: TrainingSet


def prepare_data(options: CommandOptions) -> PreparedData:
    if not options.data:
        raise ArgumentError("--data is required")

    raw = load_csv(options.data, options.schema())
    raw_train, raw_test = split(raw, 1 - options.test_fraction, options.seed)
    if not options.standardize:
        return PreparedData(raw_train, raw_test, raw_train, raw_test)

    standardization = fit_standardization(raw_train)
    return PreparedData(
        raw_train,
        raw_test,
        standardize_features(raw_train, standardization),
        standardize_features(raw_test, standardization),
    )


def write_splits(options: CommandOptions, prepared: PreparedData) -> None:
    write_training_set(prepared.raw_train, options.out_dir / "train.csv")
    write_training_set(prepared.raw_test, options.out_dir / "test.csv")


def _apply_eps(cs: ConstraintSystem, options: CommandOptions, eps: float | None) -> tuple[ConstraintSystem, str]:
    if eps is not None:
        return with_epsilon(cs, eps), "uniform"

    return with_epsilon(cs, default_epsilon(cs, options.cprime, options.alpha)), "derived"


def run_solver(
    options: CommandOptions,
    prepared: PreparedData,
    base: ConstraintSystem,
    eps: float | None,
    run_id: str,
    model_name: str,
) -> RunRecord:
    started = time.perf_counter()
    cs, eps_source = _apply_eps(base, options, eps)
    config = resolve_config(
        prepared.train,
        cs,
        B=options.B,
        nu=options.nu,
        eta=options.eta,
        max_iter=options.max_iter,
        seed=options.seed,
        learner=options.learner_config,
        envelope_policy=EnvelopePolicy.RAISE if options.strict_envelope else EnvelopePolicy.WARN,
        preset=options.preset,
    )
    eps_value = float(cs.eps.max()) if cs.n_constraints else 0.0
    _LOGGER.info(
        f"Run {run_id}: {cs.kind} eps={eps_value:.4g} B={config.B:.4g} nu={config.nu:.4g} eta={config.eta:.4g}"
    )

    result = solve(prepared.train, cs, config)
    train_metrics = metrics_of(predict_expected(result.ensemble, prepared.train.features), prepared.train)
    test_metrics = metrics_of(predict_expected(result.ensemble, prepared.test.features), prepared.test)

    artifact = ModelArtifact.from_model(
        result.ensemble,
        prepared.train,
        learner_kind=options.learner,
        constraint_kind=cs.kind,
        extra={
            "run_id": run_id,
            "eps": eps_value,
            "schema": asdict(options.schema()) | {"categorical_columns": categorical_columns(prepared.raw_train)},
        },
    )
    artifact.save(options.out_dir / model_name)
    if options.trace:
        write_trace(result.gap_history, options.out_dir / f"trace-{run_id}.csv")

    return RunRecord(
        run_id=run_id,
        command=options.echo(B=config.B, nu=config.nu, eta=config.eta, max_iter=config.max_iter, eps=eps_value),
        constraint=str(cs.kind),
        learner=str(options.learner),
        eps=eps_value,
        eps_source=eps_source,
        seed=options.seed,
        B=config.B,
        nu=config.nu,
        eta=config.eta,
        max_iter=config.max_iter,
        iterations=result.iterations,
        converged=result.converged,
        final_gap=result.final_gap,
        train_error=train_metrics.error,
        train_violation=headline_violation(cs.kind, train_metrics),
        train_dp=train_metrics.dp_violation,
        train_eo=train_metrics.eo_violation,
        test_error=test_metrics.error,
        test_violation=headline_violation(cs.kind, test_metrics),
        test_dp=test_metrics.dp_violation,
        test_eo=test_metrics.eo_violation,
        model_path=model_name,
        wall_seconds=time.perf_counter() - started,
    )


def _write_run_reports(options: CommandOptions, records: Sequence[RunRecord]) -> None:
    write_runs(records, options.out_dir / "runs.csv")
    write_timings(records, options.out_dir / "timings.csv")
    if options.jsonl:
        write_jsonl(run_rows(records), options.out_dir / "runs.jsonl")


def _summary(record: RunRecord) -> str:
    if not record.ok:
        return f"{record.run_id}: failed: {record.message}\n"

    return (
        f"{record.run_id}: eps={record.eps:.4g} train error={record.train_error:.4f} "
        f"violation={record.train_violation:.4f} test error={record.test_error:.4f} "
        f"violation={record.test_violation:.4f} iterations={record.iterations} converged={record.converged}\n"
    )


def cmd_train(options: CommandOptions) -> RunRecord:
    if options.eps is not None and len(options.eps) != 1:
        raise ArgumentError("train takes a single --eps value; use sweep for several")

    ensure_directory(options.out_dir)
    prepared = prepare_data(options)
    base = build_constraint_system(options.constraint, prepared.train)
    record = run_solver(options, prepared, base, options.eps[0] if options.eps else None, "train", "model.json")

    write_splits(options, prepared)
    _write_run_reports(options, [record])
    sys.stdout.write(_summary(record))
    return record


def cmd_sweep(options: CommandOptions) -> list[RunRecord]:
    eps_values = options.eps or [
        float(e) for e in np.geomspace(DEFAULT_SWEEP_EPS_LO, DEFAULT_SWEEP_EPS_HI, DEFAULT_SWEEP_EPS_POINTS)
    ]

    ensure_directory(options.out_dir)
    prepared = prepare_data(options)
    base = build_constraint_system(options.constraint, prepared.train)

    run_ids = [f"sweep-{idx:03d}" for idx in range(len(eps_values))]
    calls: list[Callable[[], RunRecord]] = [
        functools.partial(run_solver, options, prepared, base, eps, run_id, f"model-{run_id}.json")
        for eps, run_id in zip(eps_values, run_ids)
    ]
    results = run_bounded(options.jobs, calls)

    records: list[RunRecord] = []
    failures: list[BaseException] = []
    for eps, run_id, result in zip(eps_values, run_ids, results):
        if isinstance(result, BaseException):
            _LOGGER.error(f"Run {run_id} (eps={eps}) failed, skipping it", exc_info=result)
            failures.append(result)
            records.append(
                RunRecord(
                    run_id=run_id,
                    command=options.echo(eps=eps),
                    constraint=str(base.kind),
                    learner=str(options.learner),
                    eps=eps,
                    eps_source="uniform",
                    seed=options.seed,
                    B=math.nan,
                    nu=math.nan,
                    eta=math.nan,
                    max_iter=0,
                    status=RUN_STATUS_FAILED,
                    message=str(result),
                )
            )
        else:
            records.append(result)

    write_splits(options, prepared)
    _write_run_reports(options, records)
    write_frontier(records, "train", options.out_dir / "frontier_train.csv")
    write_frontier(records, "test", options.out_dir / "frontier_test.csv")
    for record in records:
        sys.stdout.write(_summary(record))

    if len(failures) == len(records):
        raise failures[0]

    return records


def cmd_grid(options: CommandOptions) -> None:
    ensure_directory(options.out_dir)
    prepared = prepare_data(options)
    cs = build_constraint_system(options.constraint, prepared.train)
    spec = default_grid_spec(prepared.train, cs, options.grid_lo, options.grid_hi, options.grid_points)

    results = grid_search(prepared.train, cs, spec, options.learner_config, test=prepared.test, jobs=options.jobs)
    frontier = select_pareto(results)

    write_splits(options, prepared)
    write_grid(results, spec.labels, options.out_dir / "grid.csv")
    write_grid(frontier, spec.labels, options.out_dir / "grid_frontier.csv")
    if options.jsonl:
        write_jsonl(grid_rows(results, spec.labels), options.out_dir / "grid.jsonl")

    for result in frontier:
        adjustments = ", ".join(f"{label}={value:.4g}" for label, value in zip(spec.labels, result.adjustments))
        sys.stdout.write(
            f"{adjustments}: train error={result.train_error:.4f} violation={result.train_violation:.4f}\n"
        )


def _evaluation_schema(options: CommandOptions, artifact: ModelArtifact) -> DatasetSchema:
    """Flags first, then the schema recorded in the artifact."""
    recorded = artifact.extra.get("schema", {})
    columns = read_columns(options.data or "")
    label = options.label or recorded.get("label_column")
    protected = options.protected or recorded.get("protected_column")
    if not label or not protected:
        raise ArgumentError("--label and --protected are required for artifacts without a recorded schema")

    return DatasetSchema(
        label_column=label,
        protected_column=protected,
        categorical_columns=options.categorical or list(recorded.get("categorical_columns", [])),
        drop_columns=options.drop or [c for c in recorded.get("drop_columns", []) if c in columns],
    )


def cmd_evaluate(options: CommandOptions) -> Metrics:
    if not options.model or not options.data:
        raise ArgumentError("--model and --data are required")

    artifact = ModelArtifact.load(options.model)
    ts = load_csv(options.data, _evaluation_schema(options, artifact))
    metrics = metrics_of(predict_expected(artifact.model, artifact.prepare(ts)), ts)

    if options.out:
        ensure_directory(options.out_dir)
        rows = [{"model": options.model, "data": options.data, "n": ts.n, **asdict(metrics)}]
        write_metrics(rows, options.out_dir / "metrics.csv")
        if options.jsonl:
            write_jsonl(rows, options.out_dir / "metrics.jsonl")

    sys.stdout.write(
        f"error={metrics.error!r} dp_violation={metrics.dp_violation!r} eo_violation={metrics.eo_violation!r}\n"
    )
    return metrics


def cmd_synthesize(options: CommandOptions) -> None:
    path = options.out_dir
    if not options.out or path.is_dir():
        path = path / f"{options.kind}.csv"

    write_synthetic(options.kind, options.rows, options.seed, path)
    sys.stdout.write(f"{path}\n")


COMMANDS: dict[str, Callable[[CommandOptions], Any]] = {
    "train": cmd_train,
    "sweep": cmd_sweep,
    "grid": cmd_grid,
    "evaluate": cmd_evaluate,
    "synthesize": cmd_synthesize,
}


def _add_data_arguments(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--data", required=True, help="CSV file with a header row")
    parser.add_argument("--label", required=required, help="binary label column")
    parser.add_argument("--protected", required=required, help="protected attribute column")
    parser.add_argument("--categorical", help="comma-separated columns to one-hot encode")
    parser.add_argument("--drop", help="comma-separated columns to ignore")


def _add_split_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--test-fraction", type=float, default=DEFAULT_TEST_FRACTION)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--no-standardize", dest="standardize", action="store_false")
    parser.add_argument("--learner", choices=[str(k) for k in LearnerKind], default=LearnerKind.LOGISTIC)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--jsonl", action="store_true", help="also write JSON-lines reports")


def _add_solver_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--constraint", default=ConstraintKind.DP, help="dp, eo, tpr, error_rate or file:PATH")
    parser.add_argument("--eps", help="uniform slack E, or E,E,... for sweep")
    parser.add_argument("--cprime", type=float, default=DEFAULT_CPRIME, help="slack scale when --eps is absent")
    parser.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="slack exponent when --eps is absent")
    parser.add_argument("--B", dest="B", type=float)
    parser.add_argument("--nu", type=float)
    parser.add_argument("--eta", type=float)
    parser.add_argument("--max-iter", type=int)
    parser.add_argument(
        "--preset",
        choices=[str(p) for p in SolverPreset],
        default=SolverPreset.THEORY,
        help="theory: provable step size and iteration cap; practical: B = 1/min eps, 50 iterations, LP step",
    )
    parser.add_argument("--trace", action="store_true", help="write the gap history of every run")
    parser.add_argument("--strict-envelope", action="store_true", help="fail when the regret envelope is breached")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fair-reductions", description="Fair classification by reduction")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, description in (
        ("train", "solve once and save the randomized classifier"),
        ("sweep", "solve for every eps and report the tradeoff frontier"),
    ):
        sub = commands.add_parser(name, help=description)
        _add_data_arguments(sub)
        _add_split_arguments(sub)
        _add_solver_arguments(sub)

    grid = commands.add_parser("grid", help="grid search over cost adjustments (binary protected attribute)")
    _add_data_arguments(grid)
    _add_split_arguments(grid)
    grid.add_argument("--constraint", default=ConstraintKind.DP, choices=[ConstraintKind.DP, ConstraintKind.EO])
    grid.add_argument("--grid-lo", type=float)
    grid.add_argument("--grid-hi", type=float)
    grid.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS)

    evaluate = commands.add_parser("evaluate", help="metrics of a saved model on a dataset")
    evaluate.add_argument("--model", required=True)
    _add_data_arguments(evaluate, required=False)
    evaluate.add_argument("--out", help="directory for metrics.csv")
    evaluate.add_argument("--jsonl", action="store_true")

    synthesize = commands.add_parser("synthesize", help="write a bundled synthetic dataset")
    synthesize.add_argument("--kind", choices=[str(k) for k in SyntheticKind], default=SyntheticKind.DISPARITY)
    synthesize.add_argument("--rows", type=int, default=DEFAULT_SYNTHETIC_ROWS)
    synthesize.add_argument("--seed", type=int, default=DEFAULT_SEED)
    synthesize.add_argument("--out", help="file or directory to write to")

    return parser


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))

    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.quiet)

    try:
        options = parse_options(args)
        COMMANDS[options.command](options)
    except FairReductionsError as e:
        sys.stderr.write(f"error[{e.category}]: {e}\n")
        return int(e.exit_status)

    return int(ExitStatus.OK)
