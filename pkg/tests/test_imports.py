def test_imports() -> None:
    from fair_reductions import ConstraintSystem, GridSpec, ModelArtifact, RandomizedClassifier, solve
    from fair_reductions.cli import main
    from fair_reductions.gridsearch import grid_search
    from fair_reductions.report import write_runs
    from fair_reductions.synthetic import write_synthetic

    for o in [
        ConstraintSystem,
        GridSpec,
        ModelArtifact,
        RandomizedClassifier,
        solve,
        main,
        grid_search,
        write_runs,
        write_synthetic,
    ]:
        assert o
