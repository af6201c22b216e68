"""Experiment driver and CLI tests."""

import math

import numpy as np
import pytest

from hinv.bench import (BudgetExceededError, ExperimentConfig,
                        ExperimentRecord, assemble_problem, emit_csv, fit_rate,
                        run_experiment)
from hinv.cli import EXIT_BUDGET, EXIT_OK, main, parse_ranks


def synthetic_records(b, s, prefactor=2.0, ranks=range(1, 11)):
    return [ExperimentRecord(rank=r, error=prefactor * math.exp(-b * r ** s),
                             seconds=0.0, storage_floats=0)
            for r in ranks]


class TestFitRate:
    def test_exact_exponential(self):
        fit = fit_rate(synthetic_records(1.2, 1.0), 1.0)
        assert fit.b == pytest.approx(1.2, abs=1e-12)
        assert fit.prefactor == pytest.approx(2.0, rel=1e-12)
        assert fit.correlation == pytest.approx(-1.0, abs=1e-12)
        assert fit.n_used == 10

    def test_sqrt_model(self):
        fit = fit_rate(synthetic_records(2.3, 0.5), 0.5)
        assert fit.b == pytest.approx(2.3, abs=1e-12)
        assert fit.correlation == pytest.approx(-1.0, abs=1e-12)

    def test_floor_rows_excluded(self):
        recs = synthetic_records(1.0, 1.0)
        recs += [ExperimentRecord(rank=99, error=1e-16, seconds=0.0,
                                  storage_floats=0)]
        assert fit_rate(recs, 1.0).n_used == 10

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            fit_rate(synthetic_records(1.0, 1.0, ranks=range(1, 3)), 1.0)


class TestConfig:
    def test_validate_rejects_bad_input(self):
        with pytest.raises(ValueError):
            ExperimentConfig(problem="nosuch", n=4).validate()
        with pytest.raises(ValueError):
            ExperimentConfig(problem="mixed-2d", n=4, target="qr").validate()
        with pytest.raises(ValueError):
            ExperimentConfig(problem="mixed-2d", n=4, ranks=[3, 2]).validate()
        with pytest.raises(ValueError):
            ExperimentConfig(problem="mixed-2d", n=4, ranks=[]).validate()

    def test_budget_guard(self):
        cfg = ExperimentConfig(problem="mixed-2d", n=80, ranks=[1, 2, 3])
        with pytest.raises(BudgetExceededError):
            run_experiment(cfg)

    def test_assemble_problem_dispatch(self):
        for problem, n in (("mixed-2d", 4), ("neumann-2d", 3),
                           ("convdiff-lshape", 4)):
            mesh, dofmap, A = assemble_problem(problem, n)
            assert A.N == dofmap.N > 0


@pytest.fixture(scope="module")
def small_result():
    cfg = ExperimentConfig(problem="mixed-2d", n=8, n_leaf=8,
                           ranks=list(range(1, 7)))
    return run_experiment(cfg)


class TestRunExperiment:
    def test_monotone_error_decay(self, small_result):
        # Below ~1e-12 the estimates sit at the round-off floor, where both
        # monotonicity and power-iteration convergence lose meaning.
        errs = [rec.error for rec in small_result.records]
        assert all(b <= a * (1 + 1e-8) + 1e-12 for a, b in zip(errs, errs[1:]))
        assert all(rec.converged for rec in small_result.records
                   if rec.error > 1e-12)

    def test_metadata(self, small_result):
        assert small_result.N == 64
        assert small_result.c_sp >= 0
        assert {fit.s for fit in small_result.fits} == {1.0, 1.0 / 3.0, 0.5}

    def test_deterministic_error_column(self, small_result):
        cfg = ExperimentConfig(problem="mixed-2d", n=8, n_leaf=8,
                               ranks=list(range(1, 7)))
        again = run_experiment(cfg)
        for a, b in zip(small_result.records, again.records):
            assert (a.rank, a.error, a.storage_floats) == (b.rank, b.error,
                                                           b.storage_floats)

    def test_error_level_stable_under_refinement(self, small_result):
        # At fixed rank the error level (not the decay rate) should move by
        # less than an order of magnitude when N quadruples.
        cfg = ExperimentConfig(problem="mixed-2d", n=16, n_leaf=8,
                               ranks=list(range(1, 7)))
        fine = run_experiment(cfg)
        for a, b in zip(small_result.records, fine.records):
            if min(a.error, b.error) > 1e-10:
                ratio = b.error / a.error
                assert 0.1 < ratio < 10.0

    def test_lu_target(self):
        cfg = ExperimentConfig(problem="mixed-2d", n=8, n_leaf=8,
                               ranks=[1, 2, 4], target="lu")
        result = run_experiment(cfg)
        errs = [rec.error for rec in result.records]
        assert errs[-1] <= errs[0]

    def test_cholesky_target(self):
        cfg = ExperimentConfig(problem="neumann-2d", n=8, n_leaf=8,
                               mode="weak", ranks=[1, 2, 4], target="cholesky")
        result = run_experiment(cfg)
        assert all(rec.error >= 0 for rec in result.records)


class TestEmitCsv:
    def test_empty(self, tmp_path):
        path = tmp_path / "out.csv"
        emit_csv([], [], path)
        assert path.read_text() == "r,error,seconds,storage_floats\n"

    def test_rows_and_footer(self, tmp_path):
        recs = [ExperimentRecord(rank=1, error=0.5, seconds=0.25,
                                 storage_floats=100),
                ExperimentRecord(rank=2, error=0.125, seconds=0.5,
                                 storage_floats=200, converged=False)]
        fits = [fit_rate(synthetic_records(1.5, 1.0), 1.0)]
        path = tmp_path / "out.csv"
        emit_csv(recs, fits, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "r,error,seconds,storage_floats"
        assert lines[1] == "1,0.5,0.25,100"
        assert lines[2] == "2,0.125,0.5,200"
        assert lines[3].startswith("# b=1.5")
        assert lines[4] == "# unconverged_ranks=2"

    def test_byte_identical_re_emit(self, tmp_path):
        recs = synthetic_records(1.1, 1.0)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(recs, [fit_rate(recs, 1.0)], a)
        emit_csv(recs, [fit_rate(recs, 1.0)], b)
        assert a.read_bytes() == b.read_bytes()

    def test_roundtrip_parse(self, tmp_path):
        recs = synthetic_records(0.9, 1.0)
        path = tmp_path / "out.csv"
        emit_csv(recs, [], path)
        data = np.genfromtxt(path, delimiter=",", names=True, comments="#")
        np.testing.assert_allclose(data["error"],
                                   [rec.error for rec in recs], rtol=0)


class TestCli:
    def test_parse_ranks(self):
        assert parse_ranks("1..4") == [1, 2, 3, 4]
        assert parse_ranks("1,2,8") == [1, 2, 8]
        assert parse_ranks("5") == [5]

    def test_run_small(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        code = main(["run", "--problem", "mixed-2d", "--n", "8",
                     "--nleaf", "8", "--ranks", "1..5", "--out", str(out)])
        assert code == EXIT_OK
        assert out.exists()
        captured = capsys.readouterr()
        assert "N=64" in captured.out
        assert "fit s=1" in captured.out

    def test_budget_exit_code(self, tmp_path, capsys):
        code = main(["run", "--problem", "mixed-2d", "--n", "80",
                     "--ranks", "1..3", "--out", str(tmp_path / "x.csv")])
        assert code == EXIT_BUDGET
        assert "error:" in capsys.readouterr().err

    def test_mesh_dump(self, capsys):
        assert main(["mesh-dump", "--problem", "mixed-2d", "--n", "2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "dirichlet" in out and "neumann" in out

    def test_partition_dump(self, capsys):
        assert main(["partition-dump", "--problem", "mixed-2d", "--n", "8",
                     "--nleaf", "8"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert all(line.split()[5] in ("far", "near") for line in lines)

    def test_unknown_command_rejected(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])
