"""End-to-end command tests, run in process through cli.main."""

import csv
import time

import numpy as np
import pytest

from progression import RESULT_COLUMNS, InternalError, evaluate, fit_marginal, save_model
from progression.cli import main


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, ".17g") for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        records = list(csv.reader(fh))
    return records[0], records[1:]


@pytest.fixture(scope="module")
def training_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "train.csv"
    rng = np.random.default_rng(0)
    x = rng.standard_t(3, size=300)
    y = x**3 / 10.0 + rng.standard_normal(300)
    write_csv(path, ["x", "y"], np.column_stack([x, y]))
    return path


@pytest.fixture()
def fitted_model(training_csv, tmp_path):
    model = tmp_path / "model.json"
    rc = main(["fit", "--input", str(training_csv), "--model", str(model),
               "--k", "30", "--trees", "20", "--seed", "1"])
    assert rc == 0
    return model


class TestFit:
    def test_summary_reports_tau0(self, training_csv, tmp_path, capsys):
        model = tmp_path / "model.json"
        rc = main(["fit", "--input", str(training_csv),
                   "--model", str(model), "--k", "30", "--trees", "20"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "tau0 = 0.900" in out
        assert "tail slopes" in out and "gamma" in out
        assert model.exists()

    def test_parametric_summary_shows_tail_lines(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        x = rng.standard_t(4, size=600)
        y = x + 0.5 * rng.standard_normal(600)
        train = tmp_path / "train.csv"
        write_csv(train, ["x", "y"], np.column_stack([x, y]))
        rc = main(["fit", "--input", str(train),
                   "--model", str(tmp_path / "m.json"),
                   "--method", "progression-parametric",
                   "--k", "30", "--trees", "10"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "upper tail line: slope=" in out
        assert "lower tail line: slope=" in out

    def test_response_column_found_by_name(self, tmp_path):
        rng = np.random.default_rng(2)
        x = rng.standard_t(3, size=300)
        y = x + rng.standard_normal(300)
        a = tmp_path / "xy.csv"
        b = tmp_path / "yx.csv"
        write_csv(a, ["x", "y"], np.column_stack([x, y]))
        write_csv(b, ["y", "x"], np.column_stack([y, x]))
        ma = tmp_path / "a.json"
        mb = tmp_path / "b.json"
        assert main(["fit", "--input", str(a), "--model", str(ma),
                     "--k", "30", "--trees", "10"]) == 0
        assert main(["fit", "--input", str(b), "--model", str(mb),
                     "--k", "30", "--trees", "10"]) == 0
        assert ma.read_bytes() == mb.read_bytes()

    def test_refit_is_byte_identical(self, training_csv, tmp_path):
        first = tmp_path / "first.json"
        second = tmp_path / "second.json"
        argv = ["fit", "--input", str(training_csv), "--k", "30",
                "--trees", "20", "--seed", "1", "--model"]
        assert main(argv + [str(first)]) == 0
        assert main(argv + [str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_missing_response_column(self, tmp_path, capsys):
        path = tmp_path / "nolabel.csv"
        write_csv(path, ["a", "b"], np.random.default_rng(3).random((50, 2)))
        rc = main(["fit", "--input", str(path),
                   "--model", str(tmp_path / "m.json")])
        assert rc == 2
        assert "response column named 'y'" in capsys.readouterr().err

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1.0,2.0\noops,3.0\n")
        assert main(["fit", "--input", str(path),
                     "--model", str(tmp_path / "m.json")]) == 2

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("x,y\n1.0,2.0\n3.0\n")
        assert main(["fit", "--input", str(path),
                     "--model", str(tmp_path / "m.json")]) == 2

    def test_duplicate_columns(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("x,x\n1.0,2.0\n")
        assert main(["fit", "--input", str(path),
                     "--model", str(tmp_path / "m.json")]) == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert main(["fit", "--input", str(path),
                     "--model", str(tmp_path / "m.json")]) == 2

    def test_missing_input_file(self, tmp_path):
        assert main(["fit", "--input", str(tmp_path / "nowhere.csv"),
                     "--model", str(tmp_path / "m.json")]) == 2

    def test_non_finite_values(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("x,y\n1.0,nan\n2.0,3.0\n")
        assert main(["fit", "--input", str(path),
                     "--model", str(tmp_path / "m.json")]) == 2

    def test_tail_count_out_of_range(self, training_csv, tmp_path):
        for bad_k in ("100", "4"):
            assert main(["fit", "--input", str(training_csv),
                         "--model", str(tmp_path / "m.json"),
                         "--k", bad_k]) == 2

    def test_degenerate_response_is_a_fit_error(self, tmp_path, capsys):
        path = tmp_path / "flat.csv"
        rng = np.random.default_rng(4)
        write_csv(path, ["x", "y"],
                  np.column_stack([rng.random(200), np.zeros(200)]))
        rc = main(["fit", "--input", str(path),
                   "--model", str(tmp_path / "m.json"), "--k", "20"])
        assert rc == 3
        assert "fit failed" in capsys.readouterr().err

    def test_internal_error_exit_code(self, training_csv, tmp_path,
                                      monkeypatch, capsys):
        import progression.cli as cli_module

        def explode(model, path):
            raise InternalError("continuity check failed")

        monkeypatch.setattr(cli_module, "save_model", explode)
        rc = main(["fit", "--input", str(training_csv),
                   "--model", str(tmp_path / "m.json"),
                   "--k", "30", "--trees", "5"])
        assert rc == 4
        assert "internal error" in capsys.readouterr().err


class TestPredict:
    def test_round_trip_on_training_points(self, fitted_model, training_csv,
                                           tmp_path):
        out = tmp_path / "pred.csv"
        rc = main(["predict", "--model", str(fitted_model),
                   "--input", str(training_csv), "--output", str(out)])
        assert rc == 0
        header, rows = read_csv(out)
        assert header == ["x", "y", "y_hat"]
        assert len(rows) == 300
        in_header, in_rows = read_csv(training_csv)
        assert [r[0] for r in rows] == [r[0] for r in in_rows]
        assert all(np.isfinite(float(r[2])) for r in rows)

    def test_single_row(self, fitted_model, tmp_path):
        inp = tmp_path / "one.csv"
        inp.write_text("x\n1.5\n")
        out = tmp_path / "one_out.csv"
        assert main(["predict", "--model", str(fitted_model),
                     "--input", str(inp), "--output", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == ["x", "y_hat"] and len(rows) == 1

    def test_empty_input_gives_empty_output(self, fitted_model, tmp_path):
        inp = tmp_path / "none.csv"
        inp.write_text("x\n")
        out = tmp_path / "none_out.csv"
        assert main(["predict", "--model", str(fitted_model),
                     "--input", str(inp), "--output", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == ["x", "y_hat"] and rows == []

    def test_rerun_is_byte_identical(self, fitted_model, tmp_path):
        inp = tmp_path / "grid.csv"
        write_csv(inp, ["x"], np.linspace(-20, 20, 50)[:, None])
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for out in (a, b):
            assert main(["predict", "--model", str(fitted_model),
                         "--input", str(inp), "--output", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_model_column(self, fitted_model, tmp_path, capsys):
        inp = tmp_path / "wrong.csv"
        inp.write_text("z\n1.0\n")
        rc = main(["predict", "--model", str(fitted_model),
                   "--input", str(inp), "--output",
                   str(tmp_path / "out.csv")])
        assert rc == 2
        assert "missing model columns" in capsys.readouterr().err

    def test_existing_y_hat_rejected(self, fitted_model, tmp_path):
        inp = tmp_path / "already.csv"
        inp.write_text("x,y_hat\n1.0,2.0\n")
        assert main(["predict", "--model", str(fitted_model),
                     "--input", str(inp),
                     "--output", str(tmp_path / "out.csv")]) == 2

    def test_marginal_model_file_rejected(self, tmp_path):
        rng = np.random.default_rng(5)
        path = tmp_path / "marginal.json"
        save_model(fit_marginal(np.sort(rng.standard_normal(400)), 40), path)
        inp = tmp_path / "q.csv"
        inp.write_text("x\n1.0\n")
        assert main(["predict", "--model", str(path), "--input", str(inp),
                     "--output", str(tmp_path / "out.csv")]) == 2

    def test_missing_model_file(self, tmp_path):
        inp = tmp_path / "q.csv"
        inp.write_text("x\n1.0\n")
        assert main(["predict", "--model", str(tmp_path / "ghost.json"),
                     "--input", str(inp),
                     "--output", str(tmp_path / "out.csv")]) == 2


class TestSimulate:
    def test_smoke_run_under_a_minute(self, tmp_path):
        out = tmp_path / "results.csv"
        start = time.perf_counter()
        rc = main(["simulate", "--scenario", "cubic", "--shift", "variance",
                   "--magnitude", "2.0", "--reps", "1",
                   "--method", "progression-rf,baseline-rf",
                   "--k", "100", "--trees", "100", "--seed", "7",
                   "--output", str(out)])
        elapsed = time.perf_counter() - start
        assert rc == 0
        assert elapsed < 60.0
        header, rows = read_csv(out)
        assert header == list(RESULT_COLUMNS)
        assert [r[3] for r in rows] == ["progression-rf", "baseline-rf"]
        assert all(np.isfinite(float(r[5])) for r in rows)

    def test_fixed_seed_reproduces_results(self, tmp_path):
        argv = ["simulate", "--scenario", "cubic", "--shift", "mean",
                "--magnitude", "1.0", "--reps", "2",
                "--method", "baseline-rf", "--k", "40", "--trees", "10",
                "--seed", "3"]
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main(argv + ["--output", str(a)]) == 0
        assert main(argv + ["--output", str(b)]) == 0
        ha, rows_a = read_csv(a)
        hb, rows_b = read_csv(b)
        timing = ha.index("runtime_ms")
        assert ha == hb
        for ra, rb in zip(rows_a, rows_b):
            assert [v for i, v in enumerate(ra) if i != timing] == \
                   [v for i, v in enumerate(rb) if i != timing]

    def test_unknown_method_name(self, tmp_path):
        assert main(["simulate", "--scenario", "cubic",
                     "--method", "boosting", "--reps", "1",
                     "--output", str(tmp_path / "r.csv")]) == 2

    def test_unknown_scenario_rejected_by_the_parser(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["simulate", "--scenario", "parabola", "--reps", "1",
                  "--output", str(tmp_path / "r.csv")])
        assert info.value.code == 2

    def test_multivariate_fit_via_files_is_guarded(self, tmp_path):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((200, 2))
        y = X.sum(axis=1)
        train = tmp_path / "wide.csv"
        write_csv(train, ["a", "b", "y"], np.column_stack([X, y]))
        rc = main(["fit", "--input", str(train),
                   "--model", str(tmp_path / "m.json"),
                   "--method", "baseline-rf"])
        assert rc == 2


class TestEvaluate:
    def test_metrics_file(self, tmp_path):
        rng = np.random.default_rng(8)
        y = rng.standard_normal(100) + 3.0
        y_hat = y + 0.1 * rng.standard_normal(100)
        m = np.full(100, 3.0)
        inp = tmp_path / "preds.csv"
        write_csv(inp, ["y", "y_hat", "m"], np.column_stack([y, y_hat, m]))
        out = tmp_path / "metrics.csv"
        assert main(["evaluate", "--input", str(inp),
                     "--output", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == ["rmse", "rel_median_err"]
        expected = evaluate(y_hat, y, m, sd_y=float(np.std(y)))
        assert float(rows[0][0]) == expected.rmse
        assert float(rows[0][1]) == expected.rel_median_err

    def test_without_median_column(self, tmp_path):
        inp = tmp_path / "preds.csv"
        write_csv(inp, ["y", "y_hat"], np.ones((10, 2)))
        out = tmp_path / "metrics.csv"
        assert main(["evaluate", "--input", str(inp),
                     "--output", str(out)]) == 0
        _, rows = read_csv(out)
        assert float(rows[0][0]) == 0.0
        assert np.isnan(float(rows[0][1]))

    def test_missing_columns_rejected(self, tmp_path):
        inp = tmp_path / "preds.csv"
        write_csv(inp, ["y", "pred"], np.ones((10, 2)))
        assert main(["evaluate", "--input", str(inp),
                     "--output", str(tmp_path / "m.csv")]) == 2

    def test_no_rows_rejected(self, tmp_path):
        inp = tmp_path / "preds.csv"
        inp.write_text("y,y_hat\n")
        assert main(["evaluate", "--input", str(inp),
                     "--output", str(tmp_path / "m.csv")]) == 2
