import csv
import json

import numpy as np
import pytest

from axon import core
from axon.cli import derive_seed, main
from axon.core import TrainingSet, train
from axon.yarotsky import verify_bound

SMALL = ["--n", "200", "--eval-grid", "1000", "--solver-restarts", "8", "--max-iters", "200"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _stdout_value(out, key):
    for line in out.splitlines():
        if line.startswith(key + " "):
            return float(line.split()[1])
    raise AssertionError(f"{key} not printed")


class TestSeeds:
    def test_labels_give_independent_streams(self):
        assert derive_seed(0, "axon") != derive_seed(0, "baseline")
        assert derive_seed(0, "axon") == derive_seed(0, "axon")
        assert 0 <= derive_seed(2**40, "sample") < 2**63


class TestTrainEval:
    def test_round_trip(self, tmp_path, capsys):
        model = tmp_path / "m.json"
        assert main(["train", "--problem", "x2", "--k", "10", "--seed", "0", "--out", str(model), *SMALL]) == 0
        trained = _stdout_value(capsys.readouterr().out, "final_rel_l2")
        core.load(model)
        report = _rows(tmp_path / "m.report.csv")
        assert report[0] == ["K", "objective_value", "beta", "train_rel_l2", "eval_rel_l2"]
        assert len(report) == 12
        assert main(["eval", "--model", str(model), "--problem", "x2", "--grid", "1000"]) == 0
        evaluated = _stdout_value(capsys.readouterr().out, "rel_l2")
        assert abs(trained - evaluated) <= 1e-12

    def test_affine_model_evaluates_exactly(self, tmp_path, capsys):
        x = np.linspace(0, 1, 20)
        model, _ = train(TrainingSet(x, x), 0)
        core.save(model, tmp_path / "id.json")
        dump = tmp_path / "pts.csv"
        assert main(["eval", "--model", str(tmp_path / "id.json"), "--problem", "x2", "--grid", "1000", "--dump", str(dump)]) == 0
        rows = np.array(_rows(dump)[1:], dtype=float)
        assert rows.shape == (1000, 3)
        np.testing.assert_allclose(rows[:, 2], rows[:, 0], atol=1e-12)
        np.testing.assert_array_equal(rows[:, 1], rows[:, 0] ** 2)

    def test_unknown_problem_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--problem", "cube", "--k", "1", "--out", str(tmp_path / "m.json")])
        assert exc.value.code == 2

    def test_negative_k_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--problem", "x2", "--k", "-1", "--out", str(tmp_path / "m.json")])
        assert exc.value.code == 2

    def test_dimension_mismatch_exits_2(self, tmp_path):
        x = np.linspace(0, 1, 20)
        core.save(train(TrainingSet(x, x), 0)[0], tmp_path / "m.json")
        assert main(["eval", "--model", str(tmp_path / "m.json"), "--problem", "radial2d"]) == 2

    def test_corrupt_model_exits_1(self, tmp_path, capsys):
        path = tmp_path / "m.json"
        path.write_text('{"format_version": 1, "d": 1')
        assert main(["eval", "--model", str(path), "--problem", "x2", "--grid", "1000"]) == 1
        assert "invalid model file" in capsys.readouterr().err

    def test_schema_path_reported(self, tmp_path, capsys):
        x = np.linspace(0, 1, 50)
        core.save(train(TrainingSet(x, np.abs(x - 0.3)), 1)[0], tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        doc["steps"][0]["beta"] = -1.0
        (tmp_path / "m.json").write_text(json.dumps(doc))
        assert main(["eval", "--model", str(tmp_path / "m.json"), "--problem", "x2", "--grid", "1000"]) == 1
        assert "steps[0].beta" in capsys.readouterr().err


class TestExperiment:
    def test_axon_rows(self, tmp_path):
        out = tmp_path / "run"
        assert main(["experiment", "--problem", "x2", "--kmax", "10", "--methods", "axon", "--out-dir", str(out), *SMALL]) == 0
        rows = _rows(out / "errors.csv")
        assert rows[0] == ["method", "K", "rel_l2"]
        assert [r[1] for r in rows[1:]] == [str(k) for k in range(11)]
        assert {r[0] for r in rows[1:]} == {"axon"}
        basis = _rows(out / "basis.csv")
        assert basis[0] == ["x1"] + [f"phi_{j}" for j in range(1, 7)]
        for name in ("errors.svg", "basis.svg"):
            text = (out / name).read_text()
            assert text.lstrip().startswith("<?xml") and "<svg" in text
        config = json.loads((out / "config.json").read_text())
        assert config["kmax"] == 10 and config["methods"] == ["axon"]

    def test_two_method_groups_and_comparison(self, tmp_path, capsys):
        out = tmp_path / "run"
        argv = [
            "experiment", "--problem", "rd_eps0.01", "--kmax", "3", "--methods", "axon,baseline",
            "--out-dir", str(out), "--restarts", "2", "--epochs", "20", *SMALL,
        ]
        assert main(argv) == 0
        rows = _rows(out / "errors.csv")[1:]
        assert [r[0] for r in rows] == ["axon"] * 4 + ["baseline"] * 3
        comp = _rows(out / "comparison.csv")
        assert comp[0] == ["K", "axon_rel_l2", "baseline_rel_l2", "baseline_worse"]
        assert len(comp) == 4
        stdout = capsys.readouterr().out
        assert "expectation met" in stdout or "WARNING" in stdout
        assert len(_rows(out / "baseline_restarts.csv")) == 1 + 3 * 2

    def test_bit_identical_outputs(self, tmp_path):
        argv = ["experiment", "--problem", "sin20", "--kmax", "4", "--methods", "axon,baseline", "--restarts", "2", "--epochs", "10", *SMALL]
        assert main([*argv, "--out-dir", str(tmp_path / "a")]) == 0
        assert main([*argv, "--out-dir", str(tmp_path / "b")]) == 0
        for name in ("errors.csv", "basis.csv", "baseline_restarts.csv", "comparison.csv", "config.json", "errors.svg", "basis.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_sawtooth_method(self, tmp_path):
        out = tmp_path / "run"
        assert main(["experiment", "--problem", "x2", "--kmax", "3", "--methods", "yarotsky", "--out-dir", str(out), "--eval-grid", "1000"]) == 0
        rows = _rows(out / "errors.csv")[1:]
        assert [r[:2] for r in rows] == [["yarotsky", "1"], ["yarotsky", "2"], ["yarotsky", "3"]]

    def test_sawtooth_method_needs_x2(self, tmp_path):
        assert main(["experiment", "--problem", "sqrt", "--kmax", "3", "--methods", "yarotsky", "--out-dir", str(tmp_path)]) == 2

    def test_bad_methods_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["experiment", "--problem", "x2", "--kmax", "3", "--methods", "sgd", "--out-dir", str(tmp_path)])
        assert exc.value.code == 2


class TestSawtoothCommand:
    def test_csv_matches_table(self, tmp_path):
        out = tmp_path / "y.csv"
        plot = tmp_path / "y.svg"
        assert main(["yarotsky", "--mmax", "12", "--out", str(out), "--plot", str(plot)]) == 0
        rows = _rows(out)
        assert rows[0] == ["m", "bound", "max_error", "ratio"]
        table = verify_bound(12)
        for row, (m, b, e, r) in zip(rows[1:], table):
            assert int(row[0]) == m and float(row[1]) == b and float(row[2]) == e and float(row[3]) == r
            assert float(row[3]) <= 1.0
        assert "<svg" in plot.read_text()

    def test_stdout(self, capsys):
        assert main(["yarotsky", "--mmax", "3", "--grid", "33"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "m,bound,max_error,ratio" and len(lines) == 4

    def test_grid_too_small(self):
        assert main(["yarotsky", "--mmax", "10", "--grid", "100"]) == 2
