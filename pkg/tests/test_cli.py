import csv
import io
import time

import numpy as np
import pytest

from logavgexp.cli import FIG1_HEADER, load_model, main, save_model
from logavgexp.pooling import PoolSpec
from logavgexp.trainer import SyntheticTask, TinyModel, make_pool_spec


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse(text):
    lines = text.splitlines()
    assert lines[0].startswith("# schema=")
    body = [ln for ln in lines if not ln.startswith("#")]
    return lines[0], list(csv.reader(io.StringIO("\n".join(body))))


class TestFig1:
    def test_rows(self, capsys):
        code, out, _ = run(capsys, "fig1")
        assert code == 0
        schema, rows = parse(out)
        assert schema == "# schema=fig1/v1"
        assert rows[0] == FIG1_HEADER
        table = {(r[0], r[1]): r for r in rows[1:]}
        assert table[("lae", "t=1")][2].startswith("0.95")
        assert float(table[("max", "-")][2]) == 1.6
        assert table[("max", "swapped")][3:] == ["0", "0", "1", "0"]
        assert len(rows) == 13

    def test_byte_identical(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["fig1", "--out", str(a)]) == 0
        assert main(["fig1", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestGradcheck:
    def test_pass(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--cases", "20")
        assert code == 0
        _, rows = parse(out)
        assert all(r[-1] == "1" for r in rows[1:])
        assert {r[0] for r in rows[1:]} == {"lae", "lae_logt", "mixed", "gated"}

    def test_tolerance_failure_exit_1(self, capsys):
        code, _, _ = run(capsys, "gradcheck", "--cases", "5", "--tol", "1e-300")
        assert code == 1

    def test_zero_cases(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gradcheck", "--cases", "0"])
        assert exc.value.code == 2

    @pytest.mark.parametrize("tol", ["abc", "-1", "0", "nan"])
    def test_bad_tol(self, capsys, tol):
        with pytest.raises(SystemExit) as exc:
            main(["gradcheck", "--tol", tol])
        assert exc.value.code == 2


class TestPrecisionSweep:
    def test_default_grid_runtime(self, tmp_path):
        out = tmp_path / "sweep.csv"
        start = time.perf_counter()
        assert main(["precision-sweep", "--out", str(out)]) == 0
        assert time.perf_counter() - start < 60
        schema, rows = parse(out.read_text())
        assert schema == "# schema=precision-sweep/v1"
        assert len(rows) == 1 + 11 * 2

    @pytest.mark.parametrize("grid", ["", ","])
    def test_empty_grid(self, grid):
        with pytest.raises(SystemExit) as exc:
            main(["precision-sweep", "--t-grid", grid])
        assert exc.value.code == 2

    def test_unknown_precision(self):
        with pytest.raises(SystemExit) as exc:
            main(["precision-sweep", "--precisions", "quad"])
        assert exc.value.code == 2

    def test_unwritable(self, capsys, tmp_path):
        code, _, err = run(capsys, "precision-sweep", "--t-grid", "1", "--windows", "2",
                           "--out", str(tmp_path / "missing" / "x.csv"))
        assert code == 3
        assert "I/O error" in err


class TestTrain:
    def test_avg_baseline(self, capsys):
        code, out, _ = run(capsys, "train", "--pool", "avg", "--epochs", "2")
        assert code == 0
        _, rows = parse(out)
        assert rows[0] == ["epoch", "train_loss", "eval_accuracy"]
        assert [r[0] for r in rows[1:]] == ["1", "2"]

    def test_per_channel_columns(self, capsys):
        code, out, _ = run(capsys, "train", "--pool", "lae", "--mode", "per_channel",
                           "--epochs", "1")
        assert code == 0
        _, rows = parse(out)
        assert rows[0][3:] == ["t_0", "t_1", "t_2", "t_3"]

    def test_unknown_pool(self):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--pool", "median"])
        assert exc.value.code == 2

    def test_deterministic(self, capsys):
        _, a, _ = run(capsys, "train", "--epochs", "2", "--seed", "3")
        _, b, _ = run(capsys, "train", "--epochs", "2", "--seed", "3")
        assert a == b


class TestModelFile:
    @pytest.mark.parametrize("kind", ["avg", "lae", "mixed", "gated"])
    def test_round_trip(self, kind, tmp_path, rng):
        task = SyntheticTask()
        model = TinyModel.init(task, make_pool_spec(kind, task, 2.5, "per_channel"), seed=4)
        for p in model.pool_parameters():
            p[:] = rng.normal(size=p.shape)
        model.bias[:] = rng.normal(size=model.bias.shape)
        path = tmp_path / "m.csv"
        save_model(model, str(path))
        back = load_model(str(path))
        np.testing.assert_array_equal(back.weights, model.weights)
        np.testing.assert_array_equal(back.bias, model.bias)
        assert back.pool.kind == model.pool.kind
        for a, b in zip(back.pool_parameters(), model.pool_parameters()):
            np.testing.assert_array_equal(a, b)

    def test_bad_file(self, tmp_path):
        path = tmp_path / "junk.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            load_model(str(path))


class TestRobustness:
    def test_empty_sizes(self):
        with pytest.raises(SystemExit) as exc:
            main(["robustness", "--sizes", ""])
        assert exc.value.code == 2

    def test_size_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["robustness", "--sizes", "0,4"])
        assert exc.value.code == 2

    def test_saved_model_crop_pad_normal(self, capsys, tmp_path):
        path = tmp_path / "m.csv"
        assert main(["train", "--epochs", "3", "--save-model", str(path), "--out",
                     str(tmp_path / "log.csv")]) == 0
        code, out, _ = run(capsys, "robustness", "--model", str(path),
                           "--transform", "crop_or_pad_normal", "--sizes", "4,8,12")
        assert code == 0
        schema, rows = parse(out)
        assert schema == "# schema=robustness/v1"
        assert rows[0] == ["pool", "param", "transform", "size", "accuracy"]
        assert [r[3] for r in rows[1:]] == ["4", "8", "12"]
        assert all(r[0] == "lae" and r[2] == "crop_or_pad_normal" for r in rows[1:])

    def test_gated_model_rejected(self, tmp_path):
        task = SyntheticTask()
        path = tmp_path / "g.csv"
        save_model(TinyModel.init(task, PoolSpec.gated_pool(64)), str(path))
        with pytest.raises(SystemExit) as exc:
            main(["robustness", "--model", str(path), "--sizes", "8"])
        assert exc.value.code == 2

    def test_retrain_all_pools(self, capsys):
        code, out, _ = run(capsys, "robustness", "--epochs", "1", "--sizes", "4,8")
        assert code == 0
        _, rows = parse(out)
        assert [r[0] for r in rows[1:]] == ["avg", "avg", "max", "max", "mixed", "mixed",
                                            "lae", "lae"]


def test_missing_model_file_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "robustness", "--model", str(tmp_path / "nope.csv"))
    assert code == 3
