import csv
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from cureinv import cli

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def schema():
    return json.loads(resources.files("cureinv").joinpath("report_schema.json").read_text())


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "sim.csv"
    assert cli.main(["simulate", "--seed", "7", "--n", "300", "-o", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def fit_json(data_csv):
    path = data_csv.with_name("fit.json")
    assert cli.main(["fit", "-i", str(data_csv), "--bandwidth-c", "3", "-o", str(path)]) == 0
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _strip_time(text):
    obj = json.loads(text)
    obj.pop("timestamp")
    return obj


def test_shipped_schema_matches_docs(schema):
    assert json.loads((ROOT / "docs" / "report_schema.json").read_text()) == schema


class TestFit:
    def test_report(self, fit_json, schema):
        report = json.loads(fit_json.read_text())
        jsonschema.validate(report, schema)
        assert len(report["beta_hat"]) == 2 and report["command"] == "fit"
        assert report["bandwidth"]["h"] == pytest.approx(3 * 300 ** (-2 / 7))

    def test_recovers_design_parameter(self, fit_json):
        beta = np.array(json.loads(fit_json.read_text())["beta_hat"])
        assert np.all(np.abs(beta - [1.75, 2.0]) <= 0.6)

    def test_deterministic_except_timestamp(self, data_csv, fit_json, tmp_path):
        again = tmp_path / "again.json"
        assert cli.main(["fit", "-i", str(data_csv), "--bandwidth-c", "3", "-o", str(again)]) == 0
        assert _strip_time(again.read_text()) == _strip_time(fit_json.read_text())

    def test_missing_file(self, tmp_path, capsys):
        path = tmp_path / "absent.csv"
        assert cli.main(["fit", "-i", str(path)]) == 1
        assert str(path) in capsys.readouterr().err

    def test_bad_csv(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("time,status,x\n1,7,0\n")
        assert cli.main(["fit", "-i", str(path)]) == 1
        assert "status" in capsys.readouterr().err

    def test_exclusive_bandwidth_flags(self, data_csv):
        with pytest.raises(SystemExit) as exc:
            cli.main(["fit", "-i", str(data_csv), "--cv", "--bandwidth", "0.5"])
        assert exc.value.code == 1

    def test_non_convergence_exit(self, data_csv, tmp_path, monkeypatch):
        real = cli.fit

        def stalled(*args, **kwargs):
            res = real(*args, **kwargs)
            res.converged = False
            return res

        monkeypatch.setattr(cli, "fit", stalled)
        out = tmp_path / "f.json"
        assert cli.main(["fit", "-i", str(data_csv), "-o", str(out)]) == 2
        assert json.loads(out.read_text())["converged"] is False

    def test_internal_error_exit(self, data_csv, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr(cli, "fit", boom)
        assert cli.main(["fit", "-i", str(data_csv)]) == 3
        assert "boom" in capsys.readouterr().err


class TestCurves:
    def test_single_point_grid(self, data_csv, fit_json, tmp_path):
        out = tmp_path / "curves.csv"
        code = cli.main(["curves", "-i", str(data_csv), "--fit-report", str(fit_json),
                         "--x-grid", "0.25:0.25:0.1", "-o", str(out)])
        assert code == 0
        rows = _rows(out)
        assert list(rows[0]) == ["x", "t", "phi_hat", "F_C_tail", "F_T0_tail", "status"]
        t = np.array([float(r["t"]) for r in rows])
        assert np.all(np.diff(t) > 0)
        for col in ("F_C_tail", "F_T0_tail"):
            f = np.array([float(r[col]) for r in rows])
            assert np.all(np.diff(f) <= 0)
        phi = {r["phi_hat"] for r in rows}
        assert len(phi) == 1
        b = json.loads(fit_json.read_text())["beta_hat"]
        eta = b[0] + b[1] * 0.25
        assert float(phi.pop()) == pytest.approx(np.exp(eta) / (1 + np.exp(eta)), abs=1e-12)

    def test_out_of_support_rows_are_marked(self, data_csv, fit_json, tmp_path):
        out = tmp_path / "curves.csv"
        code = cli.main(["curves", "-i", str(data_csv), "--fit-report", str(fit_json),
                         "--x-grid", "0:3:3", "-o", str(out)])
        assert code == 0
        status = [r["status"] for r in _rows(out)]
        assert status[-1] == "empty_neighborhood" and status.count("ok") == len(status) - 1

    def test_fits_when_no_report_given(self, data_csv, tmp_path):
        out = tmp_path / "curves.csv"
        assert cli.main(["curves", "-i", str(data_csv), "--x-grid", "0:0:1", "-o", str(out)]) == 0
        assert len(_rows(out)) > 0


class TestQuantiles:
    def test_levels_ordered(self, data_csv, fit_json, tmp_path):
        out = tmp_path / "q.csv"
        assert cli.main(["quantiles", "-i", str(data_csv), "--fit-report", str(fit_json),
                         "-o", str(out)]) == 0
        rows = _rows(out)
        assert [float(r["p"]) for r in rows] == [0.25, 0.5, 0.75]
        q = [float(r["quantile"]) for r in rows]
        assert q == sorted(q)

    def test_invalid_level(self, data_csv):
        assert cli.main(["quantiles", "-i", str(data_csv), "--quantiles", "0.5,1.2"]) == 1

    def test_bad_report(self, data_csv, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert cli.main(["quantiles", "-i", str(data_csv), "--fit-report", str(bad)]) == 1


class TestSimulate:
    def test_seed_required(self, capsys):
        assert cli.main(["simulate", "--n", "10"]) == 1
        assert "--seed" in capsys.readouterr().err

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert cli.main(["simulate", "--seed", "3", "--n", "20", "--gamma2", "1", "-o", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0] == "time,status,x"

    def test_stdout(self, capsys):
        assert cli.main(["simulate", "--seed", "0x10", "--n", "5"]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 6


class TestBootstrap:
    def test_report(self, data_csv, schema, tmp_path):
        out = tmp_path / "b.json"
        args = ["bootstrap", "-i", str(data_csv), "--seed", "1", "--boot-b", "4", "-o", str(out)]
        assert cli.main(args) == 0
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema)
        boot = report["bootstrap"]
        assert boot["B"] == 4 and len(boot["replicates"]) + boot["failures"] == 4
        again = tmp_path / "b2.json"
        args[-1] = str(again)
        assert cli.main(args) == 0
        assert _strip_time(again.read_text()) == _strip_time(out.read_text())

    def test_seed_required(self, data_csv):
        assert cli.main(["bootstrap", "-i", str(data_csv), "--boot-b", "4"]) == 1

    def test_unstable_exit(self, data_csv, monkeypatch):
        from cureinv import BootstrapUnstable

        def unstable(*args, **kwargs):
            raise BootstrapUnstable("3 of 4 bootstrap refits failed")

        monkeypatch.setattr(cli, "bootstrap", unstable)
        assert cli.main(["bootstrap", "-i", str(data_csv), "--seed", "1", "--boot-b", "4"]) == 2


class TestMcTable:
    def test_csv_and_json(self, tmp_path, schema):
        out, js = tmp_path / "mc.csv", tmp_path / "mc.json"
        args = ["mc-table", "--seed", "5", "--reps", "2", "--n", "40", "--gamma2", "0,1",
                "-o", str(out), "--json-output", str(js)]
        assert cli.main(args) == 0
        rows = _rows(out)
        assert {r["gamma2"] for r in rows} == {"0", "1"}
        assert {r["param"] for r in rows} >= {"beta1", "beta2", "q0.25"}
        report = json.loads(js.read_text())
        jsonschema.validate(report, schema)
        assert len(report["cells"]) == 2

    def test_seed_required(self):
        assert cli.main(["mc-table", "--reps", "2"]) == 1
