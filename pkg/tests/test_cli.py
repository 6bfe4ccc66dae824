import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gpival.cli import main
from gpival.oracles import sine_field
from gpival.persist import sample_from_csv, sample_to_csv
from gpival.space import box_space


def fill(path, out, fld):
    t = sample_from_csv(path.read_text())
    out.write_text(sample_to_csv(t.names, t.points, fld(t.points), t.ids))
    return out


@pytest.fixture(scope="module")
def workflow(tmp_path_factory):
    """Sample, measure, fit and confirm the sine benchmark through the CLI."""
    d = tmp_path_factory.mktemp("cli")
    space = d / "square.json"
    space.write_text(box_space([(0, 1), (0, 1)], ["u", "v"]).to_json())
    fld = sine_field(0.001, 0)
    codes = {}
    codes["sample"] = main(["sample", "--space", str(space), "--size", "80", "--seed", "1",
                            "--out", str(d / "s.csv")])
    codes["test"] = main(["sample", "--space", str(space), "--mode", "test", "--seed", "2",
                          "--existing", str(d / "s.csv"), "--out", str(d / "t.csv")])
    fill(d / "s.csv", d / "sv.csv", fld)
    fill(d / "t.csv", d / "tv.csv", fld)
    codes["fit"] = main(["fit", str(d / "sv.csv"), "--space", str(space), "--isotropic",
                         "--out", str(d / "model.json")])
    codes["confirm"] = main(["confirm", str(d / "model.json"), str(d / "tv.csv"),
                             "--out", str(d / "conf.json")])
    codes["search"] = main(["search", str(d / "model.json"), "--t-lower", "-0.75",
                            "--t-upper", "0.75", "--sensitivity", "0.1",
                            "--out", str(d / "crit.csv")])
    return d, codes


class TestWorkflow:
    def test_outputs_written(self, workflow):
        d, codes = workflow
        for name in ("s.csv", "t.csv", "model.json", "model.json.diagnostics.json",
                     "model.json.variogram.csv", "conf.json", "conf.json.qq.csv", "crit.csv",
                     "crit.csv.json"):
            assert (d / name).is_file(), name
        assert codes["sample"] == codes["test"] == codes["fit"] == codes["search"] == 0

    def test_request_files(self, workflow):
        d, _ = workflow
        s = sample_from_csv((d / "s.csv").read_text())
        t = sample_from_csv((d / "t.csv").read_text())
        assert len(s.ids) == 80 and len(t.ids) == 50 and not s.measured
        assert not {tuple(p) for p in s.points} & {tuple(p) for p in t.points}

    def test_confirm_exit_code_matches_report(self, workflow):
        d, codes = workflow
        rep = json.loads((d / "conf.json").read_text())
        assert codes["confirm"] == (0 if rep["overall"] else 1)
        qq = list(csv.reader((d / "conf.json.qq.csv").open()))
        assert qq[0] == ["theoretical_quantile", "sample_quantile"] and len(qq) == 51

    def test_manifests(self, workflow):
        d, _ = workflow
        man = json.loads((d / "crit.csv.manifest.json").read_text())
        assert man["command"] == "search" and man["seeds"] == {"seed": 0}
        assert str(d / "model.json") in man["inputs"]
        assert str(d / "crit.csv") in man["outputs"]

    def test_search_report(self, workflow):
        d, _ = workflow
        rows = list(csv.DictReader((d / "crit.csv").open()))
        assert rows and list(rows[0]) == ["u", "v", "delta_dB", "model_error_dB", "failure_prob"]
        assert all(float(r["failure_prob"]) >= 0.05 for r in rows)


class TestVerify:
    def write(self, path, rows, header=("config_id", "measured_dB")):
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        return path

    def test_pass(self, tmp_path, capsys):
        p = self.write(tmp_path / "m.csv", [["a", "0.4"], ["b", "-1.5"]])
        assert main(["verify", str(p), "--mpe", "1.5"]) == 0
        assert "overall: PASS" in capsys.readouterr().out

    def test_fail_with_default_mpe(self, tmp_path, capsys):
        p = self.write(tmp_path / "m.csv", [["a", "0.4"], ["b", "-1.7"]])
        assert main(["verify", str(p)]) == 1
        out = capsys.readouterr().out
        assert "1.614" in out and "b" in out.splitlines()[2]

    def test_per_row_mpe_column(self, tmp_path):
        p = self.write(tmp_path / "m.csv", [["a", "1.6", "1.7"]],
                       ("config_id", "measured_dB", "mpe_dB"))
        assert main(["verify", str(p)]) == 0

    def test_missing_column(self, tmp_path):
        p = self.write(tmp_path / "m.csv", [["a", "1"]], ("config_id", "value"))
        assert main(["verify", str(p)]) == 2

    def test_out_file(self, tmp_path, capsys):
        p = self.write(tmp_path / "m.csv", [["a", "2"]])
        assert main(["verify", str(p), "--out", str(tmp_path / "v.txt")]) == 1
        assert capsys.readouterr().out == ""
        assert "FAIL" in (tmp_path / "v.txt").read_text()


class TestErrors:
    def test_missing_file(self, tmp_path):
        assert main(["fit", str(tmp_path / "nope.csv")]) == 2

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("id,x,y\n1,2,3\n")
        assert main(["fit", str(p)]) == 2

    def test_unknown_space(self):
        assert main(["space", "--space", "no-such-space"]) == 2

    def test_half_threshold_pair(self, workflow):
        d, _ = workflow
        assert main(["search", str(d / "model.json"), "--t-lower", "-1"]) == 2

    def test_argparse_usage(self):
        with pytest.raises(SystemExit) as err:
            main(["fit"])
        assert err.value.code == 2


def test_space_command(tmp_path):
    out = tmp_path / "space.json"
    assert main(["space", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert [dim["name"] for dim in d["dimensions"]][:2] == ["f_MHz", "s_mm"]


def test_sar_sample_is_valid(tmp_path):
    from gpival.space import build_sar_array_space
    out = tmp_path / "s.csv"
    assert main(["sample", "--size", "30", "--seed", "4", "--out", str(out)]) == 0
    space = build_sar_array_space()
    pts = sample_from_csv(out.read_text(), space.names).points
    assert len(pts) == 30 and all(space.is_valid(p) for p in pts)


def test_benchmark_json(capsys):
    code = main(["benchmark", "--seed", "0"])
    out = json.loads(capsys.readouterr().out)
    assert code == (0 if out["variogram_ok"] else 1)
    assert np.isfinite(out["coverage_99"]) and "search" in out


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "gpival.cli", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
