import json
from importlib import resources

import jsonschema
import pytest

from isbm.cli import main, parse_args


def run_cli(args):
    return main(args)


class TestParseArgs:
    def test_simulate_config(self):
        cfg = parse_args([
            "simulate", "--alpha", "0:0.9,0.5:0.1", "--paths", "10",
            "--dt", "1e-4", "--seed", "1", "--out", "x.csv",
        ])
        assert cfg.command == "simulate"
        assert cfg.payload["paths"] == 10
        assert cfg.payload["dt"] == 1e-4
        assert cfg.out == "x.csv"

    def test_density_config(self):
        cfg = parse_args([
            "density", "--alpha", "0:0.5", "--s", "0", "--t", "1",
            "--x", "0", "--y-grid", "-3:3:0.01",
        ])
        assert cfg.payload["y_min"] == -3.0
        assert cfg.payload["y_step"] == 0.01

    def test_alpha_out_of_range_names_token(self, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_args(["density", "--alpha", "0:1.5"])
        assert exc.value.code == 2
        assert "0:1.5" in capsys.readouterr().err

    def test_alpha_missing_origin_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_args(["simulate", "--alpha", "0.2:0.5"])
        assert exc.value.code == 2
        assert "t=0" in capsys.readouterr().err

    def test_alpha_required(self):
        with pytest.raises(SystemExit) as exc:
            parse_args(["simulate", "--dt", "0.01"])
        assert exc.value.code == 2

    def test_bad_y_grid(self):
        with pytest.raises(SystemExit) as exc:
            parse_args(["density", "--alpha", "0:0.5", "--y-grid", "1:2"])
        assert exc.value.code == 2

    def test_inline_alpha_overrides_file(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("t,alpha\n0.0,0.2\n")
        cfg = parse_args(["simulate", "--alpha", "0:0.9", "--alpha-file", str(f)])
        assert cfg.payload["alpha"] == "0:0.9"
        assert "alpha_csv" not in cfg.payload

    def test_alpha_file_used_when_inline_absent(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("t,alpha\n0.0,0.2\n")
        cfg = parse_args(["simulate", "--alpha-file", str(f)])
        assert cfg.payload["alpha_csv"] == "t,alpha\n0.0,0.2\n"

    def test_threads_default_from_env(self, monkeypatch):
        monkeypatch.setenv("ISBM_THREADS", "6")
        cfg = parse_args(["simulate", "--alpha", "0:0.5"])
        assert cfg.payload["threads"] == 6

    def test_alpha_seq_file_errors(self, tmp_path):
        bad = tmp_path / "seq.csv"
        bad.write_text("alpha\n0:0.5\n0:2.0\n")
        with pytest.raises(SystemExit) as exc:
            parse_args(["stability", "--alpha", "0:0.5", "--alpha-seq", str(bad)])
        assert exc.value.code == 2


class TestRun:
    def test_simulate_byte_identical_across_runs_and_threads(self, tmp_path):
        out1, out2, out3 = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        base = ["simulate", "--alpha", "0:0.9,0.5:0.1", "--paths", "3",
                "--dt", "1e-3", "--seed", "7"]
        assert run_cli(base + ["--out", str(out1)]) == 0
        assert run_cli(base + ["--out", str(out2)]) == 0
        assert run_cli(base + ["--threads", "4", "--out", str(out3)]) == 0
        assert out1.read_bytes() == out2.read_bytes() == out3.read_bytes()

    def test_density_output_and_report(self, tmp_path):
        out = tmp_path / "d.csv"
        report = tmp_path / "d.json"
        code = run_cli([
            "density", "--alpha", "0:0.5", "--y-grid", "0:1:0.5",
            "--out", str(out), "--report", str(report),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "y,p"
        body = json.loads(report.read_text())
        schema = json.loads(
            resources.files("isbm.schemas").joinpath("run_report.schema.json").read_text()
        )
        jsonschema.validate(body, schema)
        assert body["config"]["y_step"] == 0.5
        assert body["pass"] is True

    def test_verify_pass_exit_zero(self, tmp_path):
        report = tmp_path / "v.json"
        code = run_cli([
            "verify", "--suite", "uniqueness", "--alpha", "0:0.6",
            "--dt", "1e-3", "--report", str(report),
        ])
        assert code == 0
        body = json.loads(report.read_text())
        assert body["pass"] is True
        assert body["reports"][0]["experiment"] == "uniqueness_probe"

    def test_verify_failure_exit_one(self, tmp_path):
        # approximants drifting away from the limit: stability must fail
        seq = tmp_path / "seq.csv"
        seq.write_text("alpha\n0:0.6\n0:0.8\n0:1.0\n")
        report = tmp_path / "s.json"
        code = run_cli([
            "stability", "--alpha", "0:0.5", "--alpha-seq", str(seq),
            "--paths", "200", "--dt", "1e-3", "--seed", "3",
            "--out", str(tmp_path / "d.csv"), "--report", str(report),
        ])
        assert code == 1
        assert json.loads(report.read_text())["pass"] is False

    def test_stability_contracting_sequence(self, tmp_path):
        seq = tmp_path / "seq.csv"
        seq.write_text("alpha\n0:0.7\n0:0.6\n0:0.52\n")
        out = tmp_path / "d.csv"
        code = run_cli([
            "stability", "--alpha", "0:0.5", "--alpha-seq", str(seq),
            "--paths", "200", "--dt", "1e-3", "--seed", "4", "--out", str(out),
        ])
        assert code == 0
        assert out.read_text().splitlines()[0] == "n,D,se"

    def test_report_is_reproducible_modulo_timestamp(self, tmp_path):
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        base = ["verify", "--suite", "uniqueness", "--alpha", "0:0.6", "--dt", "1e-3"]
        assert run_cli(base + ["--report", str(r1)]) == 0
        assert run_cli(base + ["--report", str(r2)]) == 0
        a, b = json.loads(r1.read_text()), json.loads(r2.read_text())
        a.pop("meta"), b.pop("meta")
        a["config"].pop("report"), b["config"].pop("report")
        assert a == b
