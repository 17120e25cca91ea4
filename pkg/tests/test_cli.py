import json
import subprocess
import sys

import numpy as np

from fastjl import cli
from fastjl.linalg import load_matrix_csv, save_matrix_csv
from fastjl.randomness import BitSource


def run_cli(args):
    return cli.main(list(args))


class TestExitCodes:
    def test_selftest_ok(self, capsys):
        assert run_cli(["selftest", "--seed", "7"]) == 0
        assert "selftest passed" in capsys.readouterr().out

    def test_usage_error_is_one(self, capsys):
        assert run_cli(["gen", "--bogus"]) == 1

    def test_privacy_precondition_is_two(self, tmp_path, capsys):
        path = tmp_path / "a.csv"
        save_matrix_csv(path, np.eye(4) * 0.01)
        code = run_cli([
            "dp", "publish", "--matrix", str(path), "--alpha", "1.0",
            "--beta", "0.1", "--r", "4", "--out", str(tmp_path / "y.csv"),
        ])
        assert code == 2

    def test_second_moment_publish(self, tmp_path, capsys):
        path = tmp_path / "a.csv"
        save_matrix_csv(path, BitSource(4).draw_gaussian(12).reshape(3, 4))
        out = tmp_path / "y.csv"
        code = run_cli([
            "dp", "publish", "--matrix", str(path), "--alpha", "inf",
            "--beta", "0.1", "--r", "4", "--mode", "second",
            "--kind", "dense-gaussian", "--seed", "2", "--out", str(out),
        ])
        assert code == 0
        assert load_matrix_csv(out).shape == (4, 3)

    def test_resource_error_is_three(self, tmp_path, capsys):
        code = run_cli([
            "gen", "--kind", "new-rademacher", "--n", str(2**15), "--r", "64",
            "--allow-large-r", "--seed", "1",
            "--realize", str(tmp_path / "big.csv"),
        ])
        assert code == 3

    def test_io_error_is_three(self, capsys):
        code = run_cli([
            "jlp", "--kind", "new-rademacher", "--n", "64", "--r", "4",
            "--eps", "0.5", "--trials", "1000", "--seed", "1",
            "--out", "/nonexistent-dir/report.json",
        ])
        assert code == 3


class TestGen:
    def test_realize_shape(self, tmp_path, capsys):
        out = tmp_path / "m.csv"
        code = run_cli([
            "gen", "--kind", "new-rademacher", "--n", "16", "--r", "4",
            "--seed", "1", "--allow-large-r", "--realize", str(out),
        ])
        assert code == 0
        m = load_matrix_csv(out)
        assert m.shape == (4, 16)


class TestReports:
    def test_jlp_report_round_trip(self, tmp_path, capsys):
        out = tmp_path / "rep.json"
        code = run_cli([
            "jlp", "--kind", "dense-gaussian", "--n", "64", "--r", "8",
            "--eps", "0.5", "--trials", "1000", "--seed", "3",
            "--out", str(out), "--deterministic",
        ])
        assert code == 0
        payload = json.loads(out.read_text())
        rep = payload["report"]
        assert payload["version"] and payload["argv"]
        assert rep["failure_rate"] == rep["failure_count"] / rep["trials"]
        assert "timestamp" not in payload
        for key in ("kind", "n", "r", "epsilon", "trials", "family",
                    "wilson_ci_95", "distortion_quantiles", "seed"):
            assert key in rep

    def test_deterministic_flag_byte_identical(self, tmp_path, capsys):
        args = [
            "jlp", "--kind", "new-rademacher", "--n", "64", "--r", "4",
            "--eps", "0.5", "--trials", "1000", "--seed", "5", "--deterministic",
        ]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run_cli(args + ["--out", str(a)]) == 0
        assert run_cli(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_attack_report(self, tmp_path, capsys):
        out = tmp_path / "atk.json"
        code = run_cli([
            "attack", "--target", "hash-sparse", "--n", "64", "--w", "10",
            "--trials", "1000", "--seed", "2", "--out", str(out),
        ])
        assert code == 0
        rep = json.loads(out.read_text())["report"]
        assert rep["advantage"] >= 0.2

    def test_bench_report(self, tmp_path, capsys):
        out = tmp_path / "bench.json"
        code = run_cli([
            "bench", "--kind", "new-rademacher", "--n-range", "1024:2048",
            "--r", "16", "--reps", "5", "--warmups", "1", "--seed", "1",
            "--out", str(out),
        ])
        assert code == 0
        rep = json.loads(out.read_text())["report"]
        assert len(rep["sizes"]) == 2
        assert len(rep["doubling_ratios"]) == 1


class TestDpStream:
    def test_mm_script(self, tmp_path, capsys):
        script = tmp_path / "updates.csv"
        lines = []
        for c in range(4):
            e = ["0.0"] * 4
            e[c] = "1.0"
            lines.append(",".join(["A", str(c)] + e))
            lines.append(",".join(["B", str(c)] + e))
        script.write_text("\n".join(lines) + "\n")
        out = tmp_path / "prod.csv"
        code = run_cli([
            "dp", "stream", "--script", str(script), "--mode", "mm",
            "--alpha", "inf", "--beta", "0.1", "--r", "128",
            "--kind", "dense-gaussian", "--seed", "4", "--out", str(out),
        ])
        assert code == 0
        prod = load_matrix_csv(out)
        assert np.abs(prod - np.eye(4)).max() < 0.4

    def test_lr_script(self, tmp_path, capsys):
        script = tmp_path / "updates.csv"
        lines = []
        for c in range(4):
            e = ["0.0"] * 4
            e[c] = "1.0"
            lines.append(",".join([str(c)] + e))
        script.write_text("\n".join(lines) + "\n")
        bvec = tmp_path / "b.csv"
        save_matrix_csv(bvec, np.array([[1.0, 2.0, 3.0, 4.0]]))
        out = tmp_path / "x.csv"
        code = run_cli([
            "dp", "stream", "--script", str(script), "--mode", "lr",
            "--alpha", "inf", "--beta", "0.1", "--r", "64",
            "--kind", "dense-gaussian", "--seed", "4",
            "--query", str(bvec), "--out", str(out),
        ])
        assert code == 0
        x = load_matrix_csv(out).ravel()
        assert np.abs(x - [1, 2, 3, 4]).max() < 1e-6


class TestDpCut:
    def test_cut_command(self, tmp_path, capsys):
        graph = tmp_path / "edges.csv"
        graph.write_text("0,1,1.0\n1,2,1.0\n0,2,1.0\n")
        code = run_cli([
            "dp", "cut", "--graph", str(graph), "--set", "0",
            "--vertices", "4", "--alpha", "1.0", "--beta", "0.1",
            "--r", "256", "--seed", "5",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "estimate" in out and "exact" in out


class TestEnvSeed:
    def test_fastjl_seed_fallback(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("FASTJL_SEED", "99")
        parser = cli.build_parser()
        args = parser.parse_args(["selftest"])
        assert args.seed == 99


class TestConsoleScript:
    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "fastjl.cli", "selftest", "--seed", "1"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "selftest passed" in proc.stdout
