"""Thin-client CLI exercised against the in-process service."""

import pytest

from diffmobo.cli import main

TINY_FLAGS = [
    "--n-init", "8",
    "--iterations", "2",
    "--batch", "2",
    "--epochs", "50",
    "--n-conditional", "2",
    "--n-unconditional", "6",
]


class TestListProblems:
    def test_lists_suite(self, capsys):
        assert main(["list-problems"]) == 0
        out = capsys.readouterr().out
        assert "zdt1" in out and "dtlz7" in out


class TestRun:
    def test_run_writes_artifacts(self, tmp_path, capsys):
        rc = main(
            ["run", "--problem", "zdt1", "--d", "4", "--seed", "0", "--out", str(tmp_path)]
            + TINY_FLAGS
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "ok" in out and "median zdt1_4" in out
        run_dir = tmp_path / "zdt1_4" / "full" / "0"
        assert (run_dir / "history.csv").exists()

    def test_variant_flag(self, tmp_path):
        rc = main(
            ["run", "--problem", "zdt1", "--d", "3", "--seed", "1", "--variant", "no_dm",
             "--out", str(tmp_path)]
            + TINY_FLAGS
        )
        assert rc == 0
        assert (tmp_path / "zdt1_3" / "no_dm" / "1" / "history.csv").exists()

    def test_unknown_problem_exits_with_message(self, tmp_path):
        with pytest.raises(SystemExit, match="unknown problem"):
            main(["run", "--problem", "zdt9", "--d", "4", "--seed", "0", "--out", str(tmp_path)])


class TestBench:
    def test_bench_runs_config(self, tmp_path, capsys):
        config = tmp_path / "bench.txt"
        config.write_text(
            "problems = zdt1:3\nseeds = 0, 1\n"
            "[run]\nn_init = 8\niterations = 1\nbatch = 2\n"
            "[generation]\nn_conditional = 2\nn_unconditional = 6\n"
            "[train]\nepochs = 40\n"
        )
        rc = main(["bench", "--config", str(config), "--out", str(tmp_path / "out")])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("[ok ]") == 2
        assert (tmp_path / "out" / "zdt1_3" / "full" / "1" / "front.csv").exists()

    def test_missing_config_file(self):
        with pytest.raises(SystemExit, match="cannot read config"):
            main(["bench", "--config", "/nonexistent.txt"])


class TestPlot:
    def test_plot_from_run(self, tmp_path, capsys):
        assert (
            main(
                ["run", "--problem", "zdt1", "--d", "3", "--seed", "2", "--out", str(tmp_path)]
                + TINY_FLAGS
            )
            == 0
        )
        history = tmp_path / "zdt1_3" / "full" / "2" / "history.csv"
        out = tmp_path / "hv.svg"
        assert main(["plot", "--history", str(history), "--out", str(out)]) == 0
        assert out.exists()
        assert (tmp_path / "hv_medians.csv").exists()

    def test_plot_rejects_missing_history(self, tmp_path):
        with pytest.raises(SystemExit, match="error 422"):
            main(["plot", "--history", str(tmp_path / "no.csv"), "--out", str(tmp_path / "p.svg")])
