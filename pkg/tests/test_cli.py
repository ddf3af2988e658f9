"""Command-line surface: subcommands, exit codes, reproducible outputs."""

import json

import pytest

from skysearch import cli
from skysearch.solver import BeliefCollapseError


def run_cli(args, tmp_path, sub="run"):
    return cli.cli_main([sub, "--out", str(tmp_path)] + args)


class TestRun:
    def test_mission_run_writes_trace(self, tmp_path, capsys):
        code = cli.cli_main(["run", "--scenario", "l1", "--mode", "mission",
                             "--seed", "7", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "trajectory.csv").exists()
        assert (tmp_path / "record.json").exists()
        assert (tmp_path / "metrics.csv").exists()
        out = capsys.readouterr().out
        assert "mission run seed=7" in out

    def test_offboard_run_writes_solver_trace(self, tmp_path):
        code = cli.cli_main(["run", "--scenario", "l1", "--mode", "offboard",
                             "--seed", "3", "--out", str(tmp_path)])
        assert code == 0
        trace = (tmp_path / "solver_trace.csv").read_text().splitlines()
        assert trace[0].startswith("t,action,particles,episodes,survival,q_FORWARD")
        assert len(trace) > 1

    def test_seeded_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert cli.cli_main(["run", "--scenario", "l1", "--mode", "mission",
                                 "--seed", "7", "--out", str(out)]) == 0
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
        assert (a / "record.json").read_bytes() == (b / "record.json").read_bytes()


class TestBatchAndCompare:
    def test_batch_metrics_csv(self, tmp_path, capsys):
        code = cli.cli_main(["batch", "--scenario", "l1", "--mode", "mission",
                             "--runs", "5", "--seed", "1", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "records_mission.jsonl").exists()
        text = (tmp_path / "metrics.csv").read_text()
        assert text.startswith("mode,runs,")
        assert "mission,5," in text
        assert "TP%" in capsys.readouterr().out

    def test_records_round_trip(self, tmp_path):
        cli.cli_main(["batch", "--scenario", "l1", "--mode", "mission",
                      "--runs", "3", "--seed", "2", "--out", str(tmp_path)])
        records = cli.read_records(tmp_path / "records_mission.jsonl")
        assert len(records) == 3
        assert all(r.mode == "mission" for r in records)

    def test_metrics_recomputed_from_export_match(self, tmp_path):
        from skysearch.metrics import compute_metrics
        from skysearch.world import load_scenario
        cli.cli_main(["batch", "--scenario", "l1", "--mode", "mission",
                      "--runs", "4", "--seed", "3", "--out", str(tmp_path)])
        records = cli.read_records(tmp_path / "records_mission.jsonl")
        sc = load_scenario("l1")
        m = compute_metrics(records, sc.truth.victims, 2.0)
        row = (tmp_path / "metrics.csv").read_text().strip().splitlines()[1].split(",")
        assert float(row[2]) == pytest.approx(m.tp_pct)
        assert float(row[3]) == pytest.approx(m.fp_pct)

    def test_worker_pool_matches_serial(self, tmp_path):
        from skysearch.world import load_scenario
        sc = load_scenario("l1")
        serial = cli.run_batch(sc, "mission", 4, 9, workers=1)
        pooled = cli.run_batch(sc, "mission", 4, 9, workers=2)
        assert [r.to_dict() for r in serial] == [r.to_dict() for r in pooled]

    def test_heatmap_command(self, tmp_path):
        code = cli.cli_main(["heatmap", "--scenario", "l1", "--mode", "mission",
                             "--runs", "3", "--seed", "4", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "heatmap_mission.csv").exists()
        assert (tmp_path / "heatmap_mission.pgm").exists()


class TestFootprintCommand:
    def test_prints_dimensions(self, capsys):
        assert cli.cli_main(["footprint", "--z", "16"]) == 0
        out = capsys.readouterr().out
        assert "7.0128" in out and "5.1745" in out


class TestExitCodes:
    def test_unknown_flag(self):
        assert cli.cli_main(["batch", "--nonsense"]) == 2

    def test_unknown_subcommand(self):
        assert cli.cli_main(["fly"]) == 2

    def test_unknown_scenario(self, tmp_path, capsys):
        code = cli.cli_main(["run", "--scenario", "mars", "--out", str(tmp_path)])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_belief_collapse_exit(self, tmp_path, monkeypatch):
        def boom(setup):
            raise BeliefCollapseError("no particles left")
        monkeypatch.setattr(cli, "execute_run", boom)
        code = cli.cli_main(["run", "--scenario", "l1", "--mode", "offboard",
                             "--out", str(tmp_path)])
        assert code == 3

    def test_help_exits_zero(self):
        assert cli.cli_main(["--help"]) == 0

    def test_out_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
        assert cli.cli_main(["run", "--scenario", "l1", "--mode", "mission",
                             "--seed", "1"]) == 0
        assert (tmp_path / "envout" / "record.json").exists()
