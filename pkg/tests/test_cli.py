"""Command-line contract: subcommands, flags, exit codes, determinism."""

import json

import pytest

from reembody.cli import EXIT_CONFIG, EXIT_OK, build_parser, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParser:
    def test_subcommands_registered(self):
        parser = build_parser()
        actions = [a for a in parser._actions if a.dest == "command"]
        assert set(actions[0].choices) == {
            "serve",
            "simulate",
            "report",
            "validate-routes",
            "schedule",
        }

    def test_no_command_is_an_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "reembody" in capsys.readouterr().out


class TestSimulate:
    def test_generate_writes_csv_and_table(self, capsys, tmp_path):
        out = tmp_path / "t.csv"
        code, stdout, _ = run_cli(
            capsys, "simulate", "--generate", "2", "--seed", "7", "--out", str(out)
        )
        assert code == EXIT_OK
        assert out.exists()
        assert "By condition" in stdout
        assert "Handoff" in stdout
        header = out.read_text().splitlines()[0]
        assert header == "ts_ms,participant,condition,route,event,detail"

    def test_generate_is_deterministic(self, capsys, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert run_cli(capsys, "simulate", "--generate", "3", "--seed", "5", "--out", str(a))[0] == EXIT_OK
        assert run_cli(capsys, "simulate", "--generate", "3", "--seed", "5", "--out", str(b))[0] == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_different_seeds_differ(self, capsys, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run_cli(capsys, "simulate", "--generate", "3", "--seed", "1", "--out", str(a))
        run_cli(capsys, "simulate", "--generate", "3", "--seed", "2", "--out", str(b))
        assert a.read_bytes() != b.read_bytes()

    def test_missing_route_file_names_path(self, capsys, tmp_path):
        out = tmp_path / "t.csv"
        code, _, stderr = run_cli(
            capsys,
            "simulate",
            "--generate",
            "1",
            "--routes",
            "/definitely/not/here.json",
            "--out",
            str(out),
        )
        assert code == EXIT_CONFIG
        assert "/definitely/not/here.json" in stderr

    def test_needs_file_or_generate(self, capsys, tmp_path):
        code, _, stderr = run_cli(capsys, "simulate", "--out", str(tmp_path / "t.csv"))
        assert code == EXIT_CONFIG
        assert "--generate" in stderr

    def test_scenario_file_round_trip(self, capsys, tmp_path):
        scenario = tmp_path / "one.yaml"
        scenario.write_text(
            "scenarios:\n"
            "  - participant: P09\n"
            "    condition: WearableOnly\n"
            "    route: green_circle\n"
            "    utterances:\n"
            "      - {at: start, text: i am at the entrance}\n"
            "      - {at: start, text: where is the green circle}\n"
            "      - {at: arrival, text: i have arrived}\n"
        )
        out = tmp_path / "t.csv"
        code, stdout, _ = run_cli(capsys, "simulate", str(scenario), "--out", str(out))
        assert code == EXIT_OK
        body = out.read_text()
        assert "P09" in body
        assert ",arrival," in body

    def test_bad_scenario_file_is_config_error(self, capsys, tmp_path):
        scenario = tmp_path / "bad.yaml"
        scenario.write_text("scenarios: {not: a list}\n")
        code, _, stderr = run_cli(capsys, "simulate", str(scenario), "--out", str(tmp_path / "t.csv"))
        assert code == EXIT_CONFIG
        assert str(scenario) in stderr

    def test_bad_endpoint_is_config_error(self, capsys, tmp_path):
        code, _, stderr = run_cli(
            capsys,
            "simulate",
            "--generate",
            "1",
            "--endpoint",
            "no-port-here",
            "--out",
            str(tmp_path / "t.csv"),
        )
        assert code == EXIT_CONFIG
        assert "endpoint" in stderr


class TestReport:
    def test_report_renders_table_and_figures(self, capsys, tmp_path):
        csv_path = tmp_path / "t.csv"
        run_cli(capsys, "simulate", "--generate", "2", "--seed", "3", "--out", str(csv_path))
        out_dir = tmp_path / "rep"
        code, stdout, _ = run_cli(capsys, "report", str(csv_path), "--out", str(out_dir))
        assert code == EXIT_OK
        assert "By condition" in stdout
        for name in ("summary.txt", "summary.json", "task_time.png", "interactions.png", "error_rate.png"):
            assert (out_dir / name).exists(), name
        summary = json.loads((out_dir / "summary.json").read_text())
        assert len(summary["trials"]) == 6

    def test_missing_csv_is_config_error(self, capsys, tmp_path):
        code, _, stderr = run_cli(capsys, "report", "/missing/t.csv", "--out", str(tmp_path))
        assert code == EXIT_CONFIG
        assert "/missing/t.csv" in stderr


class TestValidateRoutes:
    def test_default_graph_passes(self, capsys):
        code, stdout, _ = run_cli(capsys, "validate-routes")
        assert code == EXIT_OK
        assert "route graph OK" in stdout
        assert "blue_square" in stdout

    def test_missing_file_exits_config(self, capsys):
        code, _, stderr = run_cli(capsys, "validate-routes", "/gone/routes.json")
        assert code == EXIT_CONFIG
        assert "/gone/routes.json" in stderr

    def test_unreachable_destination_fails(self, capsys, tmp_path):
        broken = tmp_path / "broken.json"
        broken.write_text(
            json.dumps(
                {
                    "start": "a",
                    "destinations": ["b"],
                    "nodes": [
                        {"id": "a", "label": "a spot", "x": 0, "y": 0},
                        {"id": "b", "label": "b spot", "x": 5, "y": 0},
                    ],
                    "edges": [],
                }
            )
        )
        code, _, stderr = run_cli(capsys, "validate-routes", str(broken))
        assert code == EXIT_CONFIG
        assert stderr.strip()


class TestSchedule:
    def test_default_table_shape(self, capsys):
        code, stdout, _ = run_cli(capsys, "schedule")
        lines = stdout.strip().splitlines()
        assert code == EXIT_OK
        assert lines[0].split() == ["participant", "pos", "condition", "route"]
        assert len(lines) == 1 + 72
        assert sum("Handoff" in line for line in lines[1:]) == 24

    def test_csv_output(self, capsys, tmp_path):
        out = tmp_path / "sched.csv"
        code, _, _ = run_cli(capsys, "schedule", "--generate", "6", "--out", str(out))
        assert code == EXIT_OK
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "participant,position,condition,route"
        assert len(rows) == 1 + 18

    def test_zero_participants_is_config_error(self, capsys):
        code, _, stderr = run_cli(capsys, "schedule", "--generate", "0")
        assert code == EXIT_CONFIG
        assert stderr.strip()


class TestServeConfig:
    def test_bad_addr_is_config_error(self, capsys):
        code, _, stderr = run_cli(capsys, "serve", "--addr", "nohost")
        assert code == EXIT_CONFIG
        assert "host:port" in stderr

    def test_port_out_of_range(self, capsys):
        code, _, stderr = run_cli(capsys, "serve", "--addr", "127.0.0.1:70000")
        assert code == EXIT_CONFIG
        assert "out of range" in stderr

    def test_missing_ui_dir(self, capsys):
        code, _, stderr = run_cli(capsys, "serve", "--ui-dir", "/not/a/dir")
        assert code == EXIT_CONFIG
        assert "/not/a/dir" in stderr

    def test_missing_trigger_file(self, capsys):
        code, _, stderr = run_cli(capsys, "serve", "--triggers", "/gone.yaml")
        assert code == EXIT_CONFIG
        assert "/gone.yaml" in stderr
