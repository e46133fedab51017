import importlib.resources

import pytest

from koordsim.cli import EXIT_COMPILE, EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, main

GOOD_PROGRAM = importlib.resources.files("koordsim.apps.programs").joinpath(
    "averaging.koord"
)

FAST_CONFIG = """\
app: averaging
num_robots: 2
duration: 2.0
device:
  bot_name: drone
  bot_type: QUAD
  planner: RRT_QUAD
  port: 53000
robot:
  pid: 0
  on_device: drone
  start: -1 0 1 0
robot:
  pid: 1
  on_device: drone
  start: 1 0 1 0
"""


@pytest.fixture
def fast_cfg(tmp_path):
    p = tmp_path / "fast.cfg"
    p.write_text(FAST_CONFIG, encoding="utf-8")
    return p


def test_compile_ok(tmp_path, capsys):
    src = tmp_path / "p.koord"
    src.write_text(GOOD_PROGRAM.read_text(encoding="utf-8"), encoding="utf-8")
    assert main(["compile", str(src)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("ok:")
    assert "x" in out


def test_compile_missing_file_is_usage_error(tmp_path):
    assert main(["compile", str(tmp_path / "nope.koord")]) == EXIT_CONFIG


def test_compile_diagnostics_exit_code(tmp_path, capsys):
    src = tmp_path / "bad.koord"
    src.write_text("event E {\n pre: true\n eff: { z = 1 }\n}\n", encoding="utf-8")
    assert main(["compile", str(src)]) == EXIT_COMPILE
    assert "undeclared" in capsys.readouterr().err


def test_compile_empty_program_rejected(tmp_path, capsys):
    src = tmp_path / "empty.koord"
    src.write_text("# nothing here\n", encoding="utf-8")
    assert main(["compile", str(src)]) == EXIT_COMPILE
    assert "no events" in capsys.readouterr().err


def test_simulate_ok_prints_metrics(fast_cfg, capsys):
    assert main(["simulate", str(fast_cfg)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "rounds" in out and "verdict" in out


def test_simulate_unknown_config_is_usage_error(capsys):
    assert main(["simulate", "no-such-config"]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_simulate_accepts_shipped_config_by_name(capsys):
    assert main(["simulate", "lineform", "--duration", "2"]) == EXIT_OK


def test_simulate_writes_trace(fast_cfg, tmp_path):
    out = tmp_path / "run.trace"
    assert main(["simulate", str(fast_cfg), "--trace", str(out)]) == EXIT_OK
    text = out.read_text(encoding="utf-8")
    assert text.startswith("#")
    assert "\tpose\t" in text


def test_simulate_report_directory(fast_cfg, tmp_path, capsys):
    rep_dir = tmp_path / "rep"
    assert main(["simulate", str(fast_cfg), "--report", str(rep_dir)]) == EXIT_OK
    names = {p.name for p in rep_dir.iterdir()}
    assert "positions.csv" in names
    assert "positions.png" in names
    assert "metrics.txt" in names


def test_simulate_violation_exit_code(tmp_path, capsys):
    cfg = tmp_path / "crash.cfg"
    cfg.write_text(
        FAST_CONFIG.replace("app: averaging", "app: task")
        + "d_s: 4.0\ntasks:\n  - 1.5 0.75 1\n  - -1.5 -0.75 1\n",
        encoding="utf-8",
    )
    code = main(["simulate", str(cfg), "--duration", "30"])
    assert code == EXIT_VIOLATION
    assert "monitor violation" in capsys.readouterr().err


def test_scaling_unknown_app_is_usage_error(capsys):
    assert main(["scaling", "task"]) == EXIT_CONFIG


def test_scaling_bad_counts_is_usage_error(capsys):
    assert main(["scaling", "shapeform", "--counts", "two,four"]) == EXIT_CONFIG
    assert main(["scaling", "shapeform", "--counts", "0,4"]) == EXIT_CONFIG


def test_scaling_csv_output(tmp_path, capsys):
    out = tmp_path / "scaling.csv"
    code = main(
        ["scaling", "shapeform", "--counts", "2,4", "--duration", "2", "--out", str(out)]
    )
    assert code == EXIT_OK
    text = out.read_text(encoding="utf-8")
    assert text.startswith("num_robots,")
    assert "# fitted_exponent," in text


def test_scaling_report_renders_figure(tmp_path):
    rep_dir = tmp_path / "rep"
    code = main(
        [
            "scaling",
            "shapeform",
            "--counts",
            "2,4",
            "--duration",
            "2",
            "--report",
            str(rep_dir),
        ]
    )
    assert code == EXIT_OK
    names = {p.name for p in rep_dir.iterdir()}
    assert names >= {"scaling.csv", "scaling.png"}


def test_trace_views(fast_cfg, tmp_path, capsys):
    trace_path = tmp_path / "run.trace"
    assert main(["simulate", str(fast_cfg), "--trace", str(trace_path)]) == EXIT_OK
    capsys.readouterr()
    assert main(["trace", str(trace_path), "positions"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("time,pid,x,y,z")
    assert main(["trace", str(trace_path), "distances"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("time,min_distance")
    assert main(["trace", str(trace_path), "visits"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("task,pid")


def test_trace_missing_file_is_usage_error(tmp_path):
    assert main(["trace", str(tmp_path / "nope.trace"), "positions"]) == EXIT_CONFIG
