import importlib.resources

import pytest

from koordsim.config import (
    ConfigError,
    default_workspace,
    load_config,
    loads_config,
    parse_nested,
    shipped_config_path,
)

MINIMAL = """\
app: averaging
num_robots: 2
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


def test_parse_nested_basic():
    out = parse_nested(
        "a: 1\nb:\n  c: hello world\n  d: true\nlist:\n  - 1 2 3\n  - 4 5 6\n"
    )
    assert out["a"] == 1
    assert out["b"]["c"] == ("hello", "world")
    assert out["b"]["d"] is True
    assert out["list"] == [(1, 2, 3), (4, 5, 6)]


def test_parse_nested_repeated_blocks_accumulate():
    out = parse_nested("robot:\n  pid: 0\nrobot:\n  pid: 1\n")
    assert [r["pid"] for r in out["robot"]] == [0, 1]


def test_parse_nested_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_nested("a: 1\na: 2\n")


def test_parse_nested_comments_and_blanks_ignored():
    out = parse_nested("# header\na: 1\n\n  # indented comment\nb: 2\n")
    assert out == {"a": 1, "b": 2}


def test_minimal_config_defaults():
    cfg = loads_config(MINIMAL)
    assert cfg.num_robots == 2
    assert cfg.delta == pytest.approx(0.1)
    assert cfg.dt == pytest.approx(0.01)
    assert cfg.d_s == pytest.approx(0.5)
    assert cfg.eps_v == pytest.approx(0.2)
    assert cfg.delta_v == pytest.approx(1.0)
    assert cfg.net.mode == "in_process"
    assert cfg.workspace.bounds.lo == default_workspace().bounds.lo
    assert cfg.program_source  # app resolved to shipped program text


def test_robot_pids_must_cover_range():
    bad = MINIMAL.replace("pid: 1", "pid: 2")
    with pytest.raises(ConfigError, match="pid"):
        loads_config(bad)


def test_duplicate_pid_rejected():
    bad = MINIMAL.replace("pid: 1", "pid: 0")
    with pytest.raises(ConfigError):
        loads_config(bad)


def test_unknown_device_rejected():
    bad = MINIMAL.replace("on_device: drone\n  start: 1", "on_device: ghost\n  start: 1")
    with pytest.raises(ConfigError, match="device"):
        loads_config(bad)


def test_delta_must_be_multiple_of_dt():
    bad = MINIMAL + "delta: 0.105\n"
    with pytest.raises(ConfigError, match="multiple"):
        loads_config(bad)


def test_planner_bot_type_mismatch_rejected():
    bad = MINIMAL.replace("planner: RRT_QUAD", "planner: RRT_CAR")
    with pytest.raises(ConfigError):
        loads_config(bad)


def test_car_must_start_on_ground():
    bad = MINIMAL.replace("bot_type: QUAD", "bot_type: CAR").replace(
        "planner: RRT_QUAD", "planner: RRT_CAR"
    )
    with pytest.raises(ConfigError, match="z"):
        loads_config(bad)


def test_tasks_must_lie_inside_workspace():
    bad = MINIMAL.replace("app: averaging", "app: task") + "tasks:\n  - 99 0 0\n"
    with pytest.raises(ConfigError, match="workspace"):
        loads_config(bad)


def test_unknown_app_rejected():
    with pytest.raises(ConfigError):
        loads_config(MINIMAL.replace("app: averaging", "app: nonexistent"))


def test_udp_ports_derived_from_device_port():
    cfg = loads_config(MINIMAL + "net:\n  mode: udp\n")
    assert cfg.net.mode == "udp"
    assert cfg.net.ports == {0: 53000, 1: 53001}


def test_resolved_items_flat_header():
    cfg = loads_config(MINIMAL + "seed: 7\n")
    items = dict(cfg.resolved_items())
    assert items["num_robots"] == "2"
    assert items["seed"] == "7"
    assert "robot.0" in items and "device.drone" in items


def test_all_shipped_configs_load():
    pkg = importlib.resources.files("koordsim.apps.configs")
    names = sorted(p.name for p in pkg.iterdir() if p.name.endswith(".cfg"))
    assert len(names) >= 7
    for name in names:
        cfg = load_config(shipped_config_path(name[: -len(".cfg")]))
        assert cfg.num_robots >= 1
        assert cfg.program_source


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
