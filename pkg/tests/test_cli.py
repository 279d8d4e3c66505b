import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from widthsde import cli
from widthsde.errors import ConfigError

MINIMAL = '{"subcommand":"params","profile":"gaussian","physical":{"lambda":1,"d_r":1,"mass_sq":3.14159265}}'


def test_minimal_config():
    cfg = cli.parse_config(MINIMAL)
    assert cfg.subcommand == "params" and cfg.profile == "gaussian" and cfg.seed == 0


def test_roundtrip():
    for text in (MINIMAL, '{"subcommand":"control","params":{"delta":3,"gamma":2,"d":1},"control":{"n_random":3}}'):
        cfg = cli.parse_config(text)
        assert cli.parse_config(cfg.to_json()) == cfg


@pytest.mark.parametrize("text,field", [
    ('{"subcommand":"params","profile":"gaussian","params":{"delta":3,"gamma":2,"d":1}}', "exactly one"),
    ('{"subcommand":"params"}', "exactly one"),
    ('{"subcommand":"nope","profile":"gaussian"}', "subcommand"),
    ('{"subcommand":"params","profile":"gaussian","colour":1}', "colour"),
    ('{"subcommand":"simulate","profile":"gaussian","simulate":{"dt":1}}', "simulate"),
    ('{"subcommand":"simulate","profile":"gaussian","control":{}}', "control"),
    ('{"subcommand":"simulate","params":{"delta":3,"gamma":2}}', "params.d"),
    ('{"subcommand":"simulate","profile":"gaussian","seed":-1}', "seed"),
    ('{"subcommand":"simulate","profile":"gaussian","integrator":{"scheme":"rk"}}', "scheme"),
    ('{"subcommand":"params",\n "profile": }', "line 2"),
])
def test_config_errors(text, field):
    with pytest.raises(ConfigError, match=field):
        cli.parse_config(text)


def run_cfg(tmp_path, text, name="out", **over):
    cfg = cli.parse_config(text, {"output_dir": str(tmp_path / name), **over})
    status, manifest = cli.run(cfg)
    return status, manifest, tmp_path / name


def test_params_run(tmp_path):
    status, manifest, out = run_cfg(tmp_path, MINIMAL)
    assert status == 0
    rep = json.loads((out / "params.json").read_text())
    assert rep["delta"] == pytest.approx(3, rel=1e-7) and rep["gamma"] == pytest.approx(2, rel=1e-7)
    assert rep["d"] == pytest.approx(8 * math.pi, rel=1e-7) and rep["amp"] == pytest.approx(1, rel=1e-7)
    m = json.loads((out / "manifest.json").read_text())
    assert {"config", "seed", "versions", "wall_time_s", "exit_status"} <= set(m)


def test_verify_rank_map_exits_zero(tmp_path):
    text = json.dumps({"subcommand": "verify", "params": {"delta": 3, "gamma": 2, "d": 1},
                       "verify": {"claims": [{"claim": "rank_map"}]}})
    status, _, out = run_cfg(tmp_path, text)
    assert status == 0
    assert json.loads((out / "reports.jsonl").read_text())["pass"] is True


def test_verify_failing_claim_exits_two(tmp_path):
    text = json.dumps({"subcommand": "verify", "params": {"delta": 3, "gamma": 2, "d": 1},
                       "verify": {"claims": [{"claim": "rank_map", "xi_range": [0, 1]}]}})
    assert run_cfg(tmp_path, text)[0] == 2


def test_decay_on_synthetic_file(tmp_path):
    t = np.linspace(0, 100, 10001)
    f = tmp_path / "exp.csv"
    np.savetxt(f, np.column_stack([t, np.exp(-t), -np.exp(-t)]), delimiter=",", header="t,x,y", comments="")
    text = json.dumps({"subcommand": "decay", "params": {"delta": 3, "gamma": 2, "d": 1},
                       "decay": {"input": str(f), "window_length": 2.0}})
    status, _, out = run_cfg(tmp_path, text)
    rep = json.loads((out / "decay.json").read_text())
    assert rep["slope"] == pytest.approx(-1.0, abs=1e-9)
    # a decaying path is the failing outcome of the no-decay claim
    assert status == 2


def test_error_exits_one(tmp_path):
    text = json.dumps({"subcommand": "decay", "params": {"delta": 3, "gamma": 2, "d": 1},
                       "decay": {"init": [1.0, 0.0], "window_length": 5.0}})
    status, manifest, _ = run_cfg(tmp_path, text)
    assert status == 1 and "InsufficientData" in manifest["error"]


def test_byte_identical_artifacts(tmp_path):
    text = json.dumps({"subcommand": "simulate", "params": {"delta": 3, "gamma": 2, "d": 1}, "seed": 11,
                       "simulate": {"n_paths": 2}, "integrator": {"dt": 1e-2, "t_end": 2.0}})
    run_cfg(tmp_path, text, "a")
    run_cfg(tmp_path, text, "b")
    for name in ("path_0000.csv", "path_0001.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_workers_do_not_change_results(tmp_path):
    text = json.dumps({"subcommand": "timechange", "params": {"delta": 3, "gamma": 2, "d": 1}, "seed": 4,
                       "timechange": {"n_paths": 16, "save_paths": 0}})
    run_cfg(tmp_path, text, "w1", workers=1)
    run_cfg(tmp_path, text, "w2", workers=2)
    assert (tmp_path / "w1" / "terminal.csv").read_bytes() == (tmp_path / "w2" / "terminal.csv").read_bytes()


def test_control_run(tmp_path):
    text = json.dumps({"subcommand": "control", "params": {"delta": 3, "gamma": 2, "d": 1},
                       "control": {"endpoints": [[1, 0, 0.5, 0]], "n_random": 2, "dt": 1e-3}})
    status, _, out = run_cfg(tmp_path, text)
    rep = json.loads((out / "control_report.json").read_text())
    assert len(rep["pairs"]) == 3 and (out / "control_0002.csv").exists()
    assert status == (0 if rep["pass"] else 2)


def test_main_entry_point(tmp_path):
    env = dict(os.environ, WIDTH_SDE_WORKERS="1")
    out = tmp_path / "m"
    proc = subprocess.run([sys.executable, "-m", "widthsde", "params", "--profile", "gaussian", "--output-dir",
                           str(out)], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert json.loads((out / "params.json").read_text())["gamma"] == pytest.approx(2, rel=1e-7)
    proc = subprocess.run([sys.executable, "-m", "widthsde", "simulate", "--params", "3,2", "--output-dir",
                           str(out)], capture_output=True, text=True, env=env)
    assert proc.returncode == 1 and "delta,gamma,d" in proc.stderr


def test_print_config(capsys):
    assert cli.main(["control", "--params", "3,2,1", "--print-config"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["control"]["n_grid"] == 10001 and doc["params"] == {"delta": 3.0, "gamma": 2.0, "d": 1.0}
