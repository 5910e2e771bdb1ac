import json
import subprocess
import sys

import numpy as np
import pytest

from unicusum.alphabet_dist import Categorical, draw, make_rng, write_stream
from unicusum.cli import code_stats_csv, main
from unicusum.config import parse_config
from unicusum.errors import LambdaOutsideWindow, ParseError, ValidationError

MINIMAL = {"mu0": [0.5, 0.5], "mu1": [0.9, 0.1], "lambda": 0.2, "gamma": 1024}


def test_minimal_config_gets_defaults():
    cfg = parse_config(json.dumps(MINIMAL))
    assert cfg.k == 2 and cfg.mode == "empirical" and cfg.penalty == "window"
    assert cfg.smoothing == "none" and cfg.code == "kt" and cfg.seed == 0
    echoed = cfg.to_dict()
    assert echoed["lambda"] == 0.2 and echoed["n0"] == 10_000


def test_config_from_file_and_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(MINIMAL))
    cfg = parse_config(str(p), {"seed": 9, "trials": None})
    assert cfg.seed == 9 and cfg.trials == 1000


def test_config_errors():
    with pytest.raises(ValidationError) as info:
        parse_config({**MINIMAL, "mu0": [0.5, 0.4]})
    assert info.value.field == "mu0"
    with pytest.raises(LambdaOutsideWindow) as info:
        parse_config({**MINIMAL, "mode": "jbpage", "lambda": 0.7})
    assert info.value.window[1] == pytest.approx(0.531, abs=1e-3)
    with pytest.raises(ParseError):
        parse_config("{not json")
    with pytest.raises(ParseError):
        parse_config("/nonexistent/config.json")
    with pytest.raises(ValidationError):
        parse_config({**MINIMAL, "bogus": 1})
    with pytest.raises(ValidationError):
        parse_config({**MINIMAL, "gamma": 1.0})
    with pytest.raises(ValidationError):
        parse_config({**MINIMAL, "k": 3})


@pytest.fixture
def stream_file(tmp_path):
    rng = make_rng(1)
    s = np.concatenate([draw(Categorical([0.5, 0.5]), 1100, rng),
                        draw(Categorical([0.9, 0.1]), 200, rng)])
    path = tmp_path / "s.txt"
    write_stream(path, s)
    return path


def _cfg(tmp_path, **kw):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({**MINIMAL, "n0": 1000, **kw}))
    return str(p)


def test_detect_alarm_and_trace(tmp_path, stream_file, capsys):
    trace = tmp_path / "trace.csv"
    code = main(["detect", str(stream_file), "--config", _cfg(tmp_path), "--trace", str(trace)])
    assert code == 2
    out = json.loads(capsys.readouterr().out)
    assert out["report"]["stopped"] and out["version"] == "0.1.0"
    assert out["config"]["lambda"] == 0.2 and out["estimate"]["n0"] == 1000
    rows = trace.read_text().splitlines()
    assert rows[0] == "n,statistic" and len(rows) == out["report"]["stop_time"] + 1


def test_detect_no_alarm(tmp_path, stream_file, capsys):
    code = main(["detect", str(stream_file), "--config", _cfg(tmp_path), "--gamma", "1e300"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["report"]["stopped"] is False


def test_detect_binary_and_aux(tmp_path, capsys):
    s = draw(Categorical([0.9, 0.1]), 500, make_rng(2))
    write_stream(tmp_path / "s.bin", s, binary=True)
    cfg = _cfg(tmp_path, mode="jbpage", gamma=None, alpha=0.01)
    assert main(["detect", str(tmp_path / "s.bin"), "--binary", "--aux", "--config", cfg]) == 2


def test_detect_errors(tmp_path, stream_file, capsys):
    assert main(["detect", str(stream_file), "--config", _cfg(tmp_path), "--lambda", "0.9"]) == 1
    assert "LambdaOutsideWindow" in capsys.readouterr().err
    bad = tmp_path / "bad.txt"
    bad.write_text("0\n1\n7\n")
    assert main(["detect", str(bad), "--config", _cfg(tmp_path, mode="jbpage")]) == 1


def test_simulate_byte_identical(tmp_path, capsys):
    cfg = _cfg(tmp_path, trials=40, horizon=1500, seed=5)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "trial,seed,m,stop_time,delay,false_alarm,censored" in a.read_text()
    summary = json.loads(a.with_suffix(".json").read_text())
    assert summary["run_config"]["seed"] == 5 and summary["version"] == "0.1.0"


@pytest.mark.parametrize("experiment,extra", [
    ("error-prob", {"gamma": None, "alpha": 0.05, "lambda": 0.5, "mu1": None, "delta": 0.05}),
    ("arl", {"lambda": 0.5, "gamma": 8, "mode": "jbpage", "horizon": 2000}),
    ("slope", {"mode": "page"}),
    ("optimality", {"kappa": 0.5, "n0_schedule": [10000], "gamma": 256}),
])
def test_simulate_experiments(tmp_path, capsys, experiment, extra):
    cfg = _cfg(tmp_path, trials=30, **extra)
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", cfg, "--experiment", experiment, "--out", str(out)]) == 0
    assert out.read_text().startswith("# unicusum 0.1.0")
    assert json.loads(out.with_suffix(".json").read_text())


def test_verify_kraft(capsys):
    assert main(["verify", "kraft"]) == 0
    assert "PASS kraft-exactness" in capsys.readouterr().out


def test_code_stats():
    lines = code_stats_csv(2, 4).splitlines()
    assert lines[2] == "n,kraft_sum,max_redundancy_bits"
    assert lines[3] == "0,1.0,0.0"
    assert len(lines) == 3 + 5


def test_module_entry_point(tmp_path, stream_file):
    r = subprocess.run([sys.executable, "-m", "unicusum", "detect", str(stream_file),
                        "--config", _cfg(tmp_path), "--gamma", "1e300"],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
