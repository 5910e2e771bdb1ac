"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Every check prints a ``PASS|FAIL name: measured=... target=... (Xs)`` line.
Run alone with ``pytest tests/test_acceptance.py`` or ``unicusum verify all``.
The Monte Carlo criteria take several minutes in total.
"""
import json

import pytest

from unicusum.cli import main
from unicusum.verify import run_suite


@pytest.fixture
def report(capsys):
    def _run(suite):
        checks = run_suite(suite)
        with capsys.disabled():
            print()
            for c in checks:
                print("  " + c.line())
        return checks
    return _run


def _assert_all(checks):
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)


def test_01_kraft_exactness(report):
    _assert_all(report("kraft"))


def test_02_universality(report):
    _assert_all(report("redundancy"))


def test_03_oracle_equivalence(report):
    _assert_all(report("oracle"))


def test_04_error_probability_bounds(report):
    _assert_all(report("error-bound"))


def test_05_arl_lower_bounds(report):
    _assert_all(report("arl"))


def test_06_delay_slopes(report):
    _assert_all(report("slope"))


def test_07_termination_under_change(report):
    _assert_all(report("termination"))


def test_08_estimate_penalty_bound(report):
    _assert_all(report("estimate-penalty"))


def test_09_optimality_trend(report):
    _assert_all(report("optimality"))


def test_10_reproducibility(report, tmp_path, capsys):
    checks = report("reproducibility")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mu0": [0.5, 0.5], "mu1": [0.9, 0.1], "lambda": 0.2,
                               "gamma": 64, "n0": 2000, "trials": 100, "horizon": 3000,
                               "seed": 21}))
    outs = []
    for name in ("a.csv", "b.csv"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name).read_bytes())
    same = outs[0] == outs[1]
    with capsys.disabled():
        print(f"  {'PASS' if same else 'FAIL'} reproducibility-cli: "
              f"measured={len(outs[0])} bytes target=byte-identical simulate CSV")
    assert same
    _assert_all(checks)
