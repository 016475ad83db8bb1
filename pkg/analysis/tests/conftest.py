"""Generates real artifacts once per session by invoking the solver CLI as a
subprocess — the plotting package consumes only those documented outputs."""

from __future__ import annotations

import subprocess
import sys

import pytest

FAST = ["--grid-nodes", "41", "--tau-max", "6"]


def run_wncs(*argv) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "wncs.cli", *argv],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr


@pytest.fixture(scope="session")
def artifacts_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts")
    run_wncs("solve", "--out", str(out), *FAST)
    run_wncs(
        "simulate", "--out", str(out),
        "--policy", str(out / "thresholds.json"),
        "--baselines", "never_act,greedy_uplink,random_admissible",
        "--n-rollouts", "200", "--horizon", "40", "--seed", "1", *FAST,
    )
    run_wncs(
        "sweep", "--out", str(out), "--axis", "p", "--values", "0.0,0.2,0.5", *FAST
    )
    return out
