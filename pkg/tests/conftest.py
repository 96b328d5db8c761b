"""Shared fixtures: the bundled scenarios are executed once per session and
their artifacts (time series, report, snapshots) shared across tests."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from stlab import cli


def read_timeseries(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def _run_bundled(name, tmp_factory):
    outdir = tmp_factory.mktemp(name)
    code = cli.run_scenario(cli.bundled_scenario_path(name), out_override=outdir)
    assert code == 0, f"bundled scenario {name} failed to run"
    report = {}
    rep_path = Path(outdir) / "report.json"
    if rep_path.exists():
        report = json.loads(rep_path.read_text())
    return {"outdir": Path(outdir), "report": report,
            "series": read_timeseries(Path(outdir) / "timeseries.csv")}


@pytest.fixture(scope="session")
def stab_run(tmp_path_factory):
    return _run_bundled("stab", tmp_path_factory)


@pytest.fixture(scope="session")
def stab_late_run(tmp_path_factory):
    return _run_bundled("stab-late", tmp_path_factory)


@pytest.fixture(scope="session")
def linear_trace_run(tmp_path_factory):
    return _run_bundled("linear-trace", tmp_path_factory)


@pytest.fixture(scope="session")
def nonlinear_bl_run(tmp_path_factory):
    return _run_bundled("nonlinear-bl", tmp_path_factory)
