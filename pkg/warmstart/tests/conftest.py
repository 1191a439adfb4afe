"""Shared fixtures: datasets produced through the simulator's CLI.

The simulator is exercised only through its command-line/file interfaces so
this package stays decoupled from its internals.
"""

import json
import subprocess

import pytest


def _run_chiptrain(verb: str, config: dict, tmp_path) -> dict:
    cfg_path = tmp_path / f"{verb}-cfg.json"
    cfg_path.write_text(json.dumps(config))
    proc = subprocess.run(
        ["chiptrain", verb, "--config", str(cfg_path)],
        capture_output=True, text=True, check=False,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"chiptrain {verb} failed: {proc.stderr}")
    return json.loads(proc.stdout)


@pytest.fixture(scope="session")
def chiptrain_cli():
    """Callable running a simulator CLI verb: (verb, config, workdir) -> summary."""
    return _run_chiptrain


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """300 records of 6-mode unitaries: big enough to learn something, fast."""
    root = tmp_path_factory.mktemp("ds")
    path = root / "small.jsonl"
    _run_chiptrain(
        "gen-dataset",
        {"geometry": {"layout": "planar", "m": 6}, "count": 300, "seed": 500,
         "out_path": str(path)},
        root,
    )
    return str(path)
