import subprocess
import sys

import pytest


def run_cli(*args):
    """Invoke the generator CLI (the dataset producer's external interface)."""
    proc = subprocess.run(
        [sys.executable, "-m", "qusgrid.cli", *map(str, args)],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"qusgrid {' '.join(map(str, args))} failed: {proc.stderr}")
    return proc


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    """Small generated dataset shared by the unit tests (30 train / 6 test)."""
    out = tmp_path_factory.mktemp("qusd") / "small"
    run_cli("generate", "--count", 36, "--seed", 11, "--out", out, "--grid", "128x128")
    return out


@pytest.fixture(scope="session")
def manifest_path(dataset_dir):
    return dataset_dir / "manifest.json"


@pytest.fixture(scope="session")
def sharp_phantoms(tmp_path_factory):
    """20 random-region phantoms with one fixed sharp acquisition.

    Fine speckle and crisp region boundaries make these the memorization
    fixture for the overfit sanity check.
    """
    from qustrainer import read_sample, record_from_sample

    out = tmp_path_factory.mktemp("sharp")
    records = []
    for i in range(20):
        path = out / f"p{i}.qusd"
        run_cli(
            "simulate", "--seed", 900 + i, "--out", path, "--grid", "256x128",
            "--d-lateral", 0.15, "--fc", 5, "--fs", 100,
            "--sigma-a", 0.1, "--sigma-l", 0.13, "--noise-std", 0.01,
        )
        records.append(record_from_sample(read_sample(path)))
    return records
