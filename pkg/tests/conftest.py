"""Shared fixtures: src/ on sys.path, PNG factories, CLI subprocess runner."""

from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))


@pytest.fixture
def write_png(tmp_path):
    """Factory writing a WxH PNG into tmp_path; solid ``value`` or seeded noise."""

    def _write(name: str, width: int, height: int, value: int | None = None, seed: int = 0) -> Path:
        if value is not None:
            arr = np.full((height, width, 3), value, dtype=np.uint8)
        else:
            arr = np.random.default_rng(seed).integers(0, 256, (height, width, 3), dtype=np.uint8)
        path = tmp_path / name
        Image.fromarray(arr).save(path)
        return path

    return _write


@pytest.fixture
def run_cli():
    """Run the CLI in a fresh interpreter and capture output."""

    def _run(*args: str) -> subprocess.CompletedProcess:
        env = os.environ.copy()
        env["PYTHONPATH"] = str(SRC) + os.pathsep + env.get("PYTHONPATH", "")
        return subprocess.run(
            [sys.executable, "-m", "gridtok", *args],
            capture_output=True,
            text=True,
            env=env,
        )

    return _run
