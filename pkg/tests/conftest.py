# -*- coding: utf-8 -*-
"""
    Shared fixtures for omplab tests.
"""
import os
from pathlib import Path

import mlflow
import numpy as np
import pytest

from omplab.sensing import SensingMatrix, gen_bernoulli

# Recent mlflow releases refuse file-store URIs unless this opt-out is set.
os.environ.setdefault("MLFLOW_ALLOW_FILE_STORE", "true")

DATA_DIR = Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption("--regen-golden", action="store_true", default=False,
                     help="record golden files under tests/data instead of comparing against them")


@pytest.fixture
def identity4():
    return SensingMatrix(np.eye(4))


@pytest.fixture
def orthonormal8():
    """A random 8 x 8 orthogonal matrix; coherence and RIP constants vanish up to rounding."""
    rng = np.random.default_rng(123)
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    return SensingMatrix(q)


@pytest.fixture
def bernoulli_16_32():
    return gen_bernoulli(16, 32, 5)


@pytest.fixture
def mlflow_tracking(tmp_path):
    """Point mlflow at a store under `tmp_path` and clean up active runs afterwards."""
    uri = (tmp_path / "mlruns").as_uri()
    mlflow.set_tracking_uri(uri)
    yield uri
    while mlflow.active_run() is not None:
        mlflow.end_run()
    mlflow.set_tracking_uri(None)
    # `mlflow.set_experiment` leaves a process-global experiment id pointing into this store.
    mlflow.tracking.fluent._active_experiment_id = None
    os.environ.pop("MLFLOW_EXPERIMENT_ID", None)


@pytest.fixture
def golden(request):
    """Compare bytes against a golden file in ``tests/data``.

    A missing golden file, or ``--regen-golden``, records the bytes and skips
    the test.
    """
    regen = request.config.getoption("--regen-golden")

    def check(name, data: bytes):
        path = DATA_DIR / name
        if regen or not path.exists():
            path.write_bytes(data)
            pytest.skip(f"recorded golden file {name}")
        assert data == path.read_bytes(), f"output differs from {path}"

    return check
