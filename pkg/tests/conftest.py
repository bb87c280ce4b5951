import os

import numpy as np
import pytest

from rcebench.data import Dataset, FeatureSchema, synth_gaussian_blobs
from rcebench.model import DenseModel, TrainConfig, init_model, train
from rcebench.task import ClassificationTask

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
IONOSPHERE = os.environ.get("IONOSPHERE_CSV", os.path.join(ROOT, "data", "ionosphere.csv"))


def make_net_a():
    """logit = relu(x1) - relu(x2) - 0.5"""
    return DenseModel((np.eye(2), np.array([[1.0, -1.0]])), (np.zeros(2), np.array([-0.5])))


def make_l1():
    """Linear model, logit = x1 + x2 - 1."""
    return DenseModel((np.array([[1.0, 1.0]]),), (np.array([-1.0]),))


def dataset(rows, labels=None):
    rows = np.asarray(rows, dtype=float)
    labels = np.zeros(len(rows), int) if labels is None else labels
    names = tuple(f"x{i}" for i in range(rows.shape[1]))
    return Dataset(rows, labels, FeatureSchema(names))


@pytest.fixture
def net_a():
    return make_net_a()


@pytest.fixture
def l1():
    return make_l1()


@pytest.fixture
def l1_task():
    # box [0, 1]^2; predictions 0 and 1
    return ClassificationTask(make_l1(), dataset([[0, 0], [1, 1]], np.array([0, 1])))


@pytest.fixture
def net_a_task():
    # box [-1, 1]^2
    return ClassificationTask(make_net_a(), dataset([[-1, -1], [1, 1], [0, 0], [1, -1]]))


@pytest.fixture(scope="session")
def blobs_task():
    ds = synth_gaussian_blobs(100, 2, 6.0, seed=1)
    m = train(init_model([2, 4, 1], 0), ds, TrainConfig(0.1, 100, 32, 0))
    return ClassificationTask(m, ds)


@pytest.fixture(scope="session")
def ionosphere_path():
    if not os.path.exists(IONOSPHERE):
        pytest.fail(f"ionosphere CSV not found at {IONOSPHERE}; see README (scripts/make_ionosphere_csv.py)")
    return IONOSPHERE


# one PASS/FAIL line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
