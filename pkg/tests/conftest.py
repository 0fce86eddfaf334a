import numpy as np
import pytest

from fedcba.dataset import CategoricalDataset
from fedcba.synthetic import make_hypertension_like, write_csv

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def toy():
    # {A=1,+} x2, {A=1,-}, {A=2,-}
    return CategoricalDataset.from_records(
        [(("1",), "+"), (("1",), "+"), (("1",), "-"), (("2",), "-")], ["A"], class_domain=("+", "-"))


@pytest.fixture(scope="session")
def synthetic_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "hypertension_synthetic.csv"
    write_csv(make_hypertension_like(random_state=0), path)
    return path


@pytest.fixture(scope="session")
def small_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "small.csv"
    write_csv(make_hypertension_like(n_samples=3000, random_state=1), path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
