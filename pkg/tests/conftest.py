import numpy as np
import pytest

from wlda.dataset import MaskedDataset, load_iris
from wlda.discriminant import build_weight_profile, from_params
from wlda.estimation import ModelParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def iris():
    return load_iris()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_dataset(values, labels=None, mask=None, names=None):
    values = np.asarray(values, dtype=float)
    if mask is None:
        mask = ~np.isnan(values)
    return MaskedDataset(np.nan_to_num(values), mask, labels, names or ())


def random_spd(rng, p, jitter=0.2):
    A = rng.normal(size=(p, p))
    return A @ A.T / p + jitter * np.eye(p)


def make_model(means, cov, priors, rates):
    means = np.asarray(means, dtype=float)
    params = ModelParams(means, np.asarray(cov, dtype=float), np.asarray(priors, dtype=float), np.ones(len(means), int))
    return from_params(params, build_weight_profile(rates), floor_ratio=None)


def random_model(rng, p, G=3):
    priors = np.log(rng.dirichlet(np.ones(G)))
    return make_model(rng.normal(size=(G, p)), random_spd(rng, p), priors, rng.uniform(0, 0.8, size=p))


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
