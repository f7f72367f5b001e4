import numpy as np
import pytest

from emaxcli.core.model import d_optimal_design, eta
from emaxcli.models import DoseDomain, EmaxParams, NoiseModel, Scenario, SufficientStats

# truth used throughout the simulation study
THETA = (2.0, 0.467, 50.0)

# guessed theta2 -> theoretical percentages (exists, case 1, case 2) at that design
TABLE1_THEORY = {
    12.5: (84.82, 0.00, 15.18),
    25.0: (93.74, 0.01, 6.25),
    50.0: (97.53, 0.12, 2.35),
    75.0: (98.01, 0.47, 1.53),
    100.0: (97.77, 0.98, 1.25),
}


@pytest.fixture
def domain():
    return DoseDomain(a=0.001, b=150.0)


@pytest.fixture
def truth():
    return EmaxParams(theta0=THETA[0], theta1=THETA[1], theta2=THETA[2])


@pytest.fixture
def noise():
    return NoiseModel(sigma=0.1)


@pytest.fixture
def design(domain):
    return d_optimal_design(domain, 50.0)


@pytest.fixture
def scenario(truth, design, noise):
    return Scenario(truth=truth, design=design, noise=noise, n_per_point=(6, 6, 6))


@pytest.fixture
def exact_stats(design, truth):
    """Sample means lying exactly on the true curve."""
    y = eta(np.asarray(design.doses), truth)
    return SufficientStats(x=design.doses, n=(6, 6, 6), ybar=tuple(float(v) for v in y))


def means(design, ybar, n=(6, 6, 6)):
    return SufficientStats(x=design.doses, n=n, ybar=ybar)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_csv(tmp_path):
    def _write(rows, name="data.csv", header="dose,response"):
        path = tmp_path / name
        body = "\n".join(",".join(str(v) for v in r) if not isinstance(r, str) else r for r in rows)
        path.write_text(f"{header}\n{body}\n", encoding="utf-8")
        return path
    return _write


def replicated_rows(doses, ybar, spread=(-0.05, 0.0, 0.05)):
    """Three responses per dose whose mean is exactly ybar."""
    return [(d, y + s) for d, y in zip(doses, ybar) for s in spread]
