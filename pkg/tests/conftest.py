import numpy as np
import pytest

from causalpool import Dataset, DgpSpec, Executor, generate_synthetic


@pytest.fixture(scope="session")
def paper_small():
    """Confounded dataset from the default process, small enough for fast tests."""
    data, truth = generate_synthetic(DgpSpec(n=4000, d=3, seed=11))
    return data, truth


@pytest.fixture()
def seq_executor():
    with Executor(workers=1) as ex:
        yield ex


@pytest.fixture(scope="session")
def discrete_confounded():
    """Confounded dataset whose single covariate takes three values."""
    rng = np.random.default_rng(77)
    n = 30_000
    x = rng.choice([-1.0, 0.0, 1.0], size=n, p=[0.3, 0.4, 0.3])
    propensity = 1.0 / (1.0 + np.exp(-x))
    t = (rng.random(n) < propensity).astype(float)
    tau = 1.0 + 0.5 * x
    y = tau * t + x + rng.normal(size=n)
    data = Dataset(x=x[:, None], t=t, y=y, discrete_treatment=True)
    true_ate = float(tau.mean())
    return data, true_ate
