import numpy as np
import pytest

from robustph.data import CensoredDataset
from robustph.mdpde import ModelSpec, Theta
from robustph.simulation import SimConfig, simulate_dataset


def simulate(family="exponential", gamma=(1.0,), beta=(1.0, 1.0, 1.0), n=100, censoring=0.0, seed=0,
             covariate_mean=0.0, epsilon=0.0):
    spec = ModelSpec(family, len(beta))
    cfg = SimConfig(n, spec, Theta(gamma, beta), seed=seed, censoring_target=censoring,
                    covariate_mean=covariate_mean, epsilon=epsilon)
    return spec, simulate_dataset(cfg, np.random.default_rng(seed))


@pytest.fixture
def toy_uncensored():
    return CensoredDataset([1.0, 2.0, 3.0], [1, 1, 1], np.zeros((3, 0)))


@pytest.fixture
def toy_censored():
    return CensoredDataset([1.0, 2.0, 3.0], [1, 1, 0], np.zeros((3, 0)))


def loglik_parts(spec, data, v):
    """Per-observation log-likelihood and its gradient, coded from scratch."""
    v = np.asarray(v, dtype=float)
    x, d, z = data.time, data.status, data.covariates
    eta = z @ v[spec.q:]
    c = np.exp(eta)
    if spec.q == 1:
        g = v[0]
        cum = g * x * c
        ll = d * (np.log(g) + eta) - cum
        dg = (d / g - x * c)[:, None]
    else:
        g1, g2 = v[0], v[1]
        lg = np.log(g1 * x)
        cum = (g1 * x) ** g2 * c
        ll = d * (np.log(g2) + g2 * np.log(g1) + (g2 - 1) * np.log(x) + eta) - cum
        dg = np.column_stack([g2 / g1 * (d - cum), d * (1 / g2 + lg) - lg * cum])
    return ll, np.column_stack([dg, z * (d - cum)[:, None]])


def mle_newton(spec, data, start, tol=1e-12):
    """Maximize the log-likelihood by Newton steps on its analytic gradient."""
    grad = lambda v: loglik_parts(spec, data, v)[1].sum(axis=0)
    v = np.asarray(start, dtype=float)
    for _ in range(100):
        h = np.empty((v.size, v.size))
        for j in range(v.size):
            e = np.zeros(v.size)
            e[j] = 1e-6 * max(1, abs(v[j]))
            h[:, j] = (grad(v + e) - grad(v - e)) / (2 * e[j])
        step = np.linalg.solve(h, grad(v))
        v = v - step
        if np.max(np.abs(step)) < tol:
            break
    return v


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
