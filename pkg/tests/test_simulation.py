import numpy as np
import pytest
from numpy.testing import assert_allclose

from robustph.data import CensoredDataset
from robustph.exceptions import DomainError
from robustph.inference import coefficient_equals
from robustph.mdpde import ModelSpec, Theta
from robustph.simulation import (
    TABLE_ALPHAS,
    ContaminationScheme,
    SimConfig,
    apply_censoring,
    censoring_bound,
    contaminate,
    generate_survival,
    level_power_experiment,
    simulate_dataset,
    with_changes,
    write_table,
)

EXP3 = ModelSpec("exponential", 3)


def test_generate_survival_examples():
    spec = ModelSpec("exponential", 0)
    assert_allclose(generate_survival(spec, Theta([1.0], []), np.zeros((1, 0)), [np.exp(-1)]), [1.0])
    wei = ModelSpec("weibull", 1)
    assert_allclose(generate_survival(wei, Theta([1.0, 2.0], [0.0]), [[3.0]], [np.exp(-4)]), [2.0])
    with pytest.raises(DomainError):
        generate_survival(spec, Theta([1.0], []), np.zeros((1, 0)), [1.0])


def test_survival_draws_follow_model():
    rng = np.random.default_rng(0)
    spec = ModelSpec("exponential", 1)
    t = generate_survival(spec, Theta([2.0], [np.log(1.5)]), np.ones((50000, 1)), rng.uniform(size=50000))
    assert abs(t.mean() - 1 / 3) < 0.01


def test_censoring_proportion():
    rng = np.random.default_rng(1)
    t = rng.exponential(size=20000)
    for target in (0.05, 0.1, 0.3):
        c = censoring_bound(t, target)
        assert_allclose(np.mean(np.minimum(t, c) / c), target, atol=1e-9)
        _, status = apply_censoring(t, target, rng)
        assert abs(1 - status.mean() - target) < 0.015
    x, status = apply_censoring(t, 0.0, rng)
    assert status.all() and np.array_equal(x, t)


def test_contamination_count():
    data = CensoredDataset(np.ones(50), np.zeros(50, int), np.zeros((50, 0)))
    out = contaminate(data, 0.1, ContaminationScheme(), np.random.default_rng(2))
    changed = out.time != 1.0
    assert changed.sum() == 5 and out.status[changed].all()
    kept = contaminate(data, 0.1, ContaminationScheme(), np.random.default_rng(2), uncensored=False)
    assert kept.status.sum() == 0
    assert contaminate(data, 0.0, ContaminationScheme(), np.random.default_rng(2)) is data


def test_contamination_schemes():
    rng = np.random.default_rng(3)
    assert abs(ContaminationScheme("exponential_mean", (31,)).draw(rng, 40000).mean() - 31) < 0.6
    w = ContaminationScheme("weibull_params", (1.0, 0.8)).draw(rng, 40000)
    assert abs(np.mean(w > 1.0) - np.exp(-1)) < 0.01
    with pytest.raises(DomainError):
        ContaminationScheme("weibull_params", (1.0,))
    with pytest.raises(DomainError):
        ContaminationScheme("cauchy", (1.0,))


def config(**kw):
    base = dict(n=60, spec=EXP3, theta_true=Theta([1.0], [1, 1, 1]), seed=5, censoring_target=0.05, replications=6)
    base.update(kw)
    return SimConfig(**base)


def test_config_validation():
    with pytest.raises(DomainError):
        config(epsilon=0.6, censoring_target=0.5)
    with pytest.raises(DomainError):
        config(seed=None)
    with pytest.raises(DomainError):
        config(n=0)


def test_simulated_dataset_shape_and_determinism():
    a = simulate_dataset(config(), np.random.default_rng(7))
    b = simulate_dataset(config(), np.random.default_rng(7))
    assert a == b and a.n == 60 and a.p == 3


def test_experiment_determinism_and_workers(tmp_path):
    h = coefficient_equals(EXP3, 2, 1.0)
    cfg = config()
    a = level_power_experiment(cfg, h, (0.0, 0.3))
    b = level_power_experiment(cfg, h, (0.0, 0.3))
    c = level_power_experiment(cfg, h, (0.0, 0.3), workers=2)
    assert a == b == c
    assert all(cell.valid + cell.failures == 6 for cell in a)
    write_table(tmp_path / "a.csv", [(0.05, 0.0, a)], (0.0, 0.3))
    write_table(tmp_path / "b.csv", [(0.05, 0.0, b)], (0.0, 0.3))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "censoring,epsilon,alpha_0,alpha_0.3,failures"


def test_drift_increases_rejections():
    h = coefficient_equals(EXP3, 2, 1.0)
    cfg = with_changes(config(), replications=20)
    level = level_power_experiment(cfg, h, (0.0,))[0]
    power = level_power_experiment(cfg, h, (0.0,), drift=[0, 0, 8, 0])[0]
    assert power.rate > level.rate


def test_table_alphas():
    assert TABLE_ALPHAS == (0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
