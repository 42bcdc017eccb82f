"""
Asymptotic power and sample size
================================

Contiguous power of the test of beta = 1 in the one-covariate model, with
the sandwich covariance estimated from a large simulated design, and the
sample size needed to detect a fixed alternative.
"""

import numpy as np

from robustph import ModelSpec, Theta, coefficient_equals
from robustph.inference import approx_power, contiguous_power, required_sample_size
from robustph.mdpde import sandwich_covariance
from robustph.simulation import SimConfig, simulate_dataset

spec = ModelSpec("exponential", 1)
config = SimConfig(20000, spec, Theta([1.0], [1.0]), seed=5, covariate_mean=1.0, censoring_target=0.1)
design = simulate_dataset(config, np.random.default_rng(5))
h = coefficient_equals(spec, 1, 1.0)
theta0 = np.array([1.0, 1.0])

alphas = (0.0, 0.1, 0.3, 0.5)
sigmas = {a: sandwich_covariance(spec, design, theta0, a)[2] for a in alphas}

###############################################################################
# Drift d on beta for a study of 50 subjects.
print("d    " + "".join(f"{f'a={a:g}':>9}" for a in alphas))
for d in (0.5, 0.9, 1.3):
    row = [contiguous_power(theta0, h, sigmas[a] / 50, d=[0.0, d]) for a in alphas]
    print(f"{d:<5}" + "".join(f"{p:>9.4f}" for p in row))

###############################################################################
# Fixed alternative beta = 1.3: how many subjects give 80% power?
alt = np.array([1.0, 1.3])
for a in alphas:
    n = required_sample_size(alt, h, sigmas[a], target_power=0.8)
    print(f"alpha={a:g}: n = {n}, approximate power there {approx_power(alt, h, sigmas[a], n):.3f}")
