"""
Influence of a single contaminating point
=========================================

One covariate, exponential baseline, theta0 = (1, 1), testing beta = 1.
Print the second-order influence of the test statistic and the power
influence as the contaminating time grows.
"""

import numpy as np

from robustph import ModelSpec, Theta, coefficient_equals
from robustph.inference import influence_context
from robustph.simulation import SimConfig, simulate_dataset

spec = ModelSpec("exponential", 1)
config = SimConfig(50, spec, Theta([1.0], [1.0]), seed=2, covariate_mean=1.0, censoring_target=0.1)
data = simulate_dataset(config, np.random.default_rng(2))
h = coefficient_equals(spec, 1, 1.0)

xs = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0]
print("x_t     " + "".join(f"{x:>11g}" for x in xs))
for alpha in (0.0, 0.1, 0.3):
    ctx = influence_context(spec, data, [1.0, 1.0], alpha, h, d=[0.0, 0.001])
    reports = [ctx.report((x, 1, (1.0,))) for x in xs]
    print(f"IF2 a={alpha:<3g}" + "".join(f"{r.if2_test:>11.3g}" for r in reports))
    print(f"PIF a={alpha:<3g}" + "".join(f"{r.pif:>11.3g}" for r in reports))

###############################################################################
# At alpha = 0 both curves grow without bound. For alpha > 0 they peak
# near the bulk of the data and settle to a small constant.
