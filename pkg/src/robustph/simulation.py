"""Synthetic censored samples and Monte Carlo level/power experiments."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .data import CensoredDataset
from .exceptions import DomainError, RobustPHError
from .inference import wald_test
from .mdpde import ModelSpec, Theta, _as_theta, fit_mdpde

log = logging.getLogger(__name__)

TABLE_ALPHAS = (0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass(frozen=True)
class ContaminationScheme:
    """Lifetime distribution of the outlying observations.

    ``kind="exponential_mean"`` takes ``(mean,)``; ``kind="weibull_params"``
    takes ``(gamma1, gamma2)`` with survival ``exp(-(gamma1 t)^gamma2)``.
    """

    kind: str = "exponential_mean"
    params: tuple = (31.0,)

    def __post_init__(self):
        params = tuple(float(v) for v in self.params)
        if self.kind == "exponential_mean":
            ok = len(params) == 1
        elif self.kind == "weibull_params":
            ok = len(params) == 2
        else:
            raise DomainError(f"unknown contamination kind {self.kind!r}")
        if not ok or not all(np.isfinite(params)) or min(params) <= 0:
            raise DomainError(f"invalid parameters {self.params} for {self.kind}")
        object.__setattr__(self, "params", params)

    def draw(self, rng, size):
        if self.kind == "exponential_mean":
            return rng.exponential(self.params[0], size)
        g1, g2 = self.params
        return rng.weibull(g2, size) / g1


@dataclass(frozen=True)
class SimConfig:
    n: int
    spec: ModelSpec
    theta_true: Theta
    seed: int
    covariate_mean: float = 0.0
    covariate_sd: float = 1.0
    censoring_target: float = 0.0
    epsilon: float = 0.0
    contamination: ContaminationScheme = field(default_factory=ContaminationScheme)
    replications: int = 100
    tau: float = 0.05
    # contaminated units are forced to be events unless this is False
    contaminated_uncensored: bool = True

    def __post_init__(self):
        if self.n < 1 or self.replications < 1:
            raise DomainError("n and replications must be >= 1")
        if not 0 <= self.censoring_target < 1 or not 0 <= self.epsilon < 1:
            raise DomainError("censoring target and epsilon must lie in [0, 1)")
        if self.epsilon + self.censoring_target >= 1:
            raise DomainError("epsilon + censoring target must be < 1")
        if self.seed is None:
            raise DomainError("a seed is required")
        object.__setattr__(self, "theta_true", _as_theta(self.spec, self.theta_true))


def generate_survival(spec, theta, z, u):
    """Inverse-transform draw ``T`` with ``S(T | z) = u``."""
    theta = _as_theta(spec, theta)
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise DomainError("u must lie in (0, 1)")
    z = np.asarray(z, dtype=float)
    eta = z @ theta.beta if spec.p else np.zeros(u.shape)
    return spec.baseline.inverse_cumulative(-np.log(u) / np.exp(eta), theta.gamma)


def censoring_bound(times, target):
    """``c_max`` with ``mean P(U(0, c_max) < T_i) = target``.

    For ``C ~ U(0, c)``, ``P(C < T) = min(T, c) / c``; the average is
    decreasing in ``c`` so a bracketing root search applies.
    """
    times = np.asarray(times, dtype=float)

    def excess(c):
        return np.mean(np.minimum(times, c) / c) - target

    positive = times[times > 0]
    if positive.size == 0:
        raise RobustPHError("censoring calibration failed: all times are zero")
    # beyond max(T) the proportion is mean(T)/c, so this bracket always holds
    lo = np.min(positive) * 1e-6
    hi = max(np.max(times), 2.0 * np.mean(times) / target)
    return optimize.brentq(excess, lo, hi, xtol=1e-12 * hi, rtol=1e-12)


def apply_censoring(times, target, rng):
    times = np.asarray(times, dtype=float)
    if not 0 <= target < 1:
        raise DomainError("censoring target must lie in [0, 1)")
    if target == 0:
        return times.copy(), np.ones(times.size, dtype=int)
    c_max = censoring_bound(times, target)
    cens = rng.uniform(0.0, c_max, times.size)
    return np.minimum(times, cens), (times <= cens).astype(int)


def contaminate(data, epsilon, scheme, rng, uncensored=True):
    """Replace ``floor(epsilon n)`` observed times with draws from ``scheme``."""
    if not 0 <= epsilon < 1:
        raise DomainError("epsilon must lie in [0, 1)")
    count = int(np.floor(epsilon * data.n + 1e-9))
    if count == 0:
        return data
    idx = rng.choice(data.n, size=count, replace=False)
    time = data.time.copy()
    status = data.status.copy()
    time[idx] = scheme.draw(rng, count)
    if uncensored:
        status[idx] = 1
    return CensoredDataset(time, status, data.covariates, data.names)


def simulate_dataset(config, rng, theta=None):
    theta = config.theta_true if theta is None else _as_theta(config.spec, theta)
    n, p = config.n, config.spec.p
    z = config.covariate_mean + config.covariate_sd * rng.standard_normal((n, p))
    u = rng.uniform(size=n)
    u = np.where(u == 0, np.nextafter(0.0, 1.0), u)
    t = generate_survival(config.spec, theta, z, u)
    x, delta = apply_censoring(t, config.censoring_target, rng)
    data = CensoredDataset(x, delta, z)
    return contaminate(data, config.epsilon, config.contamination, rng, config.contaminated_uncensored)


@dataclass(frozen=True)
class ExperimentCell:
    alpha: float
    rejections: int
    valid: int
    failures: int

    @property
    def rate(self):
        return self.rejections / self.valid if self.valid else float("nan")

    @property
    def standard_error(self):
        r = self.rate
        return float(np.sqrt(r * (1 - r) / self.valid)) if self.valid else float("nan")


def _replicate(args):
    config, h, alphas, theta_gen, null_shift, rep = args
    rng = np.random.default_rng([config.seed, rep])
    data = simulate_dataset(config, rng, theta_gen)
    out = []
    start = None
    for a in alphas:
        try:
            fit = fit_mdpde(config.spec, data, a, start=start)
            if not fit.converged:
                out.append(None)
                continue
            start = fit.theta_hat
            hyp = h if null_shift is None else _ShiftedHypothesis(h, null_shift)
            out.append(bool(wald_test(fit, hyp, config.tau).reject))
        except RobustPHError as exc:
            log.debug("replication %d alpha %g failed: %s", rep, a, exc)
            out.append(None)
    return out


class _ShiftedHypothesis:
    """``m(theta - shift)``: the null moved to a drifted parameter point."""

    def __init__(self, h, shift):
        self.h, self.shift, self.r, self.label = h, np.asarray(shift, dtype=float), h.r, h.label

    def m(self, theta):
        return self.h.m(np.asarray(theta) - self.shift)

    def M(self, theta):
        return self.h.M(np.asarray(theta) - self.shift)

    def jacobian(self, theta):
        return self.h.jacobian(np.asarray(theta) - self.shift)


def level_power_experiment(config, h, alphas=TABLE_ALPHAS, drift=None, workers=None, convention="switched"):
    """Rejection proportions of the Wald-type test over replications.

    Without ``drift`` data come from ``theta_true`` and the table holds
    empirical levels. With ``drift = d`` the table holds powers at the
    contiguous point ``theta_true + d / sqrt(n)``:

    * ``"switched"``: data come from ``theta_true`` and the null is moved,
      so ``m(theta - d/sqrt(n)) = 0`` is tested;
    * ``"direct"``: data come from ``theta_true + d/sqrt(n)`` and ``h`` is
      tested as given.

    Replication ``k`` draws from ``default_rng([seed, k])`` so the table
    does not depend on ``workers``. Failed fits are excluded from the
    denominator and counted.
    """
    alphas = tuple(float(a) for a in alphas)
    if convention not in ("switched", "direct"):
        raise DomainError(f"unknown convention {convention!r}")
    shift = None if drift is None else np.asarray(drift, dtype=float) / np.sqrt(config.n)
    theta_gen = None
    if shift is not None and convention == "direct":
        theta_gen = Theta.from_vector(config.spec, config.theta_true.vector + shift)
        shift = None
    jobs = [(config, h, alphas, theta_gen, shift, rep) for rep in range(config.replications)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_replicate(j) for j in jobs]
    cells = []
    for k, a in enumerate(alphas):
        col = [r[k] for r in results]
        valid = [v for v in col if v is not None]
        cells.append(ExperimentCell(a, int(sum(valid)), len(valid), len(col) - len(valid)))
    return cells


def write_table(path, rows, alphas=TABLE_ALPHAS):
    """Rows ``(censoring, epsilon, cells)`` as a CSV with one column per alpha."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["censoring", "epsilon", *(f"alpha_{a:g}" for a in alphas), "failures"])
        for censoring, epsilon, cells in rows:
            w.writerow(
                [f"{censoring:g}", f"{epsilon:g}", *(f"{c.rate:.4f}" for c in cells), sum(c.failures for c in cells)]
            )


def with_changes(config, **kw):
    return replace(config, **kw)
