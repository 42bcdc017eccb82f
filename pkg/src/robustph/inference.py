"""Wald-type tests, power approximations and influence diagnostics.

Hypotheses are written ``m(theta) = 0`` with ``m`` mapping the stacked
parameter vector ``theta = (gamma, beta)`` to ``R^r`` and ``M(theta)``
its ``(p + q) x r`` Jacobian.  Every power and influence formula uses the
kernel ``N = M (M' Sigma M)^{-1} M'``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np

from . import numerics
from .exceptions import DegenerateTestError, DomainError, HypothesisParseError
from .mdpde import Theta, _as_theta, sandwich_covariance, score_contributions


# -- hypotheses --------------------------------------------------------------


class Hypothesis:
    """Restriction ``m(theta) = 0`` with ``r`` components."""

    label = ""
    r = 0

    def m(self, theta):
        raise NotImplementedError

    def M(self, theta):
        raise NotImplementedError

    def jacobian(self, theta):
        """``M(theta)`` with its shape and rank checked."""
        theta = np.asarray(theta, dtype=float)
        mat = np.asarray(self.M(theta), dtype=float).reshape(theta.size, self.r)
        if np.linalg.matrix_rank(mat) < self.r:
            raise DegenerateTestError(f"M(theta) for {self.label!r} has rank below r={self.r}")
        return mat


class LinearHypothesis(Hypothesis):
    """``m(theta) = L theta - b`` for an ``r x k`` matrix ``L``."""

    def __init__(self, L, b, label=""):
        L = np.atleast_2d(np.asarray(L, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if b.shape != (L.shape[0],):
            raise DomainError("b must have one entry per row of L")
        if not 1 <= L.shape[0] <= L.shape[1]:
            raise DomainError("need 1 <= r <= p + q restrictions")
        self.L, self.b, self.r, self.label = L, b, L.shape[0], label

    def m(self, theta):
        return self.L @ np.asarray(theta, dtype=float) - self.b

    def M(self, theta):
        return self.L.T

    def __repr__(self):
        return f"LinearHypothesis({self.label!r}, r={self.r})"


class FunctionHypothesis(Hypothesis):
    """General ``m``; ``M`` defaults to central differences with step 1e-6."""

    def __init__(self, m, r, M=None, label=""):
        if r < 1:
            raise DomainError("r must be >= 1")
        self._m, self._M, self.r, self.label = m, M, int(r), label

    def m(self, theta):
        return np.atleast_1d(np.asarray(self._m(np.asarray(theta, dtype=float)), dtype=float))

    def M(self, theta):
        if self._M is not None:
            return self._M(theta)
        return numerics.numerical_jacobian(self.m, theta).T


def _unit_rows(k, cols):
    L = np.zeros((len(cols), k))
    for row, col in enumerate(cols):
        L[row, col] = 1.0
    return L


def _check_index(j, size, what):
    if not 1 <= j <= size:
        raise DomainError(f"{what} index {j} out of range 1..{size}")


def coefficient_equals(spec, j, value):
    """``beta_j = value`` (1-based ``j``)."""
    _check_index(j, spec.p, "beta")
    return LinearHypothesis(_unit_rows(spec.k, [spec.q + j - 1]), [value], f"beta[{j}]={value:g}")


def coefficients_zero(spec, indices=None):
    """``beta_j = 0`` for all ``j`` in ``indices`` (1-based; default all)."""
    indices = list(range(1, spec.p + 1)) if indices is None else sorted(set(indices))
    if not indices:
        raise DomainError("at least one coefficient is required")
    for j in indices:
        _check_index(j, spec.p, "beta")
    label = "beta[" + ",".join(map(str, indices)) + "]=0"
    return LinearHypothesis(_unit_rows(spec.k, [spec.q + j - 1 for j in indices]), np.zeros(len(indices)), label)


def baseline_param_equals(spec, j, value):
    """``gamma_j = value``; ``gamma[2] = 1`` on Weibull is the exponentiality test."""
    _check_index(j, spec.q, "gamma")
    return LinearHypothesis(_unit_rows(spec.k, [j - 1]), [value], f"gamma[{j}]={value:g}")


_CLAUSE = re.compile(r"\s*(beta|gamma)\s*\[\s*([0-9][0-9\s,]*)\]\s*=\s*([-+0-9.eE]+)\s*")


def parse_hypothesis(text, spec):
    """Parse ``"beta[2]=1"``, ``"beta[1,3]=0"``, ``"gamma[2]=1"``.

    Clauses may be joined with ``;``. Indices are 1-based.
    """
    rows, values, pos = [], [], 0
    if not text.strip():
        raise HypothesisParseError("empty hypothesis", 0)
    for clause in text.split(";"):
        match = _CLAUSE.fullmatch(clause)
        if match is None:
            stripped = clause.lstrip()
            offset = pos + len(clause) - len(stripped)
            bad = _first_bad(stripped)
            raise HypothesisParseError(f"cannot parse {clause.strip()!r}", offset + bad)
        kind, idx, val = match.groups()
        try:
            value = float(val)
        except ValueError:
            raise HypothesisParseError(f"bad value {val!r}", pos + match.start(3)) from None
        size, base = (spec.p, spec.q) if kind == "beta" else (spec.q, 0)
        for token in idx.split(","):
            if not token.strip():
                raise HypothesisParseError("empty index", pos + match.start(2))
            j = int(token)
            if not 1 <= j <= size:
                raise HypothesisParseError(f"{kind} index {j} out of range 1..{size}", pos + match.start(2))
            rows.append(base + j - 1)
            values.append(value)
        pos += len(clause) + 1
    if len(set(rows)) != len(rows):
        raise HypothesisParseError("a parameter is restricted twice", 0)
    return LinearHypothesis(_unit_rows(spec.k, rows), values, text.strip())


def _first_bad(s):
    # offset of the first character where the clause grammar breaks
    end = 0
    for prefix in (r"(beta|gamma)\s*", r"\[\s*[0-9][0-9\s,]*", r"\]\s*", r"=\s*"):
        m = re.compile(prefix).match(s, end)
        if m is None:
            return end
        end = m.end()
    return end


# -- Wald tests --------------------------------------------------------------


@dataclass(frozen=True)
class TestResult:
    statistic: float
    r: int
    p_value: float
    critical_value: float
    reject: bool
    tau: float
    alpha: float
    theta_hat: Theta
    label: str = ""

    __test__ = False  # not a pytest class

    def report(self):
        return (
            f"Wald-type test of {self.label} (alpha={self.alpha:g})\n"
            f"W_n={self.statistic:.6g} df={self.r} p-value={self.p_value:.6g}\n"
            f"critical value {self.critical_value:.6g} at tau={self.tau:g}: "
            f"{'reject' if self.reject else 'do not reject'}"
        )

    def to_dict(self):
        return {
            "hypothesis": self.label,
            "statistic": self.statistic,
            "df": self.r,
            "p_value": self.p_value,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "tau": self.tau,
            "alpha": self.alpha,
            "theta": self.theta_hat.vector.tolist(),
        }


def _kernel(h, theta, sigma):
    mat = h.jacobian(theta)
    v = mat.T @ np.asarray(sigma, dtype=float) @ mat
    return mat, 0.5 * (v + v.T)


def wald_statistic_from(theta, sigma, n, h):
    """``n m' (M' Sigma M)^{-1} m`` at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    _, v = _kernel(h, theta, sigma)
    m = h.m(theta)
    return max(0.0, n * numerics.quadratic_form_inv(v, m, error=DegenerateTestError))


def wald_statistic(fit, h):
    return wald_statistic_from(fit.theta_vector, fit.sigma, fit.n, h)


def _decide(stat, r, tau):
    if not 0 < tau < 1:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    crit = numerics.chisq_quantile(1.0 - tau, r)
    return float(numerics.chisq_sf(stat, r)), crit, bool(stat > crit)


def wald_test(fit, h, tau=0.05):
    stat = wald_statistic(fit, h)
    p_value, crit, reject = _decide(stat, h.r, tau)
    return TestResult(stat, h.r, p_value, crit, reject, tau, fit.alpha, fit.theta_hat, h.label)


def test_from_statistic(stat, r, tau=0.05):
    """``(p_value, critical_value, reject)`` for a given statistic."""
    return _decide(stat, r, tau)


test_from_statistic.__test__ = False


# -- power and sample size ---------------------------------------------------


def _ell(h, theta, theta_ref, sigma):
    # per-observation quadratic form m(theta)' (M' Sigma M)^{-1}|_{theta_ref} m(theta)
    _, v = _kernel(h, theta_ref, sigma)
    return numerics.quadratic_form_inv(v, h.m(theta), error=DegenerateTestError)


def _power_parts(theta_star, h, sigma):
    theta_star = np.asarray(theta_star, dtype=float)
    ell = _ell(h, theta_star, theta_star, sigma)
    grad = numerics.numerical_jacobian(lambda t: np.array([_ell(h, t, theta_star, sigma)]), theta_star)[0]
    var = float(grad @ np.asarray(sigma, dtype=float) @ grad)
    return ell, np.sqrt(max(var, 0.0))


def approx_power(theta_star, h, sigma_at_star, n, tau=0.05):
    """Normal approximation to the power at a fixed alternative ``theta_star``.

    ``1 - Phi(sqrt(n)/sigma_W (chi2_{r,tau}/n - ell))`` where ``ell`` is the
    per-observation quadratic form and ``sigma_W^2 = g' Sigma g`` with ``g``
    its gradient, taken by central differences.
    """
    ell, sd = _power_parts(theta_star, h, sigma_at_star)
    if not ell > 0:
        raise DomainError("theta_star satisfies the null hypothesis")
    if sd == 0:
        raise DegenerateTestError("sigma_W is zero; power is a step function")
    crit = numerics.chisq_quantile(1.0 - tau, h.r)
    z = np.sqrt(n) / sd * (crit / n - ell)
    return float(np.clip(1.0 - numerics.normal_cdf(z), 0.0, 1.0))


def required_sample_size(theta_star, h, sigma_at_star, tau=0.05, target_power=0.8):
    """Smallest ``[n*] + 1`` for which :func:`approx_power` reaches ``target_power``.

    Solving ``sqrt(n)(c/n - ell)/sigma_W = Phi^{-1}(1 - pi)`` gives
    ``n* = (A + B - sigma_W k sqrt(A + 2B)) / (2 ell^2)`` with
    ``k = Phi^{-1}(1 - pi)``, ``A = sigma_W^2 k^2`` and ``B = 2 c ell``.
    """
    if not 0 < target_power < 1:
        raise DomainError("target power must lie in (0, 1)")
    ell, sd = _power_parts(theta_star, h, sigma_at_star)
    if not ell > 0:
        raise DomainError("theta_star satisfies the null hypothesis; no sample size reaches the target")
    crit = numerics.chisq_quantile(1.0 - tau, h.r)
    k = numerics.normal_quantile(1.0 - target_power)
    a = (sd * k) ** 2
    b = 2.0 * crit * ell
    n_star = (a + b - sd * k * np.sqrt(a + 2.0 * b)) / (2.0 * ell**2)
    return max(1, int(np.floor(n_star)) + 1)


def _n_kernel(h, theta0, sigma0):
    mat, v = _kernel(h, theta0, sigma0)
    return mat @ numerics.solve_spd(v, mat.T, error=DegenerateTestError), mat, v


def contiguous_power(theta0, h, sigma0, d=None, delta=None, tau=0.05):
    """Asymptotic power under ``theta_n = theta0 + d / sqrt(n)``.

    Give either the parameter drift ``d`` or the restriction drift
    ``delta = M' d``.
    """
    theta0 = np.asarray(theta0, dtype=float)
    if (d is None) == (delta is None):
        raise DomainError("give exactly one of d and delta")
    mat, v = _kernel(h, theta0, sigma0)
    if delta is None:
        delta = mat.T @ np.asarray(d, dtype=float)
    ncp = numerics.quadratic_form_inv(v, np.asarray(delta, dtype=float), error=DegenerateTestError)
    return numerics.noncentral_chisq_sf(numerics.chisq_quantile(1.0 - tau, h.r), h.r, max(ncp, 0.0))


def power_series_cv(t, A, r, tau=0.05, tail=numerics.SERIES_TAIL_MASS):
    """``sum_v C_v(t, A) P(chi2_{r+2v} > chi2_{r,tau})`` with Poisson weights ``C_v``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    mean = 0.5 * float(t @ np.asarray(A, dtype=float) @ t)
    vmax = numerics.poisson_truncation(mean, tail)
    weights = numerics.poisson_weights(mean, vmax)
    crit = numerics.chisq_quantile(1.0 - tau, r)
    tails = np.array([numerics.chisq_sf(crit, r + 2 * v) for v in range(vmax + 1)])
    return float(weights @ tails)


def c_star(s, r, tau=0.05, tail=numerics.SERIES_TAIL_MASS):
    """``C_r^*(s) = 2 d/ds P(chi2_r(s) > chi2_{r,tau})``.

    Differentiating the Poisson mixture term by term rearranges the
    series into ``sum_v w_v (T_{v+1} - T_v)`` with ``w_v`` the
    Poisson(``s/2``) weights and ``T_v = P(chi2_{r+2v} > chi2_{r,tau})``.
    At ``s = 0`` this is ``T_1 - T_0``.
    """
    if s < 0:
        raise DomainError("noncentrality must be >= 0")
    crit = numerics.chisq_quantile(1.0 - tau, r)
    vmax = numerics.poisson_truncation(0.5 * s, tail)
    weights = numerics.poisson_weights(0.5 * s, vmax)
    tails = np.array([numerics.chisq_sf(crit, r + 2 * v) for v in range(vmax + 2)])
    return float(weights @ np.diff(tails))


def contaminated_power_series(theta0, h, sigma0, d, epsilon, if_vec, tau=0.05, method="series"):
    """Asymptotic power when a fraction ``epsilon / sqrt(n)`` sits at one point.

    The drift becomes ``d + epsilon IF`` and the power is the noncentral
    chi-square tail at noncentrality ``d_eps' N d_eps``; ``method`` picks
    the ``C_v`` series or the direct mixture evaluation.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be >= 0")
    theta0 = np.asarray(theta0, dtype=float)
    d_eps = np.asarray(d, dtype=float) + epsilon * np.asarray(if_vec, dtype=float)
    mat, v = _kernel(h, theta0, sigma0)
    if method == "series":
        return power_series_cv(mat.T @ d_eps, numerics.inverse(v, error=DegenerateTestError), h.r, tau)
    if method == "direct":
        return contiguous_power(theta0, h, sigma0, d=d_eps, tau=tau)
    raise DomainError(f"unknown method {method!r}")


# -- influence functions -----------------------------------------------------


def mdpde_influence(spec, theta0, alpha, J, y_t):
    """``J^{-1} u(y_t)`` for a contamination point ``y_t = (x_t, delta_t, z_t)``."""
    x_t, delta_t, z_t = y_t
    u1, u2 = score_contributions(spec, theta0, alpha, x_t, delta_t, z_t)
    return numerics.solve_spd(J, np.concatenate([u1, u2]))


def test_if2(h, theta0, sigma0, if_vec):
    """Second-order influence ``2 IF' N IF`` of the Wald-type statistic."""
    n_mat, _, _ = _n_kernel(h, np.asarray(theta0, dtype=float), sigma0)
    if_vec = np.asarray(if_vec, dtype=float)
    return max(0.0, 2.0 * float(if_vec @ n_mat @ if_vec))


test_if2.__test__ = False


def power_influence(h, theta0, sigma0, d, if_vec, tau=0.05):
    """``C_r^*(d' N d) d' N IF``; the level influence is identically zero."""
    n_mat, _, _ = _n_kernel(h, np.asarray(theta0, dtype=float), sigma0)
    d = np.asarray(d, dtype=float)
    return c_star(max(float(d @ n_mat @ d), 0.0), h.r, tau) * float(d @ n_mat @ np.asarray(if_vec, dtype=float))


@dataclass(frozen=True)
class InfluenceReport:
    contamination_point: tuple
    if_estimator: np.ndarray
    if2_test: float
    pif: float
    lif: float = 0.0


@dataclass(frozen=True, eq=False)
class InfluenceContext:
    """Null model pieces shared by every contamination point."""

    spec: object
    theta0: np.ndarray
    alpha: float
    J: np.ndarray
    sigma: np.ndarray
    h: Hypothesis
    d: np.ndarray
    tau: float = 0.05

    def report(self, y_t):
        if_vec = mdpde_influence(self.spec, self.theta0, self.alpha, self.J, y_t)
        return InfluenceReport(
            tuple(y_t),
            if_vec,
            test_if2(self.h, self.theta0, self.sigma, if_vec),
            power_influence(self.h, self.theta0, self.sigma, self.d, if_vec, self.tau),
        )


def influence_context(spec, data, theta0, alpha, h, d=None, tau=0.05):
    """Plug-in ``J`` and ``Sigma`` at ``theta0`` from the empirical sandwich on ``data``."""
    theta0 = _as_theta(spec, theta0).vector
    if np.max(np.abs(h.m(theta0))) > 1e-10:
        raise DomainError("theta0 must satisfy the null hypothesis")
    J, _, sigma = sandwich_covariance(spec, data, theta0, alpha)
    d = np.zeros(spec.k) if d is None else np.asarray(d, dtype=float)
    return InfluenceContext(spec, theta0, float(alpha), J, sigma, h, d, tau)


INFLUENCE_HEADER_PREFIX = ("x_t", "delta_t")


def influence_sweep(context, grid, deltas=(0, 1), z_t=()):
    """Rows ``(x_t, delta_t, IF..., IF2, PIF, LIF)`` over a contamination grid."""
    rows = []
    for delta_t in deltas:
        for x_t in grid:
            rep = context.report((float(x_t), int(delta_t), z_t))
            rows.append((float(x_t), int(delta_t), *rep.if_estimator.tolist(), rep.if2_test, rep.pif, rep.lif))
    return rows


def influence_header(spec, covariate_names=None):
    names = spec.param_names(covariate_names)
    return [*INFLUENCE_HEADER_PREFIX, *(f"if_{name}" for name in names), "if2", "pif", "lif"]


def write_influence_csv(path, spec, rows, covariate_names=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(influence_header(spec, covariate_names))
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
