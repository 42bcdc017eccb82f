"""Minimum density power divergence estimation under proportional hazards.

The observed-data density of ``(x, delta)`` given ``z`` is

    f(x) = (lambda(x, gamma) c)^delta exp(-Lambda(x, gamma) c),  c = exp(beta'z)

and the estimator minimizes the average of

    H_i = int f_i^{1+alpha} dx - (1 + alpha)/alpha f_i(x_i)^alpha + 1/alpha.

Its gradient is ``-(1 + alpha)`` times the average estimating-equation
score ``u_i = s_i f_i(x_i)^alpha - xi_i`` with raw score ``s_i`` and
``xi_i = int s f^{1+alpha} dx``.  ``alpha = 0`` is the maximum likelihood
path with ``H_i = -log f_i(x_i)`` and ``xi_i = 0``.

Parameter vectors are laid out as ``theta = (gamma, beta)``.

Censored rows.  Taken literally, a censored row's model "density" is the
survival function ``S(x)``, whose power integral ``int S^{1+alpha} dx``
does not vanish as ``alpha -> 0`` and whose score integral does not match
the distribution of censored times.  By default (``censoring_mode =
"event"``) every row therefore uses the event density ``lambda c S`` in
``int f^{1+alpha}`` and ``xi``, while the point term keeps
``f(x_i | delta_i)``.  This leaves uncensored data untouched, makes
``alpha -> 0`` recover the likelihood exactly, and keeps the estimator
close to the truth under moderate censoring.  ``censoring_mode =
"literal"`` uses ``S`` for censored rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .exceptions import (
    DataValidationError,
    DegenerateInformationError,
    DomainError,
    NearSingularError,
    ParameterDomainError,
    QuadratureError,
    RobustPHError,
)
from .hazards import BaselineHazard, get_baseline


@dataclass(frozen=True)
class ModelSpec:
    """Baseline family, number of covariates and censored-row convention."""

    baseline: BaselineHazard
    p: int
    censoring_mode: str = "event"

    def __post_init__(self):
        if isinstance(self.baseline, str):
            object.__setattr__(self, "baseline", get_baseline(self.baseline))
        if not isinstance(self.baseline, BaselineHazard):
            raise DomainError("baseline must be a BaselineHazard or a registered name")
        if int(self.p) != self.p or self.p < 0:
            raise DomainError("p must be a nonnegative integer")
        object.__setattr__(self, "p", int(self.p))
        if self.censoring_mode not in ("event", "literal"):
            raise DomainError("censoring_mode must be 'event' or 'literal'")

    @property
    def q(self):
        return self.baseline.q

    @property
    def k(self):
        return self.p + self.q

    def param_names(self, covariate_names=None):
        names = covariate_names or tuple(f"beta{j + 1}" for j in range(self.p))
        return tuple(self.baseline.param_names) + tuple(names)


@dataclass(frozen=True)
class Theta:
    gamma: np.ndarray
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float)).copy()
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).reshape(-1).copy()
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(beta))):
            raise ParameterDomainError("parameters must be finite")
        gamma.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)

    @property
    def vector(self):
        return np.concatenate([self.gamma, self.beta])

    @classmethod
    def from_vector(cls, spec, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (spec.k,):
            raise DomainError(f"expected a parameter vector of length {spec.k}, got {vec.shape}")
        return cls(vec[: spec.q], vec[spec.q :])

    def __eq__(self, other):
        if not isinstance(other, Theta):
            return NotImplemented
        return np.array_equal(self.gamma, other.gamma) and np.array_equal(self.beta, other.beta)

    __hash__ = None


def _as_theta(spec, theta):
    if not isinstance(theta, Theta):
        theta = Theta.from_vector(spec, theta)
    spec.baseline.check(theta.gamma)
    if theta.beta.size != spec.p:
        raise DomainError(f"beta has length {theta.beta.size}, model has p={spec.p}")
    return theta


def _check_alpha(alpha):
    if not (np.isfinite(alpha) and 0 <= alpha <= 1):
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    return float(alpha)


def _linear_predictor(spec, theta, z):
    z = np.asarray(z, dtype=float)
    if spec.p == 0:
        return np.zeros(z.shape[:-1]) if z.ndim > 1 else 0.0
    if z.shape[-1] != spec.p:
        raise DomainError(f"covariate vector must have length {spec.p}")
    return z @ theta.beta


# -- single-observation model quantities -------------------------------------


def conditional_hazard(spec, theta, t, z=()):
    theta = _as_theta(spec, theta)
    return spec.baseline.hazard(t, theta.gamma) * np.exp(_linear_predictor(spec, theta, z))


def conditional_survival(spec, theta, t, z=()):
    theta = _as_theta(spec, theta)
    return np.exp(-spec.baseline.cumulative(t, theta.gamma) * np.exp(_linear_predictor(spec, theta, z)))


def conditional_density(spec, theta, x, delta, z=()):
    """``(lambda(x) c)^delta exp(-Lambda(x) c)``; a proper density in ``x`` when ``delta = 1``."""
    if delta not in (0, 1):
        raise DomainError("delta must be 0 or 1")
    theta = _as_theta(spec, theta)
    c = np.exp(_linear_predictor(spec, theta, z))
    surv = np.exp(-spec.baseline.cumulative(x, theta.gamma) * c)
    if delta == 0:
        return surv
    return spec.baseline.hazard(x, theta.gamma) * c * surv


def _upper_cutoff(spec, theta, c, quad):
    # time at which the conditional survival drops below the cutoff
    return float(spec.baseline.inverse_cumulative(-np.log(quad.upper_cutoff_survival) / c, theta.gamma))


def _quadrature_integrals(spec, theta, alpha, delta, c, quad, index=None):
    """``(I, int s1 f^a, int (delta - Lambda c) f^a)`` by adaptive quadrature."""
    a = 1.0 + alpha
    fam, gamma = spec.baseline, theta.gamma
    upper = _upper_cutoff(spec, theta, c, quad)

    def _density_c(x):
        surv = np.exp(-fam.cumulative(x, gamma) * c)
        return surv * (fam.hazard(x, gamma) * c if delta == 1 else 1.0)

    def power(x):
        return _density_c(x) ** a

    where = "" if index is None else f" (observation {index})"
    try:
        integral, _ = numerics.adaptive_quadrature(power, 0.0, upper, quad)
        xg = np.empty(fam.q)
        for j in range(fam.q):

            def g(x, j=j):
                s1 = fam.log_hazard_gradient(x, gamma)[j] * delta - fam.cumulative_gradient(x, gamma)[j] * c
                return s1 * power(x)

            xg[j], _ = numerics.adaptive_quadrature(g, 0.0, upper, quad)
        lin, _ = numerics.adaptive_quadrature(
            lambda x: (delta - fam.cumulative(x, gamma) * c) * power(x), 0.0, upper, quad
        )
    except QuadratureError as exc:
        raise QuadratureError(f"{exc}{where}", value=exc.value, error=exc.error) from exc
    return integral, xg, lin


def density_power_integral(spec, theta, alpha, delta, z=(), method="auto", quad=numerics.DEFAULT_QUADRATURE):
    """``int_0^inf f(x | delta, z)^{1+alpha} dx``.

    ``method`` is ``"analytic"`` (closed form, when the family has one),
    ``"quadrature"`` or ``"auto"`` (closed form if available).
    """
    alpha = _check_alpha(alpha)
    return _integrals(spec, theta, alpha, delta, z, method, quad)[0]


def xi_integral(spec, theta, alpha, delta, z=(), j=1, method="auto", quad=numerics.DEFAULT_QUADRATURE):
    """``int u^{(j)} f^{1+alpha} dx`` for the baseline (``j = 1``) or covariate (``j = 2``) score."""
    alpha = _check_alpha(alpha)
    if j not in (1, 2):
        raise DomainError("j must be 1 or 2")
    _, xg, lin = _integrals(spec, theta, alpha, delta, z, method, quad)
    if j == 1:
        return xg
    return np.asarray(z, dtype=float).reshape(spec.p) * lin


def _integrals(spec, theta, alpha, delta, z, method, quad):
    if delta not in (0, 1):
        raise DomainError("delta must be 0 or 1")
    theta = _as_theta(spec, theta)
    c = float(np.exp(_linear_predictor(spec, theta, z)))
    if method not in ("auto", "analytic", "quadrature"):
        raise DomainError(f"unknown integration method {method!r}")
    if method != "quadrature":
        closed = spec.baseline.power_integrals(theta.gamma, alpha, np.array([float(delta)]), np.array([c]))
        if closed is not None:
            integral, xg, lin = closed
            return float(integral[0]), xg[0], float(lin[0])
        if method == "analytic":
            raise DomainError(f"{spec.baseline.name} has no closed-form power integrals")
    return _quadrature_integrals(spec, theta, alpha, delta, c, quad)


# -- vectorized sample quantities --------------------------------------------


@dataclass(frozen=True)
class _Pieces:
    loglik: np.ndarray  # (n,)
    raw: np.ndarray  # (n, k) raw scores
    integral: np.ndarray  # (n,)
    xi: np.ndarray  # (n, k)


def _sample_pieces(spec, theta, alpha, data, method="auto", quad=numerics.DEFAULT_QUADRATURE):
    fam = spec.baseline
    gamma = theta.gamma
    x, d, z = data.time, data.status.astype(float), data.covariates
    eta = z @ theta.beta if spec.p else np.zeros(x.size)
    c = np.exp(eta)
    cum = fam.cumulative(x, gamma)
    cumc = cum * c
    ev = d == 1
    log_haz = np.zeros(x.size)
    psi = np.zeros((x.size, fam.q))
    if np.any(ev):
        with np.errstate(divide="ignore"):
            log_haz[ev] = np.log(fam.hazard(x[ev], gamma))
        psi[ev] = fam.log_hazard_gradient(x[ev], gamma)
    loglik = d * (log_haz + eta) - cumc
    lin_raw = d - cumc
    raw = np.concatenate([psi * d[:, None] - fam.cumulative_gradient(x, gamma) * c[:, None], z * lin_raw[:, None]], axis=1)
    n = x.size
    if alpha == 0.0:
        return _Pieces(loglik, raw, np.ones(n), np.zeros((n, spec.k)))
    d_int = np.ones(n) if spec.censoring_mode == "event" else d
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # extreme optimizer trial points may underflow c; H is then inf
        closed = None if method == "quadrature" else fam.power_integrals(gamma, alpha, d_int, c)
    if closed is None:
        if method == "analytic":
            raise DomainError(f"{fam.name} has no closed-form power integrals")
        integral = np.empty(n)
        xg = np.empty((n, fam.q))
        lin = np.empty(n)
        for i in range(n):
            integral[i], xg[i], lin[i] = _quadrature_integrals(spec, theta, alpha, int(d_int[i]), c[i], quad, index=i)
    else:
        integral, xg, lin = closed
    xi = np.concatenate([xg, z * lin[:, None]], axis=1)
    return _Pieces(loglik, raw, integral, xi)


def _objective_terms(pieces, alpha):
    if alpha == 0.0:
        return -pieces.loglik
    # f^alpha = 1 + expm1(alpha log f) keeps small alpha accurate
    return pieces.integral - 1.0 - (1.0 + alpha) * np.expm1(alpha * pieces.loglik) / alpha


def _score_matrix(pieces, alpha):
    if alpha == 0.0:
        return pieces.raw
    return pieces.raw * np.exp(alpha * pieces.loglik)[:, None] - pieces.xi


def dpd_objective(spec, data, theta, alpha, method="auto"):
    """Sample average ``H_{n,alpha}(theta)``; ``alpha = 0`` gives ``-mean log f``."""
    alpha = _check_alpha(alpha)
    theta = _as_theta(spec, theta)
    _check_data(spec, data)
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.mean(_objective_terms(_sample_pieces(spec, theta, alpha, data, method), alpha)))


def score_contributions(spec, theta, alpha, x, delta, z=(), method="auto"):
    """Estimating-equation score ``(u1, u2)`` of one observation.

    For ``delta = 0`` the subtracted integral follows ``spec.censoring_mode``.
    Returns a pair of arrays of lengths ``q`` and ``p``.
    """
    from .data import CensoredDataset

    alpha = _check_alpha(alpha)
    theta = _as_theta(spec, theta)
    one = CensoredDataset([x], [delta], np.asarray(z, dtype=float).reshape(1, spec.p))
    u = _score_matrix(_sample_pieces(spec, theta, alpha, one, method), alpha)[0]
    return u[: spec.q], u[spec.q :]


def score_matrix(spec, data, theta, alpha, method="auto"):
    """Per-observation scores stacked as an ``(n, p + q)`` array."""
    alpha = _check_alpha(alpha)
    theta = _as_theta(spec, theta)
    _check_data(spec, data)
    return _score_matrix(_sample_pieces(spec, theta, alpha, data, method), alpha)


def _check_data(spec, data):
    if data.p != spec.p:
        raise DataValidationError(f"data have {data.p} covariates, model expects {spec.p}")


# -- fitting -----------------------------------------------------------------


@dataclass(frozen=True)
class FitOptions:
    outer_tolerance: float = 1e-8
    max_outer: int = 100
    # hand over to the joint Newton polish once the two-stage change is this small
    switch_tolerance: float = 1e-4
    residual_tolerance: float = 1e-6
    polish: bool = True
    method: str = "auto"


@dataclass(frozen=True, eq=False)
class FitResult:
    spec: ModelSpec
    theta_hat: Theta
    alpha: float
    objective_value: float
    sigma: np.ndarray
    J_hat: np.ndarray
    K_hat: np.ndarray
    converged: bool
    iterations: int
    residual: float
    n: int
    covariate_names: tuple = ()
    message: str = ""

    @property
    def theta_vector(self):
        return self.theta_hat.vector

    @property
    def param_names(self):
        return self.spec.param_names(self.covariate_names or None)

    def standard_errors(self):
        """``sqrt(diag(Sigma) / n)``."""
        return np.sqrt(np.clip(np.diag(self.sigma), 0.0, None) / self.n)

    def to_dict(self):
        return {
            "baseline": self.spec.baseline.name,
            "p": self.spec.p,
            "parameters": list(self.param_names),
            "theta": self.theta_vector.tolist(),
            "standard_errors": self.standard_errors().tolist(),
            "alpha": self.alpha,
            "objective": self.objective_value,
            "sigma": self.sigma.tolist(),
            "J": self.J_hat.tolist(),
            "K": self.K_hat.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "n": self.n,
            "message": self.message,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def report(self):
        lines = [
            f"MDPDE fit: baseline={self.spec.baseline.name} alpha={self.alpha:g} n={self.n}",
            f"converged={self.converged} iterations={self.iterations} residual={self.residual:.3e}",
            f"objective H={self.objective_value:.10g}",
            f"{'parameter':<14}{'estimate':>14}{'std.error':>14}",
        ]
        for name, est, se in zip(self.param_names, self.theta_vector, self.standard_errors()):
            lines.append(f"{name:<14}{est:>14.6f}{se:>14.6f}")
        if self.message:
            lines.append(self.message)
        return "\n".join(lines)


def default_start(spec, data):
    rate = max(data.events, 1) / max(float(np.sum(data.time)), np.finfo(float).tiny)
    return Theta(spec.baseline.initial_gamma(rate), np.zeros(spec.p))


def fit_mdpde(spec, data, alpha, start=None, options=FitOptions()):
    """Two-stage MDPDE fit followed by a joint Newton polish.

    Stage (a) solves the covariate estimating equations for ``beta`` by
    Newton-Raphson with ``gamma`` held fixed; stage (b) minimizes the
    objective over ``log gamma`` by Nelder-Mead with ``beta`` held fixed.
    The stages alternate until the sup-norm change of ``theta`` falls
    below ``options.outer_tolerance``, or below ``options.switch_tolerance``
    when polishing is enabled. A Newton polish on the full
    estimating equation in ``(log gamma, beta)`` then drives the residual
    below ``options.residual_tolerance``.

    Non-convergence is flagged on the result, not raised.
    """
    alpha = _check_alpha(alpha)
    if alpha > 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    _check_data(spec, data)
    data.require_events()
    method = options.method
    q = spec.q
    theta = _as_theta(spec, start if start is not None else default_start(spec, data))
    gamma, beta = theta.gamma.copy(), theta.beta.copy()

    def mean_score(g, b):
        t = Theta(g, b)
        with np.errstate(over="ignore", invalid="ignore"):
            return _score_matrix(_sample_pieces(spec, t, alpha, data, method), alpha).mean(axis=0)

    def objective(g, b):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return float(np.mean(_objective_terms(_sample_pieces(spec, Theta(g, b), alpha, data, method), alpha)))

    def safe_score(g, b):
        try:
            spec.baseline.check(g)
            return mean_score(g, b)
        except (ParameterDomainError, FloatingPointError):
            return np.full(spec.k, np.inf)

    def beta_stage(g, b):
        # Newton on the covariate equations; a stalled Newton run restarts
        # from the minimizer of H over beta, whose gradient is the same score
        def eq(bb):
            return safe_score(g, bb)[q:]

        def run(b0):
            try:
                return numerics.newton_raphson(
                    eq, lambda bb: numerics.numerical_jacobian(eq, bb), b0, tol=1e-10,
                    error=DegenerateInformationError,
                )
            except DegenerateInformationError:
                return None

        res = run(b)
        if res is not None and res.converged:
            return res.root
        opt = numerics.minimize_scalar_free(lambda bb: objective(g, bb), b, xatol=1e-8, fatol=1e-15)
        res2 = run(opt.x)
        if res2 is not None and res2.converged:
            return res2.root
        return opt.x

    def two_stage(gamma, beta, stop, rounds, probe=0):
        # probe > 0: try the joint polish every `probe` rounds so slowly
        # zigzagging runs can finish early
        step = None
        for it in range(1, rounds + 1):
            prev = np.concatenate([gamma, beta])
            if spec.p:
                beta = beta_stage(gamma, beta)

            def h_log(lg, beta=beta):
                g = np.exp(lg)
                if not np.all(np.isfinite(g)) or np.any(g <= 0):
                    return np.inf
                return objective(g, beta)

            opt = numerics.minimize_scalar_free(h_log, np.log(gamma), xatol=1e-10, fatol=1e-15, initial_step=step)
            # later rounds start from a simplex sized to the last move
            step = float(np.clip(np.max(np.abs(opt.x - np.log(gamma))), 1e-6, 0.1))
            gamma = np.exp(opt.x)
            if np.max(np.abs(np.concatenate([gamma, beta]) - prev)) < stop:
                return gamma, beta, it, True
            if probe and it % probe == 0:
                g, b, ok = polish(gamma, beta)
                if ok:
                    return g, b, it, True
        return gamma, beta, rounds, False

    def eq_eta(eta):
        g = np.exp(eta[:q])
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            return np.full(spec.k, np.inf)
        return safe_score(g, eta[q:])

    def polish(gamma, beta):
        try:
            res = numerics.newton_raphson(
                eq_eta,
                lambda e: numerics.numerical_jacobian(eq_eta, e),
                np.concatenate([np.log(gamma), beta]),
                tol=0.1 * options.residual_tolerance,
                error=DegenerateInformationError,
            )
        except DegenerateInformationError:
            return gamma, beta, False
        g, b = np.exp(res.root[:q]), res.root[q:]
        ok = np.max(np.abs(safe_score(g, b))) < options.residual_tolerance
        return (g, b, True) if ok else (gamma, beta, False)

    message = ""
    if options.polish:
        stop = max(options.switch_tolerance, options.outer_tolerance)
        gamma, beta, iterations, outer_ok = two_stage(gamma, beta, stop, options.max_outer, probe=10)
        gamma, beta, polished = polish(gamma, beta)
        if not polished:
            gamma, beta, more, outer_ok = two_stage(gamma, beta, options.outer_tolerance, options.max_outer - iterations)
            iterations += more
            gamma, beta, polished = polish(gamma, beta)
    else:
        gamma, beta, iterations, outer_ok = two_stage(gamma, beta, options.outer_tolerance, options.max_outer)
    if not outer_ok:
        message = f"two-stage iteration stopped after {iterations} rounds"

    theta = Theta(gamma, beta)
    residual = float(np.max(np.abs(mean_score(gamma, beta))))
    converged = bool(np.isfinite(residual) and residual < options.residual_tolerance)
    if not converged and not message:
        message = f"estimating-equation residual {residual:.3e} above tolerance"
    j_hat, k_hat, sigma = sandwich_covariance(spec, data, theta, alpha, method=method)
    return FitResult(
        spec=spec,
        theta_hat=theta,
        alpha=alpha,
        objective_value=objective(gamma, beta),
        sigma=sigma,
        J_hat=j_hat,
        K_hat=k_hat,
        converged=converged,
        iterations=iterations,
        residual=residual,
        n=data.n,
        covariate_names=tuple(data.names),
        message=message,
    )


def sandwich_covariance(spec, data, theta_hat, alpha, method="auto"):
    """Empirical ``(J, K, Sigma = J^{-1} K J^{-1})`` at ``theta_hat``.

    ``J`` is minus the central-difference Jacobian of the mean score,
    symmetrized; ``K`` is the average outer product of the scores.
    """
    alpha = _check_alpha(alpha)
    theta_hat = _as_theta(spec, theta_hat)
    _check_data(spec, data)
    vec = theta_hat.vector

    def mean_score(v):
        return _score_matrix(_sample_pieces(spec, Theta.from_vector(spec, v), alpha, data, method), alpha).mean(axis=0)

    with np.errstate(over="ignore", invalid="ignore"):
        jac = numerics.numerical_jacobian(mean_score, vec)
        u = _score_matrix(_sample_pieces(spec, theta_hat, alpha, data, method), alpha)
    j_hat = -0.5 * (jac + jac.T)
    k_hat = u.T @ u / data.n
    if not (np.all(np.isfinite(j_hat)) and np.all(np.isfinite(k_hat))):
        raise DegenerateInformationError("non-finite score derivatives at theta_hat")
    try:
        sigma = numerics.sandwich(j_hat, k_hat, error=DegenerateInformationError)
    except NearSingularError as exc:
        raise DegenerateInformationError(str(exc), condition=exc.condition) from exc
    return j_hat, k_hat, sigma


__all__ = [
    "FitOptions",
    "FitResult",
    "ModelSpec",
    "RobustPHError",
    "Theta",
    "conditional_density",
    "conditional_hazard",
    "conditional_survival",
    "default_start",
    "density_power_integral",
    "dpd_objective",
    "fit_mdpde",
    "sandwich_covariance",
    "score_contributions",
    "score_matrix",
    "xi_integral",
]
