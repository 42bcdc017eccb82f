"""Special functions, quadrature, small dense linear algebra and optimizers.

Everything here is pure and reentrant. The chi-square and normal
distribution functions are thin wrappers over ``scipy.special``; the
noncentral chi-square survival function is evaluated from its Poisson
mixture so that the truncation rule is explicit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special, stats

from .exceptions import DomainError, NearSingularError, QuadratureError

#: Largest condition number accepted by :func:`solve_spd`.
MAX_CONDITION = 1e12
#: Poisson tail mass below which mixture series are truncated.
SERIES_TAIL_MASS = 1e-14


@dataclass(frozen=True)
class QuadratureSpec:
    relative_tolerance: float = 1e-8
    absolute_tolerance: float = 1e-12
    max_subdivisions: int = 200
    upper_cutoff_survival: float = 1e-12

    def __post_init__(self):
        if not (self.relative_tolerance > 0 and self.absolute_tolerance > 0):
            raise DomainError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")
        if not 0 < self.upper_cutoff_survival < 1:
            raise DomainError("upper_cutoff_survival must lie in (0, 1)")


DEFAULT_QUADRATURE = QuadratureSpec()


def adaptive_quadrature(f, a, b, spec=DEFAULT_QUADRATURE):
    """Integrate a scalar function over ``[a, b]``.

    ``b`` may be ``np.inf``; QUADPACK then maps the half line onto
    ``(0, 1]`` internally.

    Returns
    -------
    value, error : float
        Integral estimate and absolute error bound.

    Raises
    ------
    QuadratureError
        If the tolerance is not met within ``spec.max_subdivisions``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            f,
            a,
            b,
            epsabs=spec.absolute_tolerance,
            epsrel=spec.relative_tolerance,
            limit=spec.max_subdivisions,
            full_output=1,
        )
    value, error, info = out[0], out[1], out[2]
    if len(out) > 3:
        tol = max(spec.absolute_tolerance, spec.relative_tolerance * abs(value))
        # ier=2 is roundoff detection; accept it when the bound is still met
        if not (np.isfinite(value) and error <= 10 * tol):
            raise QuadratureError(
                f"quadrature did not converge on [{a}, {b}]: {out[3].strip()}",
                value=value,
                error=error,
            )
    del info
    return value, error


# -- distributions -----------------------------------------------------------


def _check_df(r):
    if r < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {r}")


def chisq_cdf(x, r):
    """P(chi2_r <= x)."""
    _check_df(r)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("chisq_cdf requires x >= 0")
    out = special.gammainc(0.5 * r, 0.5 * x)
    return out[()] if out.ndim == 0 else out


def chisq_sf(x, r):
    """P(chi2_r > x), accurate in the upper tail."""
    _check_df(r)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("chisq_sf requires x >= 0")
    out = special.gammaincc(0.5 * r, 0.5 * x)
    return out[()] if out.ndim == 0 else out


def chisq_quantile(p, r):
    """Inverse of :func:`chisq_cdf` in ``x``."""
    _check_df(r)
    if not 0 < p < 1:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    return 2.0 * float(special.gammaincinv(0.5 * r, p))


def poisson_truncation(mean, tail=SERIES_TAIL_MASS):
    """Smallest ``v`` with Poisson(mean) mass above ``v`` below ``tail``."""
    if mean <= 0:
        return 0
    start = stats.poisson.isf(tail, mean)
    v = int(start) if np.isfinite(start) else int(mean)
    while stats.poisson.sf(v, mean) >= tail:
        v += 1
    return v


def poisson_weights(mean, vmax):
    """Poisson(mean) probabilities for ``v = 0..vmax`` computed in log space."""
    v = np.arange(vmax + 1)
    if mean == 0:
        return (v == 0).astype(float)
    return np.exp(-mean + v * math.log(mean) - special.gammaln(v + 1))


def noncentral_chisq_sf(x, r, delta):
    """P(chi2_r(delta) > x) as a Poisson-weighted mixture of central tails.

    Terms ``e^{-delta/2} (delta/2)^v / v! * P(chi2_{r+2v} > x)`` are summed
    until the remaining Poisson mass falls below ``1e-14``; with
    ``delta = 0`` only the central term survives.
    """
    _check_df(r)
    if x < 0 or delta < 0:
        raise DomainError("noncentral_chisq_sf requires x >= 0 and delta >= 0")
    if delta == 0:
        return float(chisq_sf(x, r))
    mean = 0.5 * delta
    vmax = poisson_truncation(mean)
    w = poisson_weights(mean, vmax)
    tails = special.gammaincc(0.5 * r + np.arange(vmax + 1), 0.5 * x)
    return float(min(1.0, np.dot(w, tails)))


def normal_cdf(x):
    return special.ndtr(x)


def normal_quantile(p):
    if not 0 < p < 1:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    return float(special.ndtri(p))


# -- linear algebra ----------------------------------------------------------


def _as_matrix(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def condition_number(a):
    a = _as_matrix(a)
    if not np.all(np.isfinite(a)):
        return np.inf
    with np.errstate(all="ignore"):
        return float(np.linalg.cond(a))


def solve_spd(a, b, max_condition=MAX_CONDITION, error=NearSingularError):
    """Solve ``a x = b`` for square ``a`` with condition monitoring.

    ``b`` may be a vector or a matrix; the result has the same shape.
    Raises ``error`` (a :class:`NearSingularError` subclass) when the
    2-norm condition number exceeds ``max_condition``.
    """
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DomainError(f"matrix must be square, got shape {a.shape}")
    cond = condition_number(a)
    if not cond <= max_condition:
        raise error(f"matrix is near-singular (condition {cond:.3g})", condition=cond)
    return np.linalg.solve(a, np.asarray(b, dtype=float))


def inverse(a, **kw):
    a = _as_matrix(a)
    return solve_spd(a, np.eye(a.shape[0]), **kw)


def trace_solve(a, b, **kw):
    """trace(a^{-1} b)."""
    return float(np.trace(solve_spd(a, _as_matrix(b), **kw)))


def quadratic_form_inv(a, v, **kw):
    """v' a^{-1} v."""
    v = np.asarray(v, dtype=float)
    return float(v @ solve_spd(a, v, **kw))


def sandwich(bread, meat, **kw):
    """bread^{-1} meat bread^{-1}, symmetrized."""
    left = solve_spd(bread, meat, **kw)
    out = solve_spd(bread, left.T, **kw).T
    return 0.5 * (out + out.T)


def is_psd(a, tol=1e-10):
    a = _as_matrix(a)
    if not np.allclose(a, a.T, atol=tol * max(1.0, np.abs(a).max())):
        return False
    eig = np.linalg.eigvalsh(0.5 * (a + a.T))
    return bool(eig.min() >= -tol * max(1.0, abs(eig).max()))


def numerical_jacobian(fun, x, rel_step=1e-6):
    """Central-difference Jacobian of a vector function, shape (m, k)."""
    x = np.asarray(x, dtype=float)
    steps = rel_step * np.maximum(1.0, np.abs(x))
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = steps[k]
        cols.append((np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * steps[k]))
    return np.column_stack(cols)


# -- optimizers --------------------------------------------------------------


@dataclass(frozen=True)
class OptimizeOutcome:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    message: str = ""


def minimize_scalar_free(f, x0, xatol=1e-8, fatol=1e-14, maxiter=2000, initial_step=None):
    """Derivative-free Nelder-Mead minimization of ``f`` over a real vector.

    ``initial_step`` sets the edge length of the starting simplex (scipy's
    5% default when omitted). Hitting ``maxiter`` is reported through
    ``converged=False`` rather than raised.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.isfinite(f(x0)):
        raise DomainError("objective is not finite at the starting point")

    def safe(x):
        v = f(x)
        return v if np.isfinite(v) else np.inf

    options = {"xatol": xatol, "fatol": fatol, "maxiter": maxiter, "maxfev": 4 * maxiter}
    if initial_step is not None:
        options["initial_simplex"] = np.vstack([x0, x0 + initial_step * np.eye(x0.size)])
    res = optimize.minimize(safe, x0, method="Nelder-Mead", options=options)
    return OptimizeOutcome(
        x=np.asarray(res.x, dtype=float),
        value=float(res.fun),
        converged=bool(res.success),
        iterations=int(res.nit),
        message=str(res.message),
    )


@dataclass(frozen=True)
class NewtonOutcome:
    root: np.ndarray
    converged: bool
    iterations: int
    residual: float


def newton_raphson(g, jac, x0, tol=1e-8, maxiter=50, max_halvings=30, error=NearSingularError):
    """Newton-Raphson root finding with step halving.

    A full step is halved (up to ``max_halvings`` times) while it fails to
    decrease the sup-norm of ``g``. Convergence means ``||g(root)||_inf < tol``.
    A singular Jacobian raises ``error``; running out of iterations is
    reported via ``converged=False`` with the last iterate.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    gx = np.atleast_1d(g(x))
    norm = np.max(np.abs(gx))
    for it in range(1, maxiter + 1):
        if norm < tol:
            return NewtonOutcome(x, True, it - 1, norm)
        jx = np.atleast_2d(jac(x))
        step = solve_spd(jx, gx, error=error)
        t = 1.0
        for _ in range(max_halvings + 1):
            cand = x - t * step
            gc = np.atleast_1d(g(cand))
            nc = np.max(np.abs(gc)) if np.all(np.isfinite(gc)) else np.inf
            if nc < norm:
                break
            t *= 0.5
        else:
            return NewtonOutcome(x, False, it, norm)
        x, gx, norm = cand, gc, nc
    return NewtonOutcome(x, bool(norm < tol), maxiter, norm)
