"""Parametric baseline hazard families.

A family supplies the baseline hazard ``lambda(t, gamma)``, the cumulative
hazard ``Lambda(t, gamma)``, their gamma-gradients ``psi = d log lambda /
d gamma`` and ``Psi = d Lambda / d gamma``, and the inverse cumulative
hazard.  All methods are vectorized over ``t``.

New families subclass :class:`BaselineHazard` and are made visible to the
command line through :func:`register_baseline`.
"""

from __future__ import annotations

import abc

import numpy as np
from scipy import special

from .exceptions import DomainError, ParameterDomainError, SingularityError


class BaselineHazard(abc.ABC):
    """Contract for a baseline hazard family with ``q`` parameters."""

    name: str = ""
    q: int = 0
    param_names: tuple = ()

    def check(self, gamma):
        """Return ``gamma`` as a float array, raising on invalid values."""
        gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
        if gamma.shape != (self.q,):
            raise ParameterDomainError(f"{self.name}: expected {self.q} parameters, got {gamma.shape}")
        if not (gamma.min() > 0 and np.isfinite(gamma).all()):
            raise ParameterDomainError(f"{self.name}: parameters must be finite and > 0, got {gamma}")
        return gamma

    @staticmethod
    def _times(t):
        t = np.asarray(t, dtype=float)
        if t.size and not t.min() >= 0:
            raise DomainError("times must be >= 0")
        return t

    @abc.abstractmethod
    def hazard(self, t, gamma): ...

    @abc.abstractmethod
    def cumulative(self, t, gamma): ...

    @abc.abstractmethod
    def log_hazard_gradient(self, t, gamma):
        """Array of shape ``t.shape + (q,)``."""

    @abc.abstractmethod
    def cumulative_gradient(self, t, gamma):
        """Array of shape ``t.shape + (q,)``."""

    @abc.abstractmethod
    def inverse_cumulative(self, u, gamma): ...

    def initial_gamma(self, rate):
        """Starting value given a crude constant-hazard rate estimate."""
        return np.full(self.q, rate)

    def power_integrals(self, gamma, alpha, delta, c):
        """Closed forms of the model-density power integrals, if available.

        For ``f(x) = (lambda(x) c)^delta exp(-Lambda(x) c)`` and ``a = 1 + alpha``
        a family may return the triple

        * ``I = int f^a dx``, shape ``(n,)``;
        * ``int (psi delta - Psi c) f^a dx``, shape ``(n, q)``;
        * ``int (delta - Lambda c) f^a dx``, shape ``(n,)``.

        Returning ``None`` makes callers fall back to quadrature.
        """
        return None

    def __repr__(self):
        return f"{type(self).__name__}()"


class ExponentialBaseline(BaselineHazard):
    """Constant hazard ``lambda(t) = gamma``."""

    name = "exponential"
    q = 1
    param_names = ("gamma",)

    def hazard(self, t, gamma):
        (g,) = self.check(gamma)
        return np.full_like(self._times(t), g)

    def cumulative(self, t, gamma):
        (g,) = self.check(gamma)
        return g * self._times(t)

    def log_hazard_gradient(self, t, gamma):
        (g,) = self.check(gamma)
        t = self._times(t)
        return np.full(t.shape + (1,), 1.0 / g)

    def cumulative_gradient(self, t, gamma):
        self.check(gamma)
        return self._times(t)[..., None].copy()

    def inverse_cumulative(self, u, gamma):
        (g,) = self.check(gamma)
        return self._times(u) / g

    def power_integrals(self, gamma, alpha, delta, c):
        (g,) = self.check(gamma)
        a = 1.0 + alpha
        delta = np.asarray(delta, dtype=float)
        # with u = g c x:  f^a dx = (g c)^(a delta - 1) e^{-a u} du
        pref = np.exp((a * delta - 1.0) * np.log(g * c))
        integral = pref / a
        m1 = pref / a**2  # int u f^a
        lin = delta * integral - m1
        return integral, (lin / g)[:, None], lin


class WeibullBaseline(BaselineHazard):
    """``lambda(t) = g2 g1^g2 t^(g2 - 1)``, so ``Lambda(t) = (g1 t)^g2``."""

    name = "weibull"
    q = 2
    param_names = ("gamma1", "gamma2")

    def initial_gamma(self, rate):
        return np.array([rate, 1.0])

    def hazard(self, t, gamma):
        g1, g2 = self.check(gamma)
        t = self._times(t)
        if g2 < 1 and np.any(t == 0):
            raise SingularityError("Weibull hazard is infinite at t = 0 when shape < 1")
        with np.errstate(divide="ignore"):
            return g2 * g1**g2 * t ** (g2 - 1.0)

    def cumulative(self, t, gamma):
        g1, g2 = self.check(gamma)
        return (g1 * self._times(t)) ** g2

    def log_hazard_gradient(self, t, gamma):
        g1, g2 = self.check(gamma)
        t = self._times(t)
        if np.any(t == 0):
            raise SingularityError("d log(lambda)/d gamma2 involves log(t), undefined at t = 0")
        out = np.empty(t.shape + (2,))
        out[..., 0] = g2 / g1
        out[..., 1] = 1.0 / g2 + np.log(g1 * t)
        return out

    def cumulative_gradient(self, t, gamma):
        g1, g2 = self.check(gamma)
        t = self._times(t)
        gt = g1 * t
        out = np.empty(t.shape + (2,))
        out[..., 0] = g2 * g1 ** (g2 - 1.0) * t**g2
        with np.errstate(divide="ignore", invalid="ignore"):
            out[..., 1] = np.where(gt > 0, gt**g2 * np.log(np.where(gt > 0, gt, 1.0)), 0.0)
        return out

    def inverse_cumulative(self, u, gamma):
        g1, g2 = self.check(gamma)
        return self._times(u) ** (1.0 / g2) / g1

    def power_integrals(self, gamma, alpha, delta, c):
        # Substituting u = Lambda(x) c gives lambda c = A u^e with
        # A = g2 g1 c^(1/g2), e = 1 - 1/g2, and f^a dx = (A u^e)^(a delta - 1)
        # e^{-a u} du, so every integral is a gamma-function moment.
        g1, g2 = self.check(gamma)
        a = 1.0 + alpha
        delta = np.asarray(delta, dtype=float)
        logc = np.log(c)
        m = a * delta - 1.0
        s = (1.0 - 1.0 / g2) * m
        log_pref = m * (np.log(g2 * g1) + logc / g2)
        # int u^(s+k) e^{-a u} du diverges for s <= -1 (shape too small for alpha)
        ok = s > -1.0
        s_ok = np.where(ok, s, 0.0)
        loga = np.log(a)

        def moment(k):
            lg = special.gammaln(s_ok + k + 1.0) - (s_ok + k + 1.0) * loga
            return np.exp(log_pref + lg), special.digamma(s_ok + k + 1.0) - loga

        g0, d0 = moment(0)
        g1m, d1 = moment(1)
        # int L f^a and int u L f^a with L = log(g1 x) = (log u - log c) / g2
        log_int0 = g0 * (d0 - logc) / g2
        log_int1 = g1m * (d1 - logc) / g2
        integral = g0
        lin = delta * g0 - g1m
        xg = np.empty(delta.shape + (2,))
        xg[..., 0] = (g2 / g1) * lin
        xg[..., 1] = delta * g0 / g2 + delta * log_int0 - log_int1
        bad = ~ok
        if np.any(bad):
            integral = np.where(bad, np.inf, integral)
            lin = np.where(bad, np.nan, lin)
            xg[bad] = np.nan
        return integral, xg, lin


_REGISTRY: dict = {}


def register_baseline(name, family):
    """Make a family instance available under ``name`` (CLI identifier)."""
    if not isinstance(family, BaselineHazard):
        raise TypeError("family must be a BaselineHazard instance")
    _REGISTRY[name] = family


def get_baseline(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise DomainError(f"unknown baseline family {name!r}; known: {sorted(_REGISTRY)}") from None


def available_baselines():
    return sorted(_REGISTRY)


register_baseline("exponential", ExponentialBaseline())
register_baseline("weibull", WeibullBaseline())
