"""Divergence information criterion, tuning-parameter choice and model search."""

from __future__ import annotations

import csv
import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .data import subset_covariates
from .exceptions import DegenerateInformationError, DomainError, RobustPHError
from .hazards import get_baseline
from .inference import coefficient_equals, wald_test
from .mdpde import ModelSpec, Theta, fit_mdpde

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(np.round(np.arange(0, 21) * 0.05, 2))
FINE_GRID = tuple(np.round(np.arange(0, 101) * 0.01, 2))
MAX_SEARCH_COVARIATES = 15


def dic(fit):
    """``H(theta_hat) + (alpha + 1)/n trace(K J^{-1})``."""
    penalty = numerics.trace_solve(fit.J_hat, fit.K_hat, error=DegenerateInformationError)
    return fit.objective_value + (fit.alpha + 1.0) / fit.n * penalty


def amse_estimate(fit, pilot):
    """Squared distance to the pilot plus ``trace(Sigma) / n``."""
    pilot = pilot.vector if isinstance(pilot, Theta) else np.asarray(pilot, dtype=float)
    diff = fit.theta_vector - pilot
    if diff.shape != pilot.shape:
        raise DomainError("pilot dimension does not match the fit")
    return float(diff @ diff + np.trace(fit.sigma) / fit.n)


@dataclass(frozen=True)
class AlphaSelection:
    alpha_hat: float
    amse: dict  # alpha -> AMSE, failed values omitted
    fits: dict = field(repr=False, default_factory=dict)
    pilot_alpha: float = 0.5
    rounds: int = 1

    @property
    def fit(self):
        return self.fits[self.alpha_hat]


def select_alpha(spec, data, grid=DEFAULT_GRID, pilot_alpha=0.5, iterate=False, max_rounds=5):
    """Pick ``alpha`` on ``grid`` by minimizing the estimated AMSE.

    Every grid fit starts from the pilot estimate. With ``iterate`` the
    pilot moves to the current choice until the choice repeats.
    """
    grid = tuple(float(a) for a in grid)
    if not grid:
        raise DomainError("alpha grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 0 or grid[-1] > 1:
        raise DomainError("alpha grid must be sorted, distinct and inside [0, 1]")
    fits = {}

    def fit_at(a, start):
        if a not in fits:
            fits[a] = fit_mdpde(spec, data, a, start=start)
        return fits[a]

    pilot_fit = fit_at(float(pilot_alpha), None)
    current_pilot = pilot_alpha
    alpha_hat, amse, rounds = None, {}, 0
    for rounds in range(1, (max_rounds if iterate else 1) + 1):
        pilot = fits[current_pilot].theta_hat
        amse = {}
        for a in grid:
            try:
                f = fit_at(a, pilot_fit.theta_hat)
            except RobustPHError as exc:
                warnings.warn(f"alpha={a:g} excluded: {exc}", stacklevel=2)
                continue
            if not f.converged:
                warnings.warn(f"alpha={a:g} excluded: fit did not converge", stacklevel=2)
                continue
            amse[a] = amse_estimate(f, pilot)
        if not amse:
            raise RobustPHError("every alpha on the grid failed to fit")
        best = min(amse, key=lambda a: (amse[a], a))
        if best == alpha_hat:
            break
        alpha_hat = best
        if best == current_pilot:
            break
        current_pilot = best
    return AlphaSelection(alpha_hat, amse, fits, float(pilot_alpha), rounds)


@dataclass(frozen=True)
class CandidateModel:
    baseline: str
    subset: tuple  # 0-based covariate indices

    def __post_init__(self):
        get_baseline(self.baseline)
        if not self.subset:
            raise DomainError("a candidate needs at least one covariate")

    def label(self, names):
        return f"{self.baseline}:" + "+".join(names[i] for i in self.subset)


@dataclass(frozen=True)
class CandidateOutcome:
    candidate: CandidateModel
    label: str
    alpha_hat: float = float("nan")
    dic: float = float("nan")
    converged: bool = False
    fit: object = field(default=None, repr=False)
    error: str = ""


@dataclass(frozen=True)
class DicReport:
    outcomes: tuple
    winner: CandidateOutcome
    winner_tests: tuple  # (name, estimate, se, p_value) per covariate
    tau: float = 0.05

    def ranking(self):
        ok = [o for o in self.outcomes if np.isfinite(o.dic)]
        return sorted(ok, key=_rank_key)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["candidate", "baseline", "subset", "alpha_hat", "dic", "converged", "winner"])
            for o in self.outcomes:
                w.writerow(
                    [
                        o.label,
                        o.candidate.baseline,
                        " ".join(str(i + 1) for i in o.candidate.subset),
                        f"{o.alpha_hat:.2f}",
                        repr(float(o.dic)),
                        int(o.converged),
                        int(o is self.winner),
                    ]
                )

    def summary(self):
        lines = [f"{'candidate':<40}{'alpha':>8}{'DIC':>14}"]
        for o in self.ranking():
            mark = " *" if o is self.winner else ""
            lines.append(f"{o.label:<40}{o.alpha_hat:>8.2f}{o.dic:>14.6f}{mark}")
        failed = [o for o in self.outcomes if not np.isfinite(o.dic)]
        for o in failed:
            lines.append(f"{o.label:<40}  failed: {o.error}")
        w = self.winner
        lines += [
            "",
            f"selected model {w.label} at alpha={w.alpha_hat:.2f}",
            f"{'covariate':<16}{'estimate':>12}{'SE':>12}{'p-value':>12}",
        ]
        for name, est, se, pv in self.winner_tests:
            lines.append(f"{name:<16}{est:>12.4f}{se:>12.4f}{pv:>12.4f}")
        return "\n".join(lines)


def _rank_key(o):
    return (o.dic, len(o.candidate.subset), o.label)


def enumerate_candidates(p, baselines, max_subset_size=None):
    size = p if max_subset_size is None else min(p, max_subset_size)
    subsets = [s for k in range(1, size + 1) for s in itertools.combinations(range(p), k)]
    return [CandidateModel(b, s) for b in baselines for s in subsets]


def model_search(data, baselines=("exponential", "weibull"), max_subset_size=None, tau=0.05,
                 grid=DEFAULT_GRID, allow_large=False):
    """Choose the baseline family and covariate subset with the smallest DIC.

    Each candidate gets its own AMSE-selected ``alpha``. Ties go to the
    smaller subset, then to the label. The winner's coefficients are
    tested one at a time against zero.
    """
    if data.p > MAX_SEARCH_COVARIATES and not allow_large:
        raise DomainError(f"{data.p} covariates give too many subsets; pass allow_large=True")
    outcomes = []
    for cand in enumerate_candidates(data.p, baselines, max_subset_size):
        label = cand.label(data.names)
        sub = subset_covariates(data, cand.subset)
        spec = ModelSpec(cand.baseline, len(cand.subset))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sel = select_alpha(spec, sub, grid)
            fit = sel.fit
            value = dic(fit)
            outcomes.append(CandidateOutcome(cand, label, sel.alpha_hat, value, fit.converged, fit))
        except RobustPHError as exc:
            log.warning("candidate %s failed: %s", label, exc)
            outcomes.append(CandidateOutcome(cand, label, error=str(exc)))
    ok = [o for o in outcomes if np.isfinite(o.dic)]
    if not ok:
        raise RobustPHError("every candidate model failed")
    winner = min(ok, key=_rank_key)
    fit = winner.fit
    ses = fit.standard_errors()
    tests = []
    for j in range(1, fit.spec.p + 1):
        res = wald_test(fit, coefficient_equals(fit.spec, j, 0.0), tau)
        idx = fit.spec.q + j - 1
        tests.append((fit.covariate_names[j - 1], float(fit.theta_vector[idx]), float(ses[idx]), res.p_value))
    return DicReport(tuple(outcomes), winner, tuple(tests), tau)
