"""Robust density-power-divergence inference for parametric proportional hazards models."""

from .data import CensoredDataset, load_csv, subset_covariates, to_csv
from .exceptions import RobustPHError
from .hazards import BaselineHazard, ExponentialBaseline, WeibullBaseline, get_baseline, register_baseline
from .inference import (
    baseline_param_equals,
    coefficient_equals,
    coefficients_zero,
    parse_hypothesis,
    wald_test,
)
from .mdpde import FitOptions, FitResult, ModelSpec, Theta, fit_mdpde
from .selection import dic, model_search, select_alpha

__all__ = [
    "BaselineHazard",
    "CensoredDataset",
    "ExponentialBaseline",
    "FitOptions",
    "FitResult",
    "ModelSpec",
    "RobustPHError",
    "Theta",
    "WeibullBaseline",
    "baseline_param_equals",
    "coefficient_equals",
    "coefficients_zero",
    "dic",
    "fit_mdpde",
    "get_baseline",
    "load_csv",
    "model_search",
    "parse_hypothesis",
    "register_baseline",
    "select_alpha",
    "subset_covariates",
    "to_csv",
    "wald_test",
]
