"""Command-line front end.

Exit codes: 0 success, 2 usage or parse error, 3 data validation error,
4 numerical failure (non-convergence, singular matrices, quadrature).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings

import numpy as np

from .data import load_csv
from .exceptions import (
    DataValidationError,
    DomainError,
    HypothesisParseError,
    NearSingularError,
    QuadratureError,
    RobustPHError,
)
from .hazards import available_baselines
from .inference import influence_context, influence_header, influence_sweep, parse_hypothesis, wald_test
from .mdpde import ModelSpec, Theta, fit_mdpde
from .selection import DEFAULT_GRID, model_search, select_alpha
from .simulation import TABLE_ALPHAS, ContaminationScheme, SimConfig, level_power_experiment

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConvergenceFailure(RobustPHError):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text):
    """``"a:b:step"`` or a comma list."""
    if ":" in text:
        try:
            a, b, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:step") from None
        if step <= 0 or b < a:
            raise argparse.ArgumentTypeError("grid needs step > 0 and stop >= start")
        count = int(np.floor((b - a) / step + 1e-9)) + 1
        return [round(a + k * step, 10) for k in range(count)]
    return _floats(text)


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--time-col", default="time")
    p.add_argument("--status-col", default="status")
    p.add_argument("--status-true", default=None, help="token marking an observed event (default: 0/1 column)")
    p.add_argument("--covariates", default="", help="comma-separated covariate columns")


def _add_model_flags(p, alpha_default=0.0):
    p.add_argument("--baseline", choices=available_baselines(), default="exponential")
    p.add_argument("--alpha", type=float, default=alpha_default)


def build_parser():
    parser = argparse.ArgumentParser(prog="robustph", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the MDPDE at one alpha")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="write the JSON fit record here")

    p = sub.add_parser("test", help="Wald-type test of a coordinate hypothesis")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--hypothesis", required=True, help='e.g. "beta[2]=1", "beta[1,3]=0", "gamma[2]=1"')
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")

    p = sub.add_parser("influence", help="IF, IF2 and PIF over a grid of contamination points")
    _add_data_flags(p)
    p.add_argument("--baseline", choices=available_baselines(), default="exponential")
    p.add_argument("--alpha-grid", type=_grid, default=[0.0, 0.3])
    p.add_argument("--hypothesis", required=True)
    p.add_argument("--theta0", type=_floats, help="null parameter (gamma..., beta...); default: restricted fit")
    p.add_argument("--drift", type=float, default=0.001, help="contiguous drift on each restricted coordinate")
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--x-grid", type=_grid, default=None, help="contamination times (default 0:1000:10)")
    p.add_argument("--z-t", type=_floats, default=None, help="covariates of the contamination point")
    p.add_argument("--out")

    p = sub.add_parser("select", help="DIC model search over baselines and covariate subsets")
    _add_data_flags(p)
    p.add_argument("--baselines", default=",".join(available_baselines()))
    p.add_argument("--alpha-grid", type=_grid, default=list(DEFAULT_GRID))
    p.add_argument("--max-subset-size", type=int, default=None)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--out", help="candidate table CSV")

    p = sub.add_parser("select-alpha", help="AMSE choice of the tuning parameter")
    _add_data_flags(p)
    p.add_argument("--baseline", choices=available_baselines(), default="exponential")
    p.add_argument("--alpha-grid", type=_grid, default=list(DEFAULT_GRID))
    p.add_argument("--pilot", type=float, default=0.5)
    p.add_argument("--iterate", action="store_true")
    p.add_argument("--out", help="AMSE table CSV")

    p = sub.add_parser("simulate", help="Monte Carlo level or power table")
    p.add_argument("--baseline", choices=available_baselines(), default="exponential")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--gamma", type=_floats, default=None, help="baseline parameters (default 1 or 1,1)")
    p.add_argument("--beta", type=_floats, default=[1.0, 1.0, 1.0])
    p.add_argument("--covariate-mean", type=float, default=0.0)
    p.add_argument("--censoring", type=_floats, default=[0.05])
    p.add_argument("--epsilon", type=_floats, default=[0.0])
    p.add_argument("--contam-mean", type=float, default=31.0, help="mean of exponential contamination")
    p.add_argument("--contam-weibull", type=_floats, default=None, help="gamma1,gamma2 of Weibull contamination")
    p.add_argument("--hypothesis", default="beta[2]=1")
    p.add_argument("--drift", type=float, default=None, help="power at null + drift/sqrt(n) on restricted coordinates")
    p.add_argument("--alpha-grid", type=_grid, default=list(TABLE_ALPHAS))
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    return parser


def _load(args):
    covs = [c.strip() for c in args.covariates.split(",") if c.strip()]
    return load_csv(args.data, args.time_col, args.status_col, covs, args.status_true)


def _fit(spec, data, alpha):
    fit = fit_mdpde(spec, data, alpha)
    if not fit.converged:
        raise ConvergenceFailure(f"fit did not converge: {fit.message}\n{fit.report()}")
    return fit


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def cmd_fit(args, out):
    data = _load(args)
    fit = _fit(ModelSpec(args.baseline, data.p), data, args.alpha)
    print(fit.to_json(indent=2) if args.format == "json" else fit.report(), file=out)
    if args.out:
        _write(args.out, fit.to_json(indent=2))


def cmd_test(args, out):
    data = _load(args)
    spec = ModelSpec(args.baseline, data.p)
    h = parse_hypothesis(args.hypothesis, spec)
    res = wald_test(_fit(spec, data, args.alpha), h, args.tau)
    text = json.dumps(res.to_dict(), indent=2) if args.format == "json" else res.report()
    print(text, file=out)
    if args.out:
        _write(args.out, json.dumps(res.to_dict(), indent=2))


def _restricted_theta(h, theta):
    # coordinate hypotheses: overwrite the restricted entries with their null values
    theta = np.array(theta, dtype=float)
    for row, value in zip(h.L, h.b):
        theta[np.flatnonzero(row)[0]] = value
    return theta


def cmd_influence(args, out):
    data = _load(args)
    spec = ModelSpec(args.baseline, data.p)
    h = parse_hypothesis(args.hypothesis, spec)
    z_t = np.zeros(spec.p) if args.z_t is None else np.asarray(args.z_t)
    if z_t.shape != (spec.p,):
        raise DomainError(f"--z-t needs {spec.p} values")
    grid = args.x_grid if args.x_grid is not None else _grid("0:1000:10")
    d = args.drift * (h.L.sum(axis=0) != 0)
    rows = []
    for alpha in args.alpha_grid:
        if args.theta0 is not None:
            theta0 = np.asarray(args.theta0, dtype=float)
        else:
            theta0 = _restricted_theta(h, _fit(spec, data, alpha).theta_vector)
        ctx = influence_context(spec, data, Theta.from_vector(spec, theta0), alpha, h, d, args.tau)
        rows += [(alpha, *row) for row in influence_sweep(ctx, grid, (0, 1), z_t)]
    text = _csv_text(["alpha", *influence_header(spec, data.names)], rows)
    if args.out:
        _write(args.out, text)
    else:
        print(text, end="", file=out)


def cmd_select(args, out):
    data = _load(args)
    if data.p == 0:
        raise DomainError("model search needs at least one covariate")
    baselines = [b.strip() for b in args.baselines.split(",") if b.strip()]
    report = model_search(data, baselines, args.max_subset_size, args.tau, grid=args.alpha_grid)
    print(report.summary(), file=out)
    if args.out:
        report.write_csv(args.out)


def cmd_select_alpha(args, out):
    data = _load(args)
    spec = ModelSpec(args.baseline, data.p)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sel = select_alpha(spec, data, args.alpha_grid, args.pilot, args.iterate)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"selected alpha: {sel.alpha_hat:.2f} (pilot {sel.pilot_alpha:.2f}, rounds {sel.rounds})", file=out)
    print(sel.fit.report(), file=out)
    rows = [(a, v) for a, v in sorted(sel.amse.items())]
    if args.out:
        _write(args.out, _csv_text(["alpha", "amse"], rows))


def cmd_simulate(args, out):
    spec = ModelSpec(args.baseline, len(args.beta))
    gamma = args.gamma if args.gamma is not None else [1.0] * spec.q
    theta = Theta(gamma, args.beta)
    h = parse_hypothesis(args.hypothesis, spec)
    if args.contam_weibull is not None:
        scheme = ContaminationScheme("weibull_params", tuple(args.contam_weibull))
    else:
        scheme = ContaminationScheme("exponential_mean", (args.contam_mean,))
    drift = None if args.drift is None else args.drift * (h.L.sum(axis=0) != 0)
    rows = []
    for cens in args.censoring:
        for eps in args.epsilon:
            cfg = SimConfig(
                n=args.n, spec=spec, theta_true=theta, seed=args.seed, covariate_mean=args.covariate_mean,
                censoring_target=cens, epsilon=eps, contamination=scheme, replications=args.reps, tau=args.tau,
            )
            cells = level_power_experiment(cfg, h, args.alpha_grid, drift=drift, workers=args.workers)
            rows.append((cens, eps, cells))
    header = ["censoring", "epsilon", *(f"alpha_{a:g}" for a in args.alpha_grid), "failures"]
    lines = [header]
    for cens, eps, cells in rows:
        lines.append([f"{cens:g}", f"{eps:g}", *(f"{c.rate:.4f}" for c in cells), sum(c.failures for c in cells)])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(lines)
    if args.out:
        _write(args.out, buf.getvalue())
    print(buf.getvalue(), end="", file=out)


COMMANDS = {
    "fit": cmd_fit,
    "test": cmd_test,
    "influence": cmd_influence,
    "select": cmd_select,
    "select-alpha": cmd_select_alpha,
    "simulate": cmd_simulate,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "tau", None) is not None and not 0 < args.tau < 1:
            raise DomainError("--tau must lie in (0, 1)")
        COMMANDS[args.command](args, out)
    except (HypothesisParseError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NearSingularError, QuadratureError, ConvergenceFailure, RobustPHError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
