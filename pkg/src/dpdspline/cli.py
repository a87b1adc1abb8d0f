"""Command-line interface: ``dpdspline fit | diagnose | bench``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .basis import assemble, build_knots
from .bench import Scenario, format_table, run_benchmark
from .diagnostics import DEFAULT_CUTOFF, anscombe_residuals
from .exceptions import DpdSplineError
from .families import Gaussian, get_family, robust_scale_gaussian
from .io import (Dataset, FitArtifact, FitConfig, InputError, read_dataset,
                 write_diagnostics_csv, write_plot_data)
from .selection import default_lambda_grid, select_alpha, select_lambda
from .solver import fit

EXIT_INPUT = 2
EXIT_FIT = 3
CURVE_POINTS = 512

log = logging.getLogger("dpdspline")


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage} failed: {exc}")
        self.stage = stage


def _parse_auto(value, kind):
    if value == "auto":
        return "auto"
    try:
        return kind(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {value!r}") from None


def run_fit(data: Dataset, config: FitConfig, cutoff=DEFAULT_CUTOFF) -> FitArtifact:
    """Run the full estimation pipeline on a dataset."""
    t = data.t
    y = data.y
    m, p = config.m, config.p
    try:
        if config.knots == "auto":
            kv = build_knots(t, p=p, m=m, strategy="auto")
        else:
            kv = build_knots(t, p=p, m=m, strategy="explicit-K", K=int(config.knots))
        basis = assemble(kv, t, m)
    except DpdSplineError as exc:
        raise InputError(str(exc)) from exc

    fam = get_family(config.family)
    if isinstance(fam, Gaussian):
        try:
            fam = Gaussian(robust_scale_gaussian(y))
        except DpdSplineError as exc:
            raise StageError("scale estimation", exc) from exc

    lambdas = default_lambda_grid(data.n) if config.lam == "auto" else np.array([float(config.lam)])
    selection = None
    try:
        if config.alpha == "auto":
            rep = select_alpha(y, basis, fam, lambdas=lambdas)
            res = rep.fit
            selection = {
                "alpha_hat": rep.alpha_hat,
                "lambda_hat_per_alpha": rep.lambda_hat_per_alpha,
                "amise_curve": rep.amise_curve,
                "pilot_trace": rep.pilot_trace,
                "aic_curves": rep.aic_curves,
            }
        elif config.lam == "auto":
            lam_hat, _, fits = select_lambda(y, basis, fam, float(config.alpha), lambdas,
                                             return_fits=True)
            res = fits[lam_hat]
        else:
            res = fit(y, basis, fam, float(config.alpha), float(config.lam))
    except DpdSplineError as exc:
        raise StageError("alpha selection" if config.alpha == "auto" else "fit", exc) from exc

    resid = anscombe_residuals(fam, y, res.mu_hat, cutoff=cutoff)
    grid = np.linspace(0.0, 1.0, CURVE_POINTS)
    theta_grid = basis.evaluate(grid) @ res.coefs
    curve = {
        "t_original": data.from_unit(grid).tolist(),
        "t_unit": grid.tolist(),
        "theta_hat": theta_grid.tolist(),
        "mu_hat": np.asarray(fam.mean(theta_grid), dtype=float).tolist(),
    }
    fit_d = {
        "coefs": res.coefs.tolist(),
        "alpha": res.alpha,
        "lambda": res.lam,
        "theta_hat": res.theta_hat.tolist(),
        "mu_hat": np.asarray(res.mu_hat, dtype=float).tolist(),
        "objective": res.objective,
        "edf": res.edf,
        "iterations": res.iterations,
        "converged": res.converged,
        "mode_used": res.mode_used,
        "n": int(data.n),
    }
    return FitArtifact(
        config=config,
        dispersion=float(fam.dispersion),
        t_min=data.t_min,
        t_max=data.t_max,
        t_original=data.t_original.tolist(),
        y=data.y.tolist(),
        interior_knots=kv.interior.tolist(),
        fit=fit_d,
        selection=selection,
        residuals={"residuals": resid.residuals.tolist(), "flags": resid.flags.tolist(),
                   "cutoff": resid.cutoff},
        curve=curve,
        checksum=data.checksum,
    )


def cmd_fit(args) -> int:
    try:
        data = read_dataset(args.input, args.family)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    p = args.p if args.p is not None else 2 * args.m
    config = FitConfig(args.family, args.alpha, args.lam, args.m, p, args.knots, args.seed)
    if config.alpha != "auto" and not 0.0 <= config.alpha <= 1.0:
        print("error: --alpha must be 'auto' or lie in [0, 1]", file=sys.stderr)
        return EXIT_INPUT
    if config.lam != "auto" and not config.lam > 0:
        print("error: --lambda must be 'auto' or positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        art = run_fit(data, config)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    art.save(args.out)
    if args.plot_data:
        write_plot_data(args.plot_data, art.curve)
    sel = art.selection
    msg = f"alpha={art.fit['alpha']:g} lambda={art.fit['lambda']:.4g} (n={data.n}) edf={art.fit['edf']:.3f}"
    if sel is not None:
        msg += f" pilot_trace={[round(a, 4) for a in sel['pilot_trace']]}"
    print(msg)
    return 0


def cmd_diagnose(args) -> int:
    try:
        art = FitArtifact.load(args.fit)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: cannot read fit artifact {args.fit}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    fam = get_family(art.config.family, art.dispersion)
    rep = anscombe_residuals(fam, art.y, art.fit["mu_hat"], cutoff=args.cutoff)
    write_diagnostics_csv(args.out, art.t_original, art.y, art.fit["mu_hat"], rep.residuals, rep.flags)
    print(f"{rep.n_flagged} of {len(art.y)} observations flagged at |r| >= {args.cutoff:g}")
    return 0


def cmd_bench(args) -> int:
    try:
        scen = Scenario(args.family, args.testfn, args.n, args.eps, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = run_benchmark(scen, args.reps, n_jobs=args.jobs)
    with open(args.out, "w") as fh:
        fh.write(report.to_json())
    for note in report.notes:
        print(f"note: {note}")
    if args.table:
        print(format_table(report))
    failed = [e for e, k in report.failures.items() if k == report.reps]
    if failed:
        print(f"error: estimator(s) failed on every replicate: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FIT
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpdspline", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a robust spline GLM to a CSV with columns t,y")
    f.add_argument("--input", required=True)
    f.add_argument("--family", required=True, choices=["gaussian", "bernoulli", "poisson", "exponential"])
    f.add_argument("--alpha", default="auto", type=lambda v: _parse_auto(v, float))
    f.add_argument("--lambda", dest="lam", default="auto", type=lambda v: _parse_auto(v, float))
    f.add_argument("--m", type=int, default=2)
    f.add_argument("--p", type=int, default=None, help="spline order (default 2m)")
    f.add_argument("--knots", default="auto", type=lambda v: _parse_auto(v, int))
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.add_argument("--plot-data", dest="plot_data", default=None)
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("diagnose", help="Anscombe residuals and outlier flags for a fit artifact")
    d.add_argument("--fit", required=True)
    d.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_diagnose)

    b = sub.add_parser("bench", help="Monte Carlo comparison of DPD(alpha_hat), DPD(1) and GAM")
    b.add_argument("--family", required=True, choices=["gaussian", "bernoulli", "poisson"])
    b.add_argument("--testfn", default="g1", choices=["g1", "g2"])
    b.add_argument("--n", type=int, default=200)
    b.add_argument("--eps", type=float, default=0.0)
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--seed", type=int, default=1)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", required=True)
    b.add_argument("--table", action="store_true")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
