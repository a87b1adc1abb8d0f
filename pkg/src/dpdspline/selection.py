"""Data-driven choice of the penalty ``lam`` (AIC) and robustness ``alpha`` (AMISE)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import SplineBasis
from .exceptions import BadInitError, SelectionFailedError, SingularSystemError
from .families import Family
from .loss import loss, loss_value
from .solver import (FitResult, SolverOptions, _solve_pd, best_fit, fit, initial_candidates,
                     initialize)

__all__ = [
    "SelectionReport",
    "default_alpha_grid",
    "default_lambda_grid",
    "aic",
    "amise",
    "select_lambda",
    "select_alpha",
]

MAX_PILOT_ITER = 10


def default_alpha_grid(size=20) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


def default_lambda_grid(n, size=40) -> np.ndarray:
    """Log-spaced penalties spanning ``[1e-6 n, 1e3 n]``."""
    return np.logspace(-6, 3, size) * n


@dataclass
class SelectionReport:
    alpha_hat: float
    lambda_hat_per_alpha: dict
    amise_curve: dict
    pilot_trace: list
    aic_curves: dict
    fit: FitResult = field(repr=False, default=None)
    fits: dict = field(repr=False, default_factory=dict)
    iterations: int = 0


def aic(fitres: FitResult, y, fam: Family) -> float:
    """``2 sum_i l(y_i, theta_i) + 2 edf``."""
    val = np.sum(loss_value(fam, fitres.alpha, y, fitres.theta_hat))
    return float(2.0 * val + 2.0 * fitres.edf)


def amise(fit_a: FitResult, pilot: FitResult, basis: SplineBasis, fam: Family, y,
          ridge=1e-10, parts=False):
    """Plug-in integrated squared bias plus sandwich variance of ``fit_a``.

    The bias is measured against ``pilot`` in the ``H`` metric. With
    ``parts=True`` returns ``(bias, variance)``.
    """
    y = np.asarray(y, dtype=float)
    diff = fit_a.coefs - pilot.coefs
    bias = float(diff @ basis.H @ diff)
    ev = loss(fam, fit_a.alpha, y, fit_a.theta_hat)
    B = basis.B
    D = B.T @ (B * ev.hess[:, None])
    M = B.T @ (B * (ev.grad**2)[:, None])
    Ainv_M, r1 = _solve_pd(basis, D, fit_a.lam, M, ridge)
    # cov = A^-1 M A^-1 with A = D + 2 lam P
    cov, r2 = _solve_pd(basis, D, fit_a.lam, Ainv_M.T, ridge)
    if r1 or r2:
        fit_a.ridge_used = True
    var = float(np.trace(basis.H @ cov))
    if parts:
        return bias, var
    return bias + var


def select_lambda(y, basis: SplineBasis, fam: Family, alpha: float, lambdas=None,
                  opts: SolverOptions | None = None, init=None, return_fits=False):
    """Minimise AIC over an ascending ``lam`` grid with warm starts.

    Returns ``(lam_hat, aic_curve)`` where ``aic_curve`` maps each successful
    ``lam`` to its AIC; with ``return_fits=True`` a third element maps ``lam``
    to its :class:`FitResult`.
    """
    y = np.asarray(y, dtype=float)
    if lambdas is None:
        lambdas = default_lambda_grid(y.size)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) < 0):
        raise ValueError("lambda grid must be positive and ascending")
    curve = {}
    fits = {}
    prev = None
    for lam in lambdas:
        if prev is None:
            starts = [init] if init is not None else [initialize(y, basis, fam, alpha, lam, opts)]
        else:
            starts = [prev]
        try:
            r = best_fit(y, basis, fam, alpha, lam, starts, opts)
        except (BadInitError, SingularSystemError):
            continue
        if not np.isfinite(r.objective) or not np.isfinite(r.edf):
            continue
        curve[float(lam)] = aic(r, y, fam)
        fits[float(lam)] = r
        prev = r.coefs
    if not curve:
        raise SelectionFailedError(f"every lambda fit failed at alpha={alpha:g}")
    lam_hat = min(curve, key=curve.get)
    if return_fits:
        return lam_hat, curve, fits
    return lam_hat, curve


def _argmin_ties_high(curve):
    vals = np.array(list(curve.values()))
    keys = np.array(list(curve.keys()))
    best = vals.min()
    tied = keys[vals <= best]
    return float(tied.max())


def select_alpha(y, basis: SplineBasis, fam: Family, alphas=None, lambdas=None,
                 opts: SolverOptions | None = None) -> SelectionReport:
    """Iterated AMISE selection of ``alpha`` with AIC-selected ``lam`` per ``alpha``.

    The first pilot is the fit at the largest grid value (``alpha = 1`` on the
    default grid). Each round replaces the pilot by the AMISE minimiser and
    stops once the minimiser repeats.
    """
    y = np.asarray(y, dtype=float)
    alphas = default_alpha_grid() if alphas is None else np.asarray(alphas, dtype=float)
    if np.any(np.diff(alphas) < 0):
        raise ValueError("alpha grid must be ascending")
    if lambdas is None:
        lambdas = default_lambda_grid(y.size)
    lambdas = np.asarray(lambdas, dtype=float)

    cands = initial_candidates(y, basis, fam, float(lambdas[0]), opts)
    lam_hat = {}
    aic_curves = {}
    fits = {}
    prev_first = None
    for a in alphas:
        a = float(a)
        starts = [initialize(y, basis, fam, a, float(lambdas[0]), opts, cands)]
        if prev_first is not None:
            starts.insert(0, prev_first)
        try:
            first = best_fit(y, basis, fam, a, float(lambdas[0]), starts, opts)
            init = first.coefs
        except (BadInitError, SingularSystemError):
            init = starts[-1]
        try:
            lh, curve, lfits = select_lambda(y, basis, fam, a, lambdas, opts, init=init,
                                             return_fits=True)
        except SelectionFailedError:
            continue
        prev_first = init
        lam_hat[a] = lh
        aic_curves[a] = curve
        fits[a] = lfits[lh]
    if not fits:
        raise SelectionFailedError("all fits on the alpha grid failed")

    pilot_alpha = max(fits)
    pilot_trace = [pilot_alpha]
    curve = {}
    current = None
    n_iter = 0
    seen = []
    for n_iter in range(1, MAX_PILOT_ITER + 1):
        pilot = fits[pilot_alpha]
        curve = {a: amise(f, pilot, basis, fam, y) for a, f in fits.items()}
        current = _argmin_ties_high(curve)
        if current == pilot_alpha or current in seen:
            break
        seen.append(pilot_alpha)
        pilot_alpha = current
        pilot_trace.append(pilot_alpha)
    return SelectionReport(
        alpha_hat=current,
        lambda_hat_per_alpha=lam_hat,
        amise_curve=curve,
        pilot_trace=pilot_trace,
        aic_curves=aic_curves,
        fit=fits[current],
        fits=fits,
        iterations=n_iter,
    )
