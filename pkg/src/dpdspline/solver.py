"""Penalized IRWLS / Newton solver for the density power divergence spline fit.

For fixed ``alpha`` and ``lam`` the solver minimises::

    sum_i l_alpha(y_i, B_i @ coefs) + lam * coefs @ P @ coefs

by repeatedly solving ``(B' W B + 2 lam P) coefs_new = B' W z`` with step
halving on the objective. The loss is non-convex for ``alpha > 0``, so
negative Newton weights fall back to their Fisher (expected) counterparts
whenever the system stops being positive definite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import median_filter

from .basis import SplineBasis
from .exceptions import BadInitError, SingularSystemError
from .families import Family, Gaussian, robust_scale_gaussian
from .loss import WEIGHT_EPS, loss, loss_value, penalized_objective

__all__ = [
    "SolverOptions",
    "FitResult",
    "fit",
    "initialize",
    "initial_candidates",
    "fit_alpha_path",
    "effective_df",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 100
    tol_coef: float = 1e-8
    tol_obj: float = 1e-10
    max_halvings: int = 30
    ridge: float = 1e-10
    gtol: float = 1e-6

    def __post_init__(self):
        for name in ("max_iter", "tol_coef", "tol_obj", "max_halvings", "ridge", "gtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SolverOptions.{name} must be positive")


@dataclass
class FitResult:
    """Outcome of a single fit at fixed ``alpha`` and ``lam``."""

    coefs: np.ndarray
    alpha: float
    lam: float
    theta_hat: np.ndarray
    mu_hat: np.ndarray
    objective: float
    edf: float
    iterations: int
    converged: bool
    mode_used: str
    grad_norm: float = np.nan
    trace: list = field(default_factory=list)
    ridge_used: bool = False


def _newton_direction(basis, BtWB, grad, lam, w_newton, w_fisher, ridge, first="newton"):
    """Solve for the step; falls back from Newton to Fisher weights.

    Returns ``(direction, mode, ridge_used)``.
    """
    tries = [(first, w_newton)]
    neg = w_newton < 0
    if np.any(neg):
        tries.append(("mixed", np.where(neg, w_fisher, w_newton)))
    tries.append(("fisher", w_fisher))
    for mode, w in tries:
        try:
            return -basis.solve_penalized(BtWB(w), lam, grad), mode, False
        except np.linalg.LinAlgError:
            continue
    M = BtWB(w_fisher)
    jitter = ridge * max(1.0, np.abs(np.diag(M)).max(), 2.0 * lam * basis.pen_eig.max())
    try:
        return -basis.solve_penalized(M, lam, grad, jitter), "fisher", True
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("penalized IRWLS system is singular after ridge jitter") from exc


def _fisher_weights(fam, alpha, theta, terms=None):
    if alpha == 0:
        return fam.info(theta) * np.ones_like(theta)
    if terms is None:
        terms = fam.dpd_terms(theta, alpha)
    return (1.0 + alpha) * terms.i2


def fit(y, basis: SplineBasis, fam: Family, alpha: float, lam: float, init=None,
        opts: SolverOptions | None = None, mode="newton") -> FitResult:
    """Minimise the penalized DPD objective at fixed ``alpha`` and ``lam``.

    Parameters
    ----------
    y : array_like, shape (n,)
    basis : SplineBasis
    fam : Family
    alpha : float
        Robustness parameter, ``alpha >= 0``.
    lam : float
        Penalty parameter on the unnormalised-sum scale.
    init : array_like, optional
        Starting coefficients. Defaults to :func:`initialize`.
    opts : SolverOptions, optional
    mode : {'newton', 'fisher'}
        Weight type tried first at every iteration.

    Returns
    -------
    FitResult
        The best-objective iterate.
    """
    opts = opts or SolverOptions()
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    y = np.asarray(y, dtype=float)
    B = basis.B
    if init is None:
        init = initialize(y, basis, fam, alpha, lam, opts)
    beta = np.array(init, dtype=float)
    if beta.shape != (basis.dim,) or not np.all(np.isfinite(beta)):
        raise BadInitError("initial coefficients must be a finite vector of length K + p")
    obj = penalized_objective(beta, basis, fam, alpha, lam, y)
    if not np.isfinite(obj):
        raise BadInitError("objective is not finite at the initial coefficients")

    def BtWB(w):
        return B.T @ (B * w[:, None])

    trace = [obj]
    modes = set()
    ridge_used = False
    converged = False
    it = 0
    gnorm = np.inf
    for it in range(1, opts.max_iter + 1):
        theta = B @ beta
        terms = fam.dpd_terms(theta, alpha) if alpha > 0 else None
        ev = loss(fam, alpha, y, theta, terms)
        grad = B.T @ ev.grad + 2.0 * lam * basis.penalty_grad(beta)
        gnorm = float(np.max(np.abs(grad)))
        w_f = _fisher_weights(fam, alpha, theta, terms)
        w_n = ev.hess.copy() if mode == "newton" else w_f
        small = np.abs(w_n) < WEIGHT_EPS
        w_n[small] = w_f[small]

        accepted = False
        for attempt in ("first", "fisher"):
            if attempt == "first":
                d, used, ridged = _newton_direction(basis, BtWB, grad, lam, w_n, w_f, opts.ridge,
                                                    first=mode)
            else:
                if used == "fisher":
                    break
                d, used, ridged = _newton_direction(basis, BtWB, grad, lam, w_f, w_f, opts.ridge,
                                                    first="fisher")
            step = 1.0
            for _ in range(opts.max_halvings + 1):
                cand = beta + step * d
                cand_obj = penalized_objective(cand, basis, fam, alpha, lam, y)
                if cand_obj <= obj:
                    accepted = True
                    break
                step *= 0.5
            if accepted:
                break
        if not accepted:
            # no descent possible along either direction: stationary up to roundoff
            converged = gnorm <= opts.gtol * (1.0 + abs(obj))
            it -= 1
            break
        modes.add(used)
        ridge_used |= ridged
        dbeta = cand - beta
        dobj = obj - cand_obj
        beta, obj = cand, cand_obj
        trace.append(obj)
        small_coef = np.linalg.norm(dbeta) <= opts.tol_coef * (1.0 + np.linalg.norm(beta))
        small_obj = dobj <= opts.tol_obj * (1.0 + abs(obj))
        if small_coef or small_obj:
            theta = B @ beta
            grad = B.T @ loss(fam, alpha, y, theta).grad + 2.0 * lam * basis.penalty_grad(beta)
            gnorm = float(np.max(np.abs(grad)))
            if gnorm <= opts.gtol * (1.0 + abs(obj)) or small_coef:
                converged = gnorm <= opts.gtol * (1.0 + abs(obj))
                break

    if not converged:
        log.debug("fit did not converge (alpha=%g, lam=%g, |grad|=%g)", alpha, lam, gnorm)
    if len(modes) > 1:
        mode_used = "mixed"
    elif modes:
        mode_used = modes.pop()
    else:
        mode_used = mode
    theta = B @ beta
    res = FitResult(
        coefs=beta,
        alpha=float(alpha),
        lam=float(lam),
        theta_hat=theta,
        mu_hat=fam.mean(theta),
        objective=float(obj),
        edf=np.nan,
        iterations=it,
        converged=bool(converged),
        mode_used=mode_used,
        grad_norm=gnorm,
        trace=trace,
        ridge_used=ridge_used,
    )
    res.edf = effective_df(basis, fam, alpha, lam, res, y)
    return res


def _hessian_blocks(basis, fam, alpha, lam, fitres, y):
    ev = loss(fam, alpha, y, fitres.theta_hat)
    B = basis.B
    BDB = B.T @ (B * ev.hess[:, None])
    return ev, BDB


def _solve_pd(basis, M, lam, rhs, ridge):
    """Solve ``(M + 2 lam P) x = rhs``; adds diagonal jitter if not positive definite.

    Returns ``(x, jittered)``.
    """
    try:
        return basis.solve_penalized(M, lam, rhs), False
    except np.linalg.LinAlgError:
        pass
    A = basis.rotated_system(M, lam)
    A = A + ridge * max(1.0, np.abs(np.diag(A)).max()) * np.eye(A.shape[0])
    r = basis.U.T @ rhs
    try:
        x = np.linalg.solve(A, r)
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(A, r, rcond=None)[0]
    return basis.U @ x, True


def effective_df(basis: SplineBasis, fam: Family, alpha: float, lam: float, fitres: FitResult,
                 y=None, ridge=1e-10) -> float:
    """``trace(inv(B' D B + 2 lam P) @ B' D B)`` with ``D`` the loss Hessians at the fit."""
    if y is None:
        raise ValueError("effective_df needs the response vector")
    y = np.asarray(y, dtype=float)
    _, BDB = _hessian_blocks(basis, fam, alpha, lam, fitres, y)
    S, ridged = _solve_pd(basis, BDB, lam, BDB, ridge)
    if ridged:
        fitres.ridge_used = True
    return float(np.trace(S))


def _running_median(y, t, window=7):
    order = np.argsort(t, kind="stable")
    med = np.empty_like(y)
    med[order] = median_filter(y[order], size=window, mode="nearest")
    return med


def _clamp_mean(fam, mu):
    name = fam.name
    if name == "bernoulli":
        return np.clip(mu, 0.01, 0.99)
    if name == "poisson":
        return np.maximum(mu, 0.1)
    if name == "exponential":
        return np.maximum(mu, 1e-3)
    return mu


def _winsorize(fam, y, t):
    med = _running_median(y, t)
    if fam.name == "gaussian":
        order = np.argsort(t, kind="stable")
        try:
            s = np.sqrt(robust_scale_gaussian(y[order]))
        except ValueError:
            s = np.sqrt(fam.dispersion)
        return np.clip(y, med - 3 * s, med + 3 * s)
    if fam.name == "poisson":
        mu = np.maximum(med, 0.1)
        sd = np.sqrt(mu)
        return np.round(np.clip(y, np.maximum(mu - 3 * sd, 0.0), mu + 3 * sd))
    if fam.name == "exponential":
        mu = np.maximum(med, 1e-3)
        return np.clip(y, 1e-3 * mu, 4.0 * mu)
    return y


def initial_candidates(y, basis: SplineBasis, fam: Family, lam: float,
                       opts: SolverOptions | None = None) -> list[np.ndarray]:
    """The two starting points used by :func:`initialize`.

    The first is a likelihood fit to winsorized responses, the second a
    penalized least-squares spline through the link-transformed running
    median of ``y``.
    """
    opts = opts or SolverOptions()
    y = np.asarray(y, dtype=float)
    t = basis.t
    B = basis.B
    mu = _clamp_mean(fam, _running_median(y, t))
    z = fam.link(mu)
    start_med = basis.solve_penalized(B.T @ B, 0.5 * lam, B.T @ z, ridge=1e-8)

    ywin = _winsorize(fam, y, t)
    try:
        start_lik = fit(ywin, basis, fam, 0.0, lam, init=start_med, opts=opts).coefs
    except (BadInitError, SingularSystemError):
        start_lik = start_med
    return [start_lik, start_med]


def initialize(y, basis: SplineBasis, fam: Family, alpha: float = 0.0, lam: float = 1.0,
               opts: SolverOptions | None = None, candidates=None) -> np.ndarray:
    """Pick the dual start with the lower objective at the target ``(alpha, lam)``."""
    y = np.asarray(y, dtype=float)
    if candidates is None:
        candidates = initial_candidates(y, basis, fam, lam, opts)
    objs = [penalized_objective(c, basis, fam, alpha, lam, y) for c in candidates]
    return np.array(candidates[int(np.argmin(objs))], dtype=float)


def best_fit(y, basis, fam, alpha, lam, starts, opts=None, mode="newton") -> FitResult:
    """Fit from every start and keep the lowest objective."""
    best = None
    err = None
    for s in starts:
        if s is None:
            continue
        try:
            r = fit(y, basis, fam, alpha, lam, init=s, opts=opts, mode=mode)
        except (BadInitError, SingularSystemError) as exc:
            err = exc
            continue
        if best is None or r.objective < best.objective:
            best = r
    if best is None:
        raise err if err is not None else BadInitError("no usable start")
    return best


def fit_alpha_path(y, basis: SplineBasis, fam: Family, alphas, lam: float,
                   opts: SolverOptions | None = None) -> list:
    """Fit along an ascending ``alpha`` grid.

    Each grid point starts both from the previous solution and from
    :func:`initialize`; the lower objective wins. Failed grid points yield the
    raised exception in place of a :class:`FitResult` and the path continues.
    """
    alphas = np.asarray(alphas, dtype=float)
    if np.any(np.diff(alphas) < 0):
        raise ValueError("alpha grid must be ascending")
    y = np.asarray(y, dtype=float)
    cands = initial_candidates(y, basis, fam, lam, opts)
    out = []
    prev = None
    for a in alphas:
        starts = [initialize(y, basis, fam, a, lam, opts, cands)]
        if prev is not None:
            starts.insert(0, prev)
        try:
            r = best_fit(y, basis, fam, a, lam, starts, opts)
        except (BadInitError, SingularSystemError) as exc:
            out.append(exc)
            continue
        out.append(r)
        prev = r.coefs
    return out
