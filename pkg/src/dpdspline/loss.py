"""Density power divergence loss, its derivatives, and the penalized objective.

For ``alpha > 0`` the per-observation loss is::

    l(y, theta) = i0(theta) - (1 + 1/alpha) f_theta(y)^alpha

and at ``alpha = 0`` it is the negative log-likelihood. All functions are
vectorised over observations.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .families import Family

__all__ = [
    "LossEval",
    "IrlsStepData",
    "loss",
    "loss_value",
    "penalized_objective",
    "penalized_gradient",
    "irls_step_data",
]

WEIGHT_EPS = 1e-12


class LossEval(NamedTuple):
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


class IrlsStepData(NamedTuple):
    w: np.ndarray
    z: np.ndarray
    mode: str
    # Newton weights with |w| < 1e-12; these carry Fisher weights instead
    degenerate: np.ndarray


def loss_value(fam: Family, alpha: float, y, theta) -> np.ndarray:
    """Loss values only; cheaper than :func:`loss` inside line searches."""
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    logf = fam.logpdf(y, theta)
    if alpha == 0:
        return -logf
    i0 = fam.dpd_terms(theta, alpha, i0_only=True).i0
    return i0 - (1.0 + 1.0 / alpha) * np.exp(alpha * logf)


def loss(fam: Family, alpha: float, y, theta, terms=None) -> LossEval:
    """Loss value with first and second ``theta``-derivatives.

    ``terms`` may carry precomputed :class:`DpdTerms` at ``theta``.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    logf = fam.logpdf(y, theta)
    s = fam.score(y, theta)
    v = fam.info(theta)
    if alpha == 0:
        return LossEval(-logf, -s, v * np.ones_like(s))
    i0, i1, i2 = fam.dpd_terms(theta, alpha) if terms is None else terms
    fa = np.exp(alpha * logf)
    a1 = 1.0 + alpha
    value = i0 - (1.0 + 1.0 / alpha) * fa
    grad = a1 * (i1 - fa * s)
    hess = a1 * (a1 * i2 - v * i0 + v * fa - alpha * fa * s**2)
    return LossEval(value, grad, hess)


def penalized_objective(coefs, basis, fam: Family, alpha: float, lam: float, y) -> float:
    """``sum_i l(y_i, B_i @ coefs) + lam * coefs @ P @ coefs``.

    Returns ``inf`` when any fitted ``theta`` leaves the family's domain.
    """
    coefs = np.asarray(coefs, dtype=float)
    theta = basis.B @ coefs
    if not np.all(fam.admissible(theta)):
        return np.inf
    val = float(np.sum(loss_value(fam, alpha, y, theta)))
    return val + lam * basis.penalty(coefs)


def penalized_gradient(coefs, basis, fam: Family, alpha: float, lam: float, y) -> np.ndarray:
    """Gradient of :func:`penalized_objective` with respect to ``coefs``."""
    coefs = np.asarray(coefs, dtype=float)
    theta = basis.B @ coefs
    g = loss(fam, alpha, y, theta).grad
    return basis.B.T @ g + 2.0 * lam * basis.penalty_grad(coefs)


def irls_step_data(fam: Family, alpha: float, y, g, mode="newton") -> IrlsStepData:
    """Weights and working responses for one penalized IRWLS update.

    ``mode='newton'`` uses the observed second derivative of the loss as the
    weight, ``mode='fisher'`` its expectation ``(1 + alpha) * i2``. In both
    modes ``w * (z - g) == -grad``.
    """
    if mode not in ("newton", "fisher"):
        raise ValueError("mode must be 'newton' or 'fisher'")
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    ev = loss(fam, alpha, y, g)
    if alpha == 0:
        fisher = fam.info(g) * np.ones_like(g)
    else:
        fisher = (1.0 + alpha) * fam.dpd_terms(g, alpha).i2
    if mode == "fisher":
        w = fisher
        degenerate = np.zeros(g.shape, dtype=bool)
    else:
        w = ev.hess.copy()
        degenerate = np.abs(w) < WEIGHT_EPS
        w[degenerate] = fisher[degenerate]
    z = g - ev.grad / w
    return IrlsStepData(w, z, mode, degenerate)
