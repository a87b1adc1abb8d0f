"""Anscombe residuals and outlier flags for fitted GLM means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .exceptions import DomainError
from .families import Family

__all__ = ["ResidualReport", "incomplete_beta", "anscombe_residuals", "DEFAULT_CUTOFF"]

DEFAULT_CUTOFF = 2.6
MU_EPS = 1e-8


def _ib_lower(x, a, b):
    # int_0^x t^(a-1) (1-t)^(b-1) dt with t = s^3, which removes the t^(a-1)
    # singularity at 0 for a >= 1/3
    if x == 0.0:
        return 0.0
    upper = x ** (1.0 / 3.0)

    def f(s):
        return 3.0 * s ** (3.0 * a - 1.0) * (1.0 - s**3) ** (b - 1.0)

    val, _ = quad(f, 0.0, upper, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def incomplete_beta(x, a=2.0 / 3.0, b=2.0 / 3.0):
    """Unnormalised incomplete beta ``int_0^x t^(a-1) (1-t)^(b-1) dt``.

    Vectorised over ``x``. Near 1 the integral is computed from the
    reflection ``IB(x, a, b) = IB(1, a, b) - IB(1 - x, b, a)``.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xs)) or np.any(xs < 0.0) or np.any(xs > 1.0):
        raise DomainError("incomplete_beta needs x in [0, 1]")
    half = _ib_lower(0.5, a, b) + _ib_lower(0.5, b, a)

    def one(v):
        if v <= 0.5:
            return _ib_lower(v, a, b)
        return half - _ib_lower(1.0 - v, b, a)

    out = np.array([one(v) for v in xs.ravel()]).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


@dataclass
class ResidualReport:
    residuals: np.ndarray
    flags: np.ndarray
    cutoff: float = DEFAULT_CUTOFF

    @property
    def n_flagged(self) -> int:
        return int(self.flags.sum())


def anscombe_residuals(fam: Family, y, mu_hat, dispersion=None, cutoff=DEFAULT_CUTOFF) -> ResidualReport:
    """Variance-stabilised residuals, flagged where ``|r| >= cutoff``.

    Parameters
    ----------
    fam : Family
    y, mu_hat : array_like
        Responses and fitted means.
    dispersion : float, optional
        Gaussian variance; defaults to ``fam.dispersion``.
    cutoff : float
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu_hat, dtype=float)
    name = fam.name
    if name == "bernoulli":
        mu = np.clip(mu, MU_EPS, 1.0 - MU_EPS)
        # y is 0 or 1, so IB(y) takes only two values
        ib1 = incomplete_beta(1.0)
        ib_y = np.where(y > 0.5, ib1, 0.0)
        r = (ib_y - incomplete_beta(mu)) / (mu * (1.0 - mu)) ** (1.0 / 6.0)
    elif name == "poisson":
        mu = np.maximum(mu, MU_EPS)
        r = 1.5 * (y ** (2.0 / 3.0) - mu ** (2.0 / 3.0)) / mu ** (1.0 / 6.0)
    elif name == "gaussian":
        phi = fam.dispersion if dispersion is None else dispersion
        r = (y - mu) / np.sqrt(phi)
    elif name == "exponential":
        mu = np.maximum(mu, MU_EPS)
        r = 3.0 * (np.cbrt(y) - np.cbrt(mu)) / np.cbrt(mu)
    else:
        raise ValueError(f"no Anscombe residual for family {name!r}")
    r = np.asarray(r, dtype=float)
    return ResidualReport(r, np.abs(r) >= cutoff, float(cutoff))
