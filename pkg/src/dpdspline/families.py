"""Exponential-family response distributions with canonical links.

Each family works on the canonical parameter ``theta`` (for the Gaussian,
``theta`` is the mean and the variance ``dispersion`` is held fixed). Besides
the usual ``b``, ``b'`` and ``b''`` the families provide the three moment
integrals that the density power divergence loss needs::

    i0 = int f^(1+a)
    i1 = int f^(1+a) s
    i2 = int f^(1+a) s^2

where ``s = (y - b'(theta)) / dispersion`` is the score of ``log f`` in
``theta`` (sums replace integrals for discrete responses).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit, gammaln, log_expit, xlogy

from .exceptions import DegenerateDataError, DomainError

__all__ = [
    "DpdTerms",
    "Family",
    "Gaussian",
    "Bernoulli",
    "Poisson",
    "Exponential",
    "get_family",
    "robust_scale_gaussian",
]

LOG_2PI = np.log(2.0 * np.pi)


_LOG_FACT = gammaln(np.arange(4096) + 1.0)


def _log_factorial(k):
    global _LOG_FACT
    top = int(np.max(k)) if np.size(k) else 0
    if top >= _LOG_FACT.size:
        _LOG_FACT = gammaln(np.arange(2 * top + 1) + 1.0)
    return _LOG_FACT[k]


class DpdTerms(NamedTuple):
    i0: np.ndarray
    i1: np.ndarray
    i2: np.ndarray


@dataclass(frozen=True)
class Family:
    """Base class. Subclasses fill in the distribution-specific pieces."""

    name = "family"
    discrete = False
    dispersion: float = 1.0

    # admissible canonical parameter range used by the solvers
    theta_min = -np.inf
    theta_max = np.inf

    def b(self, theta):
        raise NotImplementedError

    def b1(self, theta):
        raise NotImplementedError

    def b2(self, theta):
        raise NotImplementedError

    def b_derivatives(self, theta):
        """Return ``(b, b', b'')`` at ``theta``."""
        theta = self._check_theta(theta)
        return self.b(theta), self.b1(theta), self.b2(theta)

    def mean(self, theta):
        return self.b1(theta)

    def link(self, mu):
        """Canonical link, inverse of ``b'``."""
        raise NotImplementedError

    def score(self, y, theta):
        return (y - self.b1(theta)) / self.dispersion

    def info(self, theta):
        """Minus the second ``theta``-derivative of ``log f``."""
        return self.b2(theta) / self.dispersion

    def logpdf(self, y, theta):
        raise NotImplementedError

    def density(self, y, theta):
        y = np.asarray(y, dtype=float)
        theta = self._check_theta(theta)
        if not np.all(self.in_support(y)):
            raise DomainError(f"response outside the {self.name} support")
        return np.exp(self.logpdf(y, theta))

    def in_support(self, y):
        raise NotImplementedError

    def admissible(self, theta):
        theta = np.asarray(theta)
        return (theta > self.theta_min) & (theta < self.theta_max) & np.isfinite(theta)

    def dpd_terms(self, theta, alpha, i0_only=False) -> DpdTerms:
        """The moment integrals ``i0``, ``i1``, ``i2`` at power ``1 + alpha``.

        With ``i0_only=True`` the other two entries may be ``None``.
        """
        raise NotImplementedError

    def sample(self, theta, rng):
        raise NotImplementedError

    def _check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if not np.all(self.admissible(theta)):
            raise DomainError(f"theta outside the admissible {self.name} domain")
        return theta


def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError("dpd_terms needs alpha > 0; use the likelihood branch at alpha = 0")


@dataclass(frozen=True)
class Gaussian(Family):
    """Normal responses with mean ``theta`` and fixed variance ``dispersion``."""

    name = "gaussian"

    def __post_init__(self):
        if not self.dispersion > 0:
            raise ValueError("Gaussian dispersion must be positive")

    def b(self, theta):
        return 0.5 * theta**2

    def b1(self, theta):
        return theta

    def b2(self, theta):
        return np.ones_like(theta)

    def link(self, mu):
        return np.asarray(mu, dtype=float)

    def logpdf(self, y, theta):
        phi = self.dispersion
        return -0.5 * (LOG_2PI + np.log(phi)) - 0.5 * (y - theta) ** 2 / phi

    def in_support(self, y):
        return np.isfinite(y)

    def dpd_terms(self, theta, alpha, i0_only=False):
        _check_alpha(alpha)
        theta = np.asarray(theta, dtype=float)
        phi = self.dispersion
        # f^(1+a) is (2 pi phi)^(-a/2) (1+a)^(-1/2) times the N(theta, phi/(1+a)) density
        i0 = (2.0 * np.pi * phi) ** (-alpha / 2) / np.sqrt(1.0 + alpha)
        i0 = np.full_like(theta, i0)
        i2 = i0 / ((1.0 + alpha) * phi)
        return DpdTerms(i0, np.zeros_like(theta), i2)

    def sample(self, theta, rng):
        return rng.normal(theta, np.sqrt(self.dispersion))


@dataclass(frozen=True)
class Bernoulli(Family):
    name = "bernoulli"
    discrete = True

    def __post_init__(self):
        if self.dispersion != 1.0:
            raise ValueError("Bernoulli dispersion is fixed at 1")

    def b(self, theta):
        return np.logaddexp(0.0, theta)

    def b1(self, theta):
        return expit(theta)

    def b2(self, theta):
        p = expit(theta)
        return p * (1.0 - p)

    def link(self, mu):
        mu = np.asarray(mu, dtype=float)
        return np.log(mu) - np.log1p(-mu)

    def logpdf(self, y, theta):
        return np.where(y > 0.5, log_expit(theta), log_expit(-theta))

    def in_support(self, y):
        return (y == 0) | (y == 1)

    def dpd_terms(self, theta, alpha, i0_only=False):
        _check_alpha(alpha)
        theta = np.asarray(theta, dtype=float)
        p = expit(theta)
        q = expit(-theta)
        p1 = p ** (1.0 + alpha)
        q1 = q ** (1.0 + alpha)
        i0 = p1 + q1
        i1 = p1 * q - q1 * p
        i2 = q1 * p**2 + p1 * q**2
        return DpdTerms(i0, i1, i2)

    def sample(self, theta, rng):
        return (rng.random(np.shape(theta)) < expit(theta)).astype(float)


@dataclass(frozen=True)
class Poisson(Family):
    """Counts with rate ``exp(theta)``.

    Moment sums run over ``mu +/- (12 sqrt(mu) + 30)`` (clipped at 0), beyond
    which every term is below double-precision resolution.
    """

    name = "poisson"
    discrete = True
    # rates up to ~1.6e5 keep the summation window manageable
    theta_min = -30.0
    theta_max = 12.0

    def __post_init__(self):
        if self.dispersion != 1.0:
            raise ValueError("Poisson dispersion is fixed at 1")

    def b(self, theta):
        return np.exp(theta)

    def b1(self, theta):
        return np.exp(theta)

    def b2(self, theta):
        return np.exp(theta)

    def link(self, mu):
        return np.log(np.asarray(mu, dtype=float))

    def logpdf(self, y, theta):
        return xlogy(y, np.exp(theta)) - np.exp(theta) - gammaln(y + 1.0)

    def in_support(self, y):
        return (y >= 0) & (np.floor(y) == y) & np.isfinite(y)

    @staticmethod
    def window(mu):
        """Summation range ``[lo, hi]`` of counts per rate."""
        mu = np.asarray(mu, dtype=float)
        half = np.ceil(12.0 * np.sqrt(mu) + 30.0)
        lo = np.maximum(0.0, np.floor(mu) - half)
        hi = np.ceil(mu) + half
        return lo, hi

    def dpd_terms(self, theta, alpha, i0_only=False):
        _check_alpha(alpha)
        theta = np.asarray(theta, dtype=float)
        shape = theta.shape
        theta = theta.ravel()
        mu = np.exp(theta)
        lo, hi = self.window(mu)
        width = int(np.max(hi - lo)) + 1 if theta.size else 1
        yi = lo.astype(np.int64)[:, None] + np.arange(width)[None, :]
        y = yi.astype(float)
        logf = y * theta[:, None] - mu[:, None] - _log_factorial(yi)
        f1 = np.exp((1.0 + alpha) * logf)
        i0 = f1.sum(axis=1).reshape(shape)
        if i0_only:
            return DpdTerms(i0, None, None)
        u = y - mu[:, None]
        fu = f1 * u
        i1 = fu.sum(axis=1)
        i2 = (fu * u).sum(axis=1)
        return DpdTerms(i0, i1.reshape(shape), i2.reshape(shape))

    def sample(self, theta, rng):
        return np.asarray(rng.poisson(np.exp(theta)), dtype=float)


@dataclass(frozen=True)
class Exponential(Family):
    """Exponential responses with rate ``-theta`` (``theta < 0``)."""

    name = "exponential"
    theta_max = 0.0

    def __post_init__(self):
        if self.dispersion != 1.0:
            raise ValueError("Exponential dispersion is fixed at 1")

    def b(self, theta):
        return -np.log(-theta)

    def b1(self, theta):
        return -1.0 / theta

    def b2(self, theta):
        return 1.0 / theta**2

    def link(self, mu):
        return -1.0 / np.asarray(mu, dtype=float)

    def logpdf(self, y, theta):
        return y * theta + np.log(-theta)

    def in_support(self, y):
        return (y > 0) & np.isfinite(y)

    def dpd_terms(self, theta, alpha, i0_only=False):
        _check_alpha(alpha)
        rate = -np.asarray(theta, dtype=float)
        a1 = 1.0 + alpha
        i0 = rate**alpha / a1
        i1 = -alpha * rate ** (alpha - 1.0) / a1**2
        i2 = (1.0 + alpha**2) / a1**3 * rate ** (alpha - 2.0)
        return DpdTerms(i0, i1, i2)

    def sample(self, theta, rng):
        return rng.exponential(-1.0 / np.asarray(theta, dtype=float))


_FAMILIES = {
    "gaussian": Gaussian,
    "bernoulli": Bernoulli,
    "poisson": Poisson,
    "exponential": Exponential,
}


def get_family(name: str, dispersion: float = 1.0) -> Family:
    """Look up a family by name (case-insensitive)."""
    try:
        cls = _FAMILIES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(_FAMILIES)}") from None
    if cls is Gaussian:
        return cls(dispersion)
    return cls()


def robust_scale_gaussian(y) -> float:
    """Difference-based resistant variance estimate.

    ``y`` must be ordered by the covariate. Uses the MAD of successive
    differences, ``(1.4826 * median|y[i+1] - y[i]| / sqrt(2)) ** 2``.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        raise DegenerateDataError("need at least 3 observations for a scale estimate")
    d = np.abs(np.diff(y))
    phi = (1.4826 * np.median(d) / np.sqrt(2.0)) ** 2
    if not phi > 0:
        raise DegenerateDataError("robust scale is zero: more than half the successive differences vanish")
    return float(phi)
