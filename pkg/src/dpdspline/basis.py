"""B-spline bases on [0, 1] with exact Gram and roughness-penalty matrices.

Splines are parameterised by their *order* ``p`` (degree ``p - 1``). A basis
over ``K`` interior knots has dimension ``K + p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import DomainError, InvalidDesignError, InvalidOrderError

__all__ = [
    "KnotVector",
    "SplineBasis",
    "build_knots",
    "eval_basis",
    "design_matrix",
    "assemble",
    "difference_penalty",
    "reproducing_kernel",
]


@dataclass(frozen=True)
class KnotVector:
    """Interior knots plus ``p``-fold replicated boundary knots at 0 and 1."""

    interior: np.ndarray
    order: int

    def __post_init__(self):
        interior = np.asarray(self.interior, dtype=float).ravel()
        if self.order < 2:
            raise InvalidOrderError(f"spline order must be >= 2, got {self.order}")
        if interior.size and (interior[0] <= 0.0 or interior[-1] >= 1.0):
            raise InvalidDesignError("interior knots must lie strictly inside (0, 1)")
        if np.any(np.diff(interior) <= 0):
            raise InvalidDesignError("interior knots must be strictly ascending")
        interior.setflags(write=False)
        object.__setattr__(self, "interior", interior)

    @property
    def n_interior(self) -> int:
        return self.interior.size

    @property
    def dim(self) -> int:
        return self.interior.size + self.order

    @property
    def full(self) -> np.ndarray:
        p = self.order
        return np.concatenate([np.zeros(p), self.interior, np.ones(p)])

    @property
    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[0.0], self.interior, [1.0]])


def build_knots(t, p=4, m=2, strategy="thinned", K=None) -> KnotVector:
    """Choose interior knots for design points ``t`` in [0, 1].

    Parameters
    ----------
    t : array_like
        Design points in [0, 1]. Need not be sorted or distinct.
    p : int
        Spline order.
    m : int
        Penalty order, ``1 <= m < p``. Drives the thinned knot count.
    strategy : {'all-points', 'thinned', 'explicit-K', 'auto'}
        ``'all-points'`` puts a knot at every distinct design point that lies
        strictly inside (0, 1). ``'thinned'`` uses
        ``max(ceil(n ** (1 / (2m + 1))), 10)`` equidistant knots, capped at the
        number of distinct design points. ``'explicit-K'`` uses ``K``
        equidistant knots. ``'auto'`` is ``'all-points'`` for ``n <= 50`` and
        ``'thinned'`` otherwise.
    K : int, optional
        Knot count for ``'explicit-K'``.

    Returns
    -------
    KnotVector
    """
    t = np.asarray(t, dtype=float).ravel()
    n = t.size
    if not 1 <= m < p:
        raise InvalidOrderError(f"need 1 <= m < p, got m={m}, p={p}")
    if n < p:
        raise InvalidDesignError(f"need at least p={p} design points, got {n}")
    if not np.all(np.isfinite(t)) or t.min() < 0.0 or t.max() > 1.0:
        raise InvalidDesignError("design points must lie in [0, 1]")
    distinct = np.unique(t)
    if distinct.size < p:
        raise InvalidDesignError(
            f"only {distinct.size} distinct design points, need at least p={p}"
        )

    if strategy == "auto":
        strategy = "all-points" if n <= 50 else "thinned"
    if strategy == "all-points":
        interior = distinct[(distinct > 0.0) & (distinct < 1.0)]
    elif strategy == "thinned":
        k = max(math.ceil(n ** (1.0 / (2 * m + 1))), 10)
        k = min(k, distinct.size)
        interior = _equidistant(k)
    elif strategy == "explicit-K":
        if K is None or K < 0:
            raise InvalidDesignError("explicit-K strategy needs a non-negative K")
        interior = _equidistant(int(K))
    else:
        raise ValueError(f"unknown knot strategy {strategy!r}")
    return KnotVector(interior, p)


def _equidistant(k):
    return np.arange(1, k + 1) / (k + 1.0)


def _find_span(knots, order, x):
    # index j with knots[j] <= x < knots[j + 1]; right boundary folds into the last span
    dim = knots.size - order
    span = np.searchsorted(knots, x, side="right") - 1
    return np.clip(span, order - 1, dim - 1)


def _basis_and_derivs(knots, order, x, nderiv):
    """Nonzero basis values and derivatives at points ``x``.

    Returns ``(span, vals)`` with ``vals`` of shape ``(nderiv + 1, len(x), order)``
    holding derivatives ``0..nderiv`` of ``B_{span-order+1} .. B_{span}``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    npts = x.size
    deg = order - 1
    span = _find_span(knots, order, x)

    # ndu[j, r] holds basis values of degree j in the upper triangle and
    # knot differences in the lower triangle.
    ndu = np.zeros((order, order, npts))
    ndu[0, 0] = 1.0
    left = np.zeros((order, npts))
    right = np.zeros((order, npts))
    for j in range(1, order):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    out = np.zeros((nderiv + 1, npts, order))
    for j in range(order):
        out[0, :, j] = ndu[j, deg]
    if nderiv == 0:
        return span, out

    a = np.zeros((2, order, npts))
    for r in range(order):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, nderiv + 1):
            d = np.zeros(npts)
            rk = r - k
            pk = deg - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else deg - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            out[k, :, r] = d
            s1, s2 = s2, s1
    factor = float(deg)
    for k in range(1, nderiv + 1):
        out[k] *= factor
        factor *= deg - k
    return span, out


def eval_basis(kv: KnotVector, t, deriv=0) -> np.ndarray:
    """Evaluate ``d^deriv/dt^deriv B_j(t)`` for all basis functions.

    Returns an array of shape ``(K + p,)`` for scalar ``t`` and
    ``(len(t), K + p)`` otherwise. At most ``p`` entries per row are nonzero.
    """
    scalar = np.ndim(t) == 0
    x = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("evaluation points must lie in [0, 1]")
    if not 0 <= deriv < kv.order:
        raise InvalidOrderError(f"derivative order must be in [0, {kv.order - 1}]")
    span, vals = _basis_and_derivs(kv.full, kv.order, x, deriv)
    out = np.zeros((x.size, kv.dim))
    cols = span[:, None] - kv.order + 1 + np.arange(kv.order)
    np.put_along_axis(out, cols, vals[deriv], axis=1)
    return out[0] if scalar else out


def design_matrix(kv: KnotVector, t, deriv=0) -> np.ndarray:
    """``B[i, j] = B_j^{(deriv)}(t_i)`` as a dense ``(n, K + p)`` array."""
    return np.atleast_2d(eval_basis(kv, np.atleast_1d(t), deriv))


def _gram(kv: KnotVector, deriv: int) -> np.ndarray:
    # Integrands are piecewise polynomials of degree <= 2(p - 1 - deriv), so
    # p-point Gauss-Legendre per knot interval is exact.
    nodes, weights = np.polynomial.legendre.leggauss(kv.order)
    brk = kv.breakpoints
    a, b = brk[:-1], brk[1:]
    half = 0.5 * (b - a)
    x = (0.5 * (a + b))[:, None] + half[:, None] * nodes[None, :]
    w = half[:, None] * weights[None, :]
    Bq = design_matrix(kv, x.ravel(), deriv)
    return Bq.T @ (Bq * w.ravel()[:, None])


def difference_penalty(dim: int, m: int) -> np.ndarray:
    """Return ``D.T @ D`` for the ``m``-th order difference operator ``D``.

    ``D`` has shape ``(dim - m, dim)``; the result is PSD with rank
    ``dim - m`` and annihilates polynomial sequences of degree below ``m``.
    """
    if m < 0 or dim <= m:
        raise InvalidOrderError(f"need dim > m >= 0, got dim={dim}, m={m}")
    D = np.diff(np.eye(dim), n=m, axis=0)
    return D.T @ D


@dataclass(frozen=True)
class SplineBasis:
    """A knot vector evaluated at a design, with its Gram and penalty matrices.

    Attributes
    ----------
    knots : KnotVector
    m : int
        Penalty (derivative) order.
    t : ndarray, shape (n,)
        Design points.
    B : ndarray, shape (n, K + p)
        Design matrix.
    H : ndarray, shape (K + p, K + p)
        Gram matrix of the basis in L2[0, 1].
    P : ndarray, shape (K + p, K + p)
        Gram matrix of the ``m``-th derivatives.
    U : ndarray, shape (K + p, K + p)
        Orthogonal eigenvectors of ``P``; the first ``m`` columns span its
        null space (polynomials of degree below ``m``).
    pen_eig : ndarray, shape (K + p,)
        Eigenvalues of ``P`` in the order of ``U``, with the first ``m`` set to
        exactly zero. Penalized systems are solved in these coordinates so that
        roundoff in ``P`` never penalizes the null space, however large ``lam``.
    """

    knots: KnotVector
    m: int
    t: np.ndarray
    B: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    pen_eig: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.knots.dim

    @property
    def order(self) -> int:
        return self.knots.order

    def evaluate(self, x, deriv=0) -> np.ndarray:
        return design_matrix(self.knots, x, deriv)

    def with_design(self, t) -> "SplineBasis":
        """Same knots and matrices, new design points."""
        t = np.asarray(t, dtype=float).ravel()
        return SplineBasis(self.knots, self.m, t, design_matrix(self.knots, t), self.H, self.P,
                           self.U, self.pen_eig)

    def penalty(self, coefs) -> float:
        """``coefs @ P @ coefs`` evaluated in the eigenbasis."""
        c = self.U.T @ coefs
        return float(np.sum(self.pen_eig * c * c))

    def penalty_grad(self, coefs) -> np.ndarray:
        """``P @ coefs`` evaluated in the eigenbasis."""
        return self.U @ (self.pen_eig * (self.U.T @ coefs))

    def solve_penalized(self, M, lam, rhs, ridge=0.0):
        """Solve ``(M + 2 lam P + ridge I) x = rhs`` in the eigenbasis of ``P``.

        Raises ``numpy.linalg.LinAlgError`` if the system is not positive
        definite.
        """
        A = self.rotated_system(M, lam, ridge)
        L = np.linalg.cholesky(A)
        r = self.U.T @ rhs
        x = solve_triangular(L.T, solve_triangular(L, r, lower=True), lower=False)
        return self.U @ x

    def rotated_system(self, M, lam, ridge=0.0):
        """``U.T @ (M + 2 lam P) @ U + ridge I`` with the exact null space."""
        A = self.U.T @ M @ self.U
        A = 0.5 * (A + A.T)
        A[np.diag_indices_from(A)] += 2.0 * lam * self.pen_eig + ridge
        return A


def assemble(kv: KnotVector, t, m: int) -> SplineBasis:
    """Evaluate the basis at ``t`` and compute the exact ``H`` and ``P``."""
    if not 1 <= m < kv.order:
        raise InvalidOrderError(f"need 1 <= m < p, got m={m}, p={kv.order}")
    t = np.asarray(t, dtype=float).ravel()
    B = design_matrix(kv, t)
    H = _gram(kv, 0)
    P = _gram(kv, m)
    H = 0.5 * (H + H.T)
    P = 0.5 * (P + P.T)
    eig, U = np.linalg.eigh(P)
    eig[:m] = 0.0
    eig = np.maximum(eig, 0.0)
    for arr in (t, B, H, P, U, eig):
        arr.setflags(write=False)
    return SplineBasis(kv, m, t, B, H, P, U, eig)


def reproducing_kernel(basis: SplineBasis, lam: float, x, y) -> np.ndarray:
    """``B(x).T @ inv(H + lam * P) @ B(y)`` on the spline space.

    Scalars in, scalar out; arrays give the ``(len(x), len(y))`` kernel matrix.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    L = np.linalg.cholesky(basis.H + lam * basis.P)
    # whitening both sides keeps R(x, y) and R(y, x) bitwise equal
    Wx = solve_triangular(L, design_matrix(basis.knots, x).T, lower=True)
    Wy = solve_triangular(L, design_matrix(basis.knots, y).T, lower=True)
    K = Wx.T @ Wy
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(K[0, 0])
    return K
