"""Hermite-function Galerkin machinery.

The basis functions are scaled harmonic-oscillator eigenfunctions

    phi_n(x) = H_n(x / scale) * exp(-x^2 / (2 scale^2)) / C_n,
    C_n = (pi * scale^2)**(1/4) * sqrt(n!) * 2**(n/2),

which are orthonormal on L^2(R).  All inner products are evaluated with
Gauss-Hermite quadrature; the node count is doubled adaptively until matrix
entries stabilise.  Everything here is pure and operates on immutable inputs,
so the module is safe for concurrent sweeps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_hermite

__all__ = [
    "HermiteBasis",
    "QuadratureRule",
    "QuadratureWarning",
    "gauss_hermite",
    "basis_eval",
    "gram_matrix",
    "position_matrix",
    "momentum_matrix",
    "multiplication_operator",
    "project_state",
    "fourier_conjugate",
    "interval_projection",
    "localized_state",
]


class QuadratureWarning(UserWarning):
    """Raised as a warning when node doubling fails to stabilise entries."""


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a Gaussian quadrature rule.

    A rule of ``order`` n integrates p(x) * w(x) exactly for polynomials p up
    to degree 2n - 1 against the generating weight w.
    """

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.nodes.size


# Weight-free Hermite rows overflow past this node count; the adaptive loops
# stop here and fall back to support-based Gauss-Legendre integration.
MAX_HERMITE_ORDER = 512


@lru_cache(maxsize=128)
def gauss_hermite(order: int) -> QuadratureRule:
    """Gauss-Hermite rule for integrals against exp(-x^2) on the real line."""
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    nodes, weights = roots_hermite(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights)


@dataclass(frozen=True)
class HermiteBasis:
    """Truncated Hermite-function basis with ``size`` functions of unit scale
    ``scale``."""

    size: int
    scale: float = 1.0

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"basis size must be >= 2, got {self.size}")
        if not self.scale > 0:
            raise ValueError(f"basis scale must be positive, got {self.scale}")

    @property
    def turning_point(self) -> float:
        """Classical extent of the highest basis function."""
        return self.scale * np.sqrt(2 * self.size + 1)

    def conjugate(self) -> "HermiteBasis":
        """Basis of the Fourier-conjugate representation (scale 1/scale)."""
        return HermiteBasis(self.size, 1.0 / self.scale)


def _hermite_rows(n_max: int, y: np.ndarray) -> np.ndarray:
    """Rows h_n(y), n < n_max, of Hermite polynomials orthonormal against
    exp(-y^2).  Three-term recurrence on the normalised functions; stable for
    n well beyond 512."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty((n_max, y.size))
    out[0] = np.pi ** (-0.25)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * y * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * y * out[n] - np.sqrt(
            n / (n + 1.0)
        ) * out[n - 1]
    return out


def _weighted_rows(n_max: int, y: np.ndarray) -> np.ndarray:
    """Rows of h_n(y) * exp(-y^2 / 2); same recurrence with the Gaussian
    absorbed so large |y| never overflows."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty((n_max, y.size))
    out[0] = np.pi ** (-0.25) * np.exp(-0.5 * y * y)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * y * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * y * out[n] - np.sqrt(
            n / (n + 1.0)
        ) * out[n - 1]
    return out


def basis_eval(n: int, basis: HermiteBasis, x) -> np.ndarray | float:
    """Evaluate phi_n at x (scalar or array)."""
    if not 0 <= n < basis.size:
        raise IndexError(f"basis index {n} out of range [0, {basis.size})")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    vals = _weighted_rows(n + 1, x.ravel() / basis.scale)[n] / np.sqrt(basis.scale)
    vals = vals.reshape(x.shape) if not scalar else vals[0]
    return vals


def basis_values(basis: HermiteBasis, x: np.ndarray) -> np.ndarray:
    """Matrix phi_n(x_j), shape (size, len(x))."""
    x = np.asarray(x, dtype=float)
    return _weighted_rows(basis.size, x / basis.scale) / np.sqrt(basis.scale)


def gram_matrix(basis: HermiteBasis, order: int | None = None) -> np.ndarray:
    """Quadrature Gram matrix of the basis; identity up to quadrature error."""
    rule = gauss_hermite(order or 2 * basis.size)
    rows = _hermite_rows(basis.size, rule.nodes)
    return (rows * rule.weights) @ rows.T


def position_matrix(basis: HermiteBasis) -> np.ndarray:
    """Galerkin matrix of multiplication by x: real symmetric tridiagonal with
    super-diagonal scale * sqrt((n+1)/2)."""
    n = np.arange(basis.size - 1)
    off = basis.scale * np.sqrt((n + 1) / 2.0)
    return np.diag(off, 1) + np.diag(off, -1)


def momentum_matrix(basis: HermiteBasis) -> np.ndarray:
    """Galerkin matrix of -i d/dx: imaginary antisymmetric tridiagonal.

    Signs are fixed so that [X, P] = i * identity on the interior block.
    """
    n = np.arange(basis.size - 1)
    off = np.sqrt((n + 1) / 2.0) / basis.scale
    return np.diag(-1j * off, 1) + np.diag(1j * off, -1)


def _poly_degree(f) -> int | None:
    """Degree of f when it advertises polynomial coefficients, else None."""
    for attr in ("coef", "coefficients"):
        c = getattr(f, attr, None)
        if c is not None:
            c = np.atleast_1d(np.asarray(c))
            nz = np.nonzero(c)[0]
            return int(nz[-1]) if nz.size else 0
    return None


def multiplication_operator(
    f: Callable,
    basis: HermiteBasis,
    quad_order: int | None = None,
    tol: float = 1e-10,
    max_doublings: int = 5,
    support: tuple[float, float] | None = None,
) -> np.ndarray:
    """Galerkin matrix f_{nm} = ∫ phi_n(x) f(x) phi_m(x) dx.

    Polynomial ``f`` (anything exposing ``coef``/``coefficients``) is
    integrated exactly in one pass.  When ``support`` is given, f is treated
    as zero (or negligible) outside that interval and the integral uses
    Gauss-Legendre nodes there, which is the right rule for functions much
    narrower than the basis scale.  Otherwise the Gauss-Hermite node count
    starts at twice the basis size and doubles until entries stabilise to
    ``tol``; a ``QuadratureWarning`` is emitted if it runs out of headroom.
    """
    n = basis.size
    if support is not None:
        return _adaptive_interval(
            lambda order: _mult_matrix_interval(f, basis, support, order),
            4 * n + 64,
            tol,
            max_doublings,
        )
    deg = _poly_degree(f)
    if quad_order is not None:
        return _mult_matrix(f, basis, quad_order)
    if deg is not None:
        return _mult_matrix(f, basis, n + deg // 2 + 1)
    order = 2 * n
    mat = _mult_matrix(f, basis, order)
    delta = np.inf
    for _ in range(max_doublings):
        if 2 * order > MAX_HERMITE_ORDER:
            break
        order *= 2
        nxt = _mult_matrix(f, basis, order)
        delta = np.max(np.abs(nxt - mat))
        mat = nxt
        if delta < tol:
            return mat
    warnings.warn(
        f"multiplication operator entries changed by {delta:.2e} at "
        f"{order} nodes; pass quad_order or support for narrow integrands",
        QuadratureWarning,
    )
    return mat


def _adaptive_interval(compute, order, tol, max_doublings):
    mat = compute(order)
    delta = np.inf
    for _ in range(max_doublings):
        order *= 2
        nxt = compute(order)
        delta = np.max(np.abs(nxt - mat))
        mat = nxt
        if delta < tol:
            return mat
    warnings.warn(
        f"interval quadrature entries changed by {delta:.2e} at {order} nodes",
        QuadratureWarning,
    )
    return mat


def _mult_matrix(f, basis, order):
    rule = gauss_hermite(order)
    rows = _hermite_rows(basis.size, rule.nodes)
    fvals = np.asarray(f(basis.scale * rule.nodes), dtype=complex)
    mat = (rows * (rule.weights * fvals)) @ rows.T
    if np.max(np.abs(mat.imag)) == 0.0:
        return mat.real.astype(complex)
    return mat


def _mult_matrix_interval(f, basis, support, order):
    lo, hi = support
    cut = basis.turning_point + 8.0 * basis.scale
    lo, hi = max(lo, -cut), min(hi, cut)
    y, w = _legendre_rule(order)
    x = 0.5 * (hi - lo) * y + 0.5 * (hi + lo)
    rows = basis_values(basis, x)
    fvals = np.asarray(f(x), dtype=complex)
    mat = 0.5 * (hi - lo) * (rows * (w * fvals)) @ rows.T
    if np.max(np.abs(mat.imag)) == 0.0:
        return mat.real.astype(complex)
    return mat


def project_state(
    psi: Callable,
    basis: HermiteBasis,
    norm: float | None = None,
    quad_order: int | None = None,
    tol: float = 1e-10,
    max_doublings: int = 5,
    support: tuple[float, float] | None = None,
):
    """Project a wave function onto the basis: c_n = ∫ phi_n(x) psi(x) dx.

    Returns ``(coeffs, leakage)`` where leakage = 1 - ||c||^2 / norm^2 when
    the L2 norm of psi is supplied, else ``(coeffs, None)``.  Without a
    ``support`` interval the substitution x = sqrt(2) * scale * y folds the
    basis Gaussian into the Gauss-Hermite weight, so psi only needs to be
    bounded; with one, Gauss-Legendre nodes on the interval are used instead
    (the accurate choice for narrow psi).
    """
    if support is not None:
        c = _adaptive_interval(
            lambda order: _project_interval(psi, basis, support, order),
            4 * basis.size + 64,
            tol,
            max_doublings,
        )
    elif quad_order is not None:
        c = _project(psi, basis, quad_order)
    else:
        order = 2 * basis.size
        c = _project(psi, basis, order)
        delta = np.inf
        converged = False
        for _ in range(max_doublings):
            if 2 * order > MAX_HERMITE_ORDER:
                break
            order *= 2
            nxt = _project(psi, basis, order)
            delta = np.max(np.abs(nxt - c))
            c = nxt
            if delta < tol:
                converged = True
                break
        if not converged:
            warnings.warn(
                f"state projection changed by {delta:.2e} at {order} nodes; "
                "pass quad_order or support for narrow states",
                QuadratureWarning,
            )
    leakage = None
    if norm is not None:
        leakage = 1.0 - float(np.vdot(c, c).real) / norm**2
    return c, leakage


def _project(psi, basis, order):
    rule = gauss_hermite(order)
    y = rule.nodes
    # phi_n(sqrt(2) s y) * exp(+y^2) = h_n(sqrt(2) y) * exp(-y^2) * exp(y^2)
    rows = _hermite_rows(basis.size, np.sqrt(2.0) * y)
    pvals = np.asarray(psi(np.sqrt(2.0) * basis.scale * y), dtype=complex)
    c = np.sqrt(2.0 * basis.scale) * (rows * rule.weights) @ pvals
    return c


def _project_interval(psi, basis, support, order):
    lo, hi = support
    cut = basis.turning_point + 8.0 * basis.scale
    lo, hi = max(lo, -cut), min(hi, cut)
    y, w = _legendre_rule(order)
    x = 0.5 * (hi - lo) * y + 0.5 * (hi + lo)
    rows = basis_values(basis, x)
    pvals = np.asarray(psi(x), dtype=complex)
    return 0.5 * (hi - lo) * (rows * w) @ pvals


def fourier_conjugate(coeffs: np.ndarray, basis: HermiteBasis, inverse: bool = True):
    """Change to the Fourier-conjugate representation.

    Hermite functions are Fourier eigenfunctions, so the transform is
    diagonal on coefficients: the inverse transform maps c_n -> (-i)^n c_n
    and the forward transform c_n -> i^n c_n, both landing on the basis with
    reciprocal scale.  Coefficient norm is preserved exactly and four forward
    applications are the identity.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape[-1] != basis.size:
        raise ValueError("coefficient length does not match basis size")
    n = np.arange(basis.size)
    phase = (-1j) ** n if inverse else 1j**n
    return coeffs * phase, basis.conjugate()


@lru_cache(maxsize=128)
def _legendre_rule(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def interval_projection(
    a: float,
    b: float,
    basis: HermiteBasis,
    quad_order: int | None = None,
    tol: float = 1e-8,
) -> np.ndarray:
    """Galerkin matrix of the indicator of [a, b]: P_{nm} = ∫_a^b phi_n phi_m.

    The integrand is smooth on the interval, so the matrix is evaluated with
    Gauss-Legendre nodes on [a, b] clipped to the numerical support of the
    basis; entries are checked by node doubling.  The result is Hermitian and
    positive semidefinite with eigenvalues <= 1 up to quadrature error; the
    idempotency defect ||P^2 - P|| is nonzero under truncation and left to the
    caller to inspect.
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    cut = basis.scale * (np.sqrt(2.0 * basis.size + 1.0) + 8.0)
    lo, hi = max(a, -cut), min(b, cut)
    if lo >= hi:
        return np.zeros((basis.size, basis.size), dtype=complex)
    order = quad_order or 4 * basis.size + 64
    mat = _interval_matrix(lo, hi, basis, order)
    check = _interval_matrix(lo, hi, basis, 2 * order)
    if np.max(np.abs(check - mat)) > tol:
        warnings.warn(
            "interval projection entries not stable under node doubling",
            QuadratureWarning,
        )
    return check.astype(complex)


def _interval_matrix(lo, hi, basis, order):
    y, w = _legendre_rule(order)
    x = 0.5 * (hi - lo) * y + 0.5 * (hi + lo)
    rows = basis_values(basis, x)
    return 0.5 * (hi - lo) * (rows * w) @ rows.T


def localized_state(basis: HermiteBasis, x0: float) -> np.ndarray:
    """Normalised coefficient vector of the best basis approximation to a
    position eigenstate at x0 (the reproducing-kernel state)."""
    v = basis_values(basis, np.array([x0]))[:, 0]
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError(f"x0={x0} is outside the numerical support of the basis")
    return (v / nrm).astype(complex)
