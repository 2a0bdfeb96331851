"""Compilers from differential-equation families to operator expressions.

Each builder returns an :class:`~clockmode.operators.OperatorExpr` whose
Hermitian split feeds the clock-dilation pipeline.  Coefficients that depend
on both time and space must be given in separable form: a number, a callable
of t alone, a ``(time_fn, {mode: space_fn})`` pair, or a list of such pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hermite import HermiteBasis, basis_values
from .operators import (
    OperatorExpr,
    Primitive,
    as_coefficient,
    finite,
    identity,
    momentum,
    momentum_power,
    multiplication,
    position,
    scale_coefficient,
    term,
)

__all__ = [
    "LinearPdeSpec",
    "SecondOrderSpec",
    "LevelSetSpec",
    "linear_pde_generator",
    "fokker_planck_generator",
    "inhomogeneous_dilation",
    "second_order_dilation",
    "nonlinear_ode_levelset",
    "hyperbolic_levelset_generator",
    "hamilton_jacobi_generator",
    "position_density",
]

_P0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
_P1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
_E01 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_E10 = _E01.T.copy()


def _separable_terms(coeff):
    """Normalise a coefficient spec to a list of (time_fn, {mode: space_fn})."""
    if isinstance(coeff, list):
        return [(as_coefficient(tf), dict(sf)) for tf, sf in coeff]
    if isinstance(coeff, tuple):
        tf, sf = coeff
        return [(as_coefficient(tf), dict(sf))]
    return [(as_coefficient(coeff), {})]


def _space_factors(space_map):
    return tuple(multiplication(mode, fn) for mode, fn in space_map.items())


def _mode_name(j: int) -> str:
    return f"x{j}"


@dataclass
class LinearPdeSpec:
    """du/dt + sum_{k,j} a_{k,j} d^k u/dx_j^k + b u = f, on D position modes.

    ``derivative_terms`` maps (k, j) to a separable coefficient; mixed
    derivatives are unsupported.  The optional source must factor as
    exp(g1(t)) * g2(x) (see :func:`inhomogeneous_dilation`).
    """

    dim: int
    derivative_terms: list = field(default_factory=list)
    potential: object = None
    source: object = None

    def modes(self):
        return tuple(_mode_name(j) for j in range(1, self.dim + 1))


def linear_pde_generator(spec: LinearPdeSpec) -> OperatorExpr:
    """Generator A with du/dt = -i A u:
    A = -sum a_{k,j}(t, x) i^{k+1} p_j^k - i b(t, x).

    Multiplication factors sit left of the momentum powers, matching the
    derivative ordering of the source equation.
    """
    if spec.dim < 1:
        raise ValueError("need at least one position mode")
    modes = spec.modes()
    terms = []
    for entry in spec.derivative_terms:
        k, j, coeff = entry
        if not 1 <= j <= spec.dim:
            raise ValueError(f"axis {j} outside 1..{spec.dim}")
        if k < 1:
            raise ValueError(f"derivative order must be >= 1, got {k}")
        for tf, sf in _separable_terms(coeff):
            factors = _space_factors(sf) + (momentum_power(_mode_name(j), k),)
            terms.append(term(scale_coefficient(tf, -((1j) ** (k + 1))), factors))
    if spec.potential is not None:
        for tf, sf in _separable_terms(spec.potential):
            factors = _space_factors(sf) or (identity(modes[0]),)
            terms.append(term(scale_coefficient(tf, -1j), factors))
    _stability_check(spec)
    return OperatorExpr(modes, tuple(terms))


def _stability_check(spec, t_samples=(0.0, 0.5, 1.0), x_samples=(-1.0, 0.0, 1.0)):
    # sign(a_{2k,j}) should be (-1)^k; advisory only
    for k, j, coeff in spec.derivative_terms:
        if k % 2:
            continue
        want = (-1.0) ** (k // 2)
        for tf, sf in _separable_terms(coeff):
            for t in t_samples:
                for x in x_samples:
                    val = complex(tf(t))
                    for fn in sf.values():
                        val *= complex(fn(x))
                    if val != 0 and np.sign(val.real) != want:
                        warnings.warn(
                            f"coefficient of order-{k} derivative on axis {j} "
                            f"has sign {np.sign(val.real)} at (t={t}, x={x}); "
                            f"expected {want} for stability",
                            UserWarning,
                        )
                        return


def fokker_planck_generator(g, beta) -> OperatorExpr:
    """Drift-diffusion generator for d_t q = g(t) (x q)' + beta(t) q''
    on the single mode "u":  A = i g - g x̂ p̂ - i beta p̂²."""
    g = as_coefficient(g)
    beta = as_coefficient(beta)
    return OperatorExpr(
        ("u",),
        (
            term(scale_coefficient(g, 1j), (identity("u"),)),
            term(scale_coefficient(g, -1.0), (position("u"), momentum("u"))),
            term(scale_coefficient(beta, -1j), (momentum_power("u", 2),)),
        ),
    )


def inhomogeneous_dilation(a_expr: OperatorExpr, g1, g1_dot, g2_state, u0):
    """Fold a separable source f(t, x) = exp(g1(t)) g2(x) into homogeneous
    dynamics on one extra qubit.

    Returns ``(expr, y0)`` where the expression acts on the original modes
    plus a mode "src" of dimension 2, realizing the block generator
    [[A, iI], [0, i dg1/dt]], and y0 = u0 ⊗ |0> + f(0) ⊗ |1>.  The |0>
    block of the homogeneous solution reproduces the inhomogeneous solution.
    """
    g1 = as_coefficient(g1)
    g1_dot = as_coefficient(g1_dot)
    g2_state = np.asarray(g2_state, dtype=complex)
    u0 = np.asarray(u0, dtype=complex)
    modes = a_expr.modes + ("src",)
    terms = [
        (coeff, factors + (finite("src", _P0),)) for coeff, factors in a_expr.terms
    ]
    terms.append(term(1j, (finite("src", _E01),)))
    terms.append(term(scale_coefficient(g1_dot, 1j), (finite("src", _P1),)))
    f0 = np.exp(complex(g1(0.0))) * g2_state
    y0 = np.kron(u0, np.array([1.0, 0.0])) + np.kron(f0, np.array([0.0, 1.0]))
    return OperatorExpr(modes, tuple(terms)), y0


@dataclass
class SecondOrderSpec:
    """u'' + Gamma(t) u' + i A(t) u = 0; the dilation doubles the system by
    one qubit tracking (u, u')."""

    stiffness: OperatorExpr
    damping: OperatorExpr | None = None


def second_order_dilation(spec: SecondOrderSpec) -> OperatorExpr:
    """First-order form on system ⊗ qubit: V = [[0, iI], [A, -i Gamma]],
    acting on y = u ⊗ |0> + u' ⊗ |1>."""
    a_expr = spec.stiffness
    modes = a_expr.modes + ("deriv",)
    terms = [term(1j, (finite("deriv", _E01),))]
    for coeff, factors in a_expr.terms:
        terms.append((coeff, factors + (finite("deriv", _E10),)))
    if spec.damping is not None:
        if spec.damping.modes != a_expr.modes:
            raise ValueError("damping must act on the stiffness modes")
        for coeff, factors in spec.damping.terms:
            terms.append(
                (scale_coefficient(coeff, -1j), factors + (finite("deriv", _P1),))
            )
    return OperatorExpr(modes, tuple(terms))


@dataclass
class LevelSetSpec:
    """Level-set liftings: nonlinear ODE right-hand sides, hyperbolic flux
    and source, or a Hamilton-Jacobi Hamiltonian, in separable form."""

    rhs: list | None = None  # nonlinear ODEs: one coefficient spec per q_n
    flux: list | None = None  # hyperbolic: one spec per axis
    source: object = None  # hyperbolic source Q
    hamiltonian: object = None  # Hamilton-Jacobi H(t, x, chi)
    dim: int = 1

    def aux_mode_count(self) -> int:
        if self.rhs is not None:
            return len(self.rhs)
        if self.flux is not None:
            return self.dim + 1
        return 2 * self.dim


def nonlinear_ode_levelset(rhs: Sequence, names: Sequence[str] | None = None) -> OperatorExpr:
    """Liouville lifting of dγ_n/dt = F_n(t, γ): the level-set density obeys
    the linear transport generator A = sum_n Q̂_n F_n(t, q̂) with Q̂_n the
    derivative (momentum) operator of auxiliary mode q_n; factor order is
    Q̂_n before F_n as in the conservative form d/dq_n (F_n ·)."""
    j = len(rhs)
    if j < 1:
        raise ValueError("need at least one auxiliary mode")
    modes = tuple(names) if names else tuple(f"q{n}" for n in range(j))
    if len(modes) != j:
        raise ValueError("one mode name per equation")
    terms = []
    for n, coeff in enumerate(rhs):
        for tf, sf in _separable_terms(coeff):
            factors = (momentum(modes[n]),) + _space_factors(sf)
            terms.append(term(tf, factors))
    return OperatorExpr(modes, tuple(terms))


def hyperbolic_levelset_generator(spec: LevelSetSpec) -> OperatorExpr:
    """Level-set lifting of a scalar conservation law with flux F_j and
    source Q on modes (x_1..x_D, chi):
    A = sum_j F_j(t, x̂, χ̂) p̂_j + Q(t, x̂, χ̂) ζ̂."""
    if spec.flux is None:
        raise ValueError("hyperbolic lifting needs flux coefficients")
    d = spec.dim
    modes = tuple(_mode_name(j) for j in range(1, d + 1)) + ("chi",)
    terms = []
    for j, coeff in enumerate(spec.flux, start=1):
        for tf, sf in _separable_terms(coeff):
            factors = _space_factors(sf) + (momentum(_mode_name(j)),)
            terms.append(term(tf, factors))
    if spec.source is not None:
        for tf, sf in _separable_terms(spec.source):
            factors = _space_factors(sf) + (momentum("chi"),)
            terms.append(term(tf, factors))
    return OperatorExpr(modes, tuple(terms))


def hamilton_jacobi_generator(spec: LevelSetSpec) -> OperatorExpr:
    """Characteristic-flow generator of a Hamilton-Jacobi equation on modes
    (x_1..x_D, chi_1..chi_D):

        H(t) = i sum_j (ζ̂_j H(t, x̂, χ̂) p̂_j - p̂_j H(t, x̂, χ̂) ζ̂_j),

    Hermitian at every sampled time; construction and split validation only,
    no simulation path."""
    if spec.hamiltonian is None:
        raise ValueError("need a Hamiltonian coefficient spec")
    d = spec.dim
    x_modes = tuple(_mode_name(j) for j in range(1, d + 1))
    chi_modes = tuple(f"chi{j}" for j in range(1, d + 1))
    terms = []
    for j in range(d):
        for tf, sf in _separable_terms(spec.hamiltonian):
            h_factors = _space_factors(sf)
            terms.append(
                term(
                    scale_coefficient(tf, 1j),
                    (momentum(chi_modes[j]),) + h_factors + (momentum(x_modes[j]),),
                )
            )
            terms.append(
                term(
                    scale_coefficient(tf, -1j),
                    (momentum(x_modes[j]),) + h_factors + (momentum(chi_modes[j]),),
                )
            )
    return OperatorExpr(x_modes + chi_modes, tuple(terms))


def position_density(rho: np.ndarray, basis: HermiteBasis, xs: np.ndarray) -> np.ndarray:
    """Diagonal of a density matrix in position space: <x|rho|x> on a grid.
    Used to read level-set characteristics off as the density argmax."""
    rows = basis_values(basis, np.asarray(xs, dtype=float))
    return np.real(np.einsum("nx,nm,mx->x", rows, rho, rows.conj()))
