"""Sums of tensor-product operator terms with time-dependent coefficients.

An :class:`OperatorExpr` is a list of terms ``coeff(t) * F1 F2 ...`` where
each factor is a primitive operator tagged with a mode name.  Factors on
different modes combine by Kronecker product in the declared mode order;
several factors on the same mode multiply left-to-right as operators (so
``[position, momentum]`` on one mode is x̂p̂).  Coefficients are callables of
time, evaluated with numpy-array arguments; ``numpy.polynomial.Polynomial``
instances additionally expose their coefficient list, which downstream code
uses to integrate functions of the clock operator exactly.

Everything is immutable and pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .hermite import (
    HermiteBasis,
    momentum_matrix,
    multiplication_operator,
    position_matrix,
)

__all__ = [
    "Primitive",
    "OperatorExpr",
    "Generator",
    "identity",
    "position",
    "momentum",
    "position_power",
    "momentum_power",
    "multiplication",
    "finite",
    "term",
    "adjoint",
    "materialize",
    "compile_terms",
    "hermitian_split",
    "split_generator",
    "as_coefficient",
    "conj_coefficient",
]

ModeBasis = HermiteBasis | int

_KINDS = {
    "identity",
    "position",
    "momentum",
    "position_power",
    "momentum_power",
    "multiplication",
    "matrix",
}


@dataclass(frozen=True, eq=False)
class Primitive:
    """One operator factor acting on a named mode."""

    kind: str
    mode: str
    power: int = 1
    func: Callable | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if self.kind in ("position_power", "momentum_power") and self.power < 1:
            raise ValueError("operator power must be a positive integer")


def identity(mode: str) -> Primitive:
    return Primitive("identity", mode)


def position(mode: str) -> Primitive:
    return Primitive("position", mode)


def momentum(mode: str) -> Primitive:
    return Primitive("momentum", mode)


def position_power(mode: str, k: int) -> Primitive:
    return Primitive("position" if k == 1 else "position_power", mode, power=k)


def momentum_power(mode: str, k: int) -> Primitive:
    return Primitive("momentum" if k == 1 else "momentum_power", mode, power=k)


def multiplication(mode: str, f: Callable) -> Primitive:
    return Primitive("multiplication", mode, func=f)


def finite(mode: str, m) -> Primitive:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"finite-mode operator must be square, got {m.shape}")
    return Primitive("matrix", mode, matrix=m)


def as_coefficient(c) -> Callable:
    """Coerce a number or callable into a coefficient function of t."""
    if callable(c):
        return c
    return Polynomial([complex(c)])


def conj_coefficient(c) -> Callable:
    """Pointwise complex conjugate of a coefficient, keeping polynomial
    structure visible when present."""
    coef = getattr(c, "coef", None)
    if coef is not None:
        return Polynomial(np.conjugate(np.atleast_1d(coef)))
    return lambda t, _c=c: np.conjugate(_c(t))


def scale_coefficient(c, z) -> Callable:
    coef = getattr(c, "coef", None)
    if coef is not None:
        return Polynomial(z * np.atleast_1d(coef))
    return lambda t, _c=c: z * np.asarray(_c(t))


def term(coeff, factors: Sequence[Primitive]):
    return (as_coefficient(coeff), tuple(factors))


@dataclass(frozen=True, eq=False)
class OperatorExpr:
    """Symbolic sum of tensor-product terms over an ordered list of modes."""

    modes: tuple[str, ...]
    terms: tuple[tuple[Callable, tuple[Primitive, ...]], ...]

    def __post_init__(self):
        declared = set(self.modes)
        if len(declared) != len(self.modes):
            raise ValueError("duplicate mode names")
        for _, factors in self.terms:
            for f in factors:
                if f.mode not in declared:
                    raise ValueError(f"factor on undeclared mode {f.mode!r}")

    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        if other.modes != self.modes:
            raise ValueError("can only add expressions over the same modes")
        return OperatorExpr(self.modes, self.terms + other.terms)

    def __mul__(self, z):
        scaled = tuple(
            (scale_coefficient(c, complex(z)), f) for c, f in self.terms
        )
        return OperatorExpr(self.modes, scaled)

    __rmul__ = __mul__


def expr(modes: Sequence[str], terms_) -> OperatorExpr:
    """Build an OperatorExpr from (coeff, factors) pairs."""
    return OperatorExpr(
        tuple(modes), tuple(term(c, f) for c, f in terms_)
    )


def adjoint(e: OperatorExpr) -> OperatorExpr:
    """Formal adjoint: conjugated coefficients, reversed factor products,
    adjointed primitives.  ``materialize(adjoint(e), .., t)`` equals the
    conjugate transpose of ``materialize(e, .., t)`` for every t."""
    out = []
    for coeff, factors in e.terms:
        out.append(
            (conj_coefficient(coeff), tuple(_primitive_adjoint(f) for f in reversed(factors)))
        )
    return OperatorExpr(e.modes, tuple(out))


def _primitive_adjoint(p: Primitive) -> Primitive:
    if p.kind == "multiplication":
        return Primitive(p.kind, p.mode, func=lambda x, _f=p.func: np.conjugate(_f(x)))
    if p.kind == "matrix":
        return Primitive(p.kind, p.mode, matrix=p.matrix.conj().T)
    # identity, position, momentum and their powers are self-adjoint
    return p


def primitive_matrix(p: Primitive, basis: ModeBasis) -> np.ndarray:
    """Realize a primitive on a mode basis (HermiteBasis or finite dim)."""
    if isinstance(basis, (int, np.integer)):
        dim = int(basis)
        if p.kind == "identity":
            return np.eye(dim, dtype=complex)
        if p.kind == "matrix":
            if p.matrix.shape[0] != dim:
                raise ValueError(
                    f"matrix on mode {p.mode!r} is {p.matrix.shape[0]}-dim, "
                    f"mode declared {dim}-dim"
                )
            return p.matrix
        raise ValueError(
            f"primitive {p.kind!r} needs a Hermite basis on mode {p.mode!r}"
        )
    if p.kind == "identity":
        return np.eye(basis.size, dtype=complex)
    if p.kind == "position":
        return position_matrix(basis).astype(complex)
    if p.kind == "momentum":
        return momentum_matrix(basis)
    if p.kind == "position_power":
        return multiplication_operator(
            Polynomial.basis(p.power), basis
        )
    if p.kind == "momentum_power":
        return _momentum_power_matrix(basis, p.power)
    if p.kind == "multiplication":
        return multiplication_operator(p.func, basis)
    if p.kind == "matrix":
        if p.matrix.shape[0] != basis.size:
            raise ValueError("matrix dimension does not match basis size")
        return p.matrix
    raise AssertionError(p.kind)


def _momentum_power_matrix(basis: HermiteBasis, k: int) -> np.ndarray:
    # Exact Galerkin matrix of p̂^k via the Fourier-conjugate representation,
    # where p̂ acts as (minus the) position operator; variationally consistent
    # with the position powers, unlike powers of the truncated momentum.
    n = np.arange(basis.size)
    t_fwd = 1j**n
    x_pow = multiplication_operator(Polynomial.basis(k), basis.conjugate())
    mat = (-1.0) ** k * (t_fwd.conj()[:, None] * x_pow * t_fwd[None, :])
    return mat


def _mode_bases(modes, bases: Mapping[str, ModeBasis]):
    try:
        return [bases[m] for m in modes]
    except KeyError as exc:
        raise KeyError(f"no basis given for mode {exc.args[0]!r}") from None


def _basis_dim(b: ModeBasis) -> int:
    return int(b) if isinstance(b, (int, np.integer)) else b.size


def compile_terms(e: OperatorExpr, bases: Mapping[str, ModeBasis]):
    """Materialize the time-independent factor of every term.

    Returns ``(terms, dim)`` where terms is a list of ``(coeff, matrix)``
    with the matrix assembled over the declared mode order.  The expression
    value at time t is ``sum(c(t) * M for c, M in terms)``.
    """
    blist = _mode_bases(e.modes, bases)
    dims = [_basis_dim(b) for b in blist]
    compiled = []
    for coeff, factors in e.terms:
        per_mode = {}
        for f in factors:
            m = primitive_matrix(f, bases[f.mode])
            per_mode[f.mode] = per_mode[f.mode] @ m if f.mode in per_mode else m
        full = np.ones((1, 1), dtype=complex)
        for name, b, d in zip(e.modes, blist, dims):
            full = np.kron(full, per_mode.get(name, np.eye(d, dtype=complex)))
        compiled.append((coeff, full))
    return compiled, int(np.prod(dims))


def materialize(e: OperatorExpr, bases: Mapping[str, ModeBasis], t: float) -> np.ndarray:
    """Evaluate the expression as a dense matrix at time t."""
    compiled, dim = compile_terms(e, bases)
    return _eval_terms(compiled, dim, t)


def _eval_terms(compiled, dim, t):
    out = np.zeros((dim, dim), dtype=complex)
    for coeff, mat in compiled:
        out += complex(coeff(t)) * mat
    return out


def hermitian_split(a: np.ndarray):
    """Split A = A1 - i A2 into its Hermitian parts
    A1 = (A + A†)/2 and A2 = i(A - A†)/2."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    adag = a.conj().T
    return (a + adag) / 2.0, 0.5j * (a - adag)


@dataclass(eq=False)
class Generator:
    """Time-indexed Hermitian pair (a1, a2) with A(t) = a1(t) - i a2(t).

    ``terms`` holds the separable form sum_k c_k(t) M_k when available, which
    clock dilation needs to substitute t -> clock operator.
    """

    dim: int
    a1: Callable[[float], np.ndarray]
    a2: Callable[[float], np.ndarray]
    terms: list | None = None
    source: OperatorExpr | None = field(default=None, repr=False)

    def full(self, t: float) -> np.ndarray:
        return self.a1(t) - 1j * self.a2(t)

    @classmethod
    def from_terms(cls, terms, dim, source=None):
        terms = [(as_coefficient(c), np.asarray(m, dtype=complex)) for c, m in terms]

        def a1(t):
            out = np.zeros((dim, dim), dtype=complex)
            for c, m in terms:
                z = complex(c(t))
                out += (z * m + np.conjugate(z) * m.conj().T) / 2.0
            return out

        def a2(t):
            out = np.zeros((dim, dim), dtype=complex)
            for c, m in terms:
                z = complex(c(t))
                out += 0.5j * (z * m - np.conjugate(z) * m.conj().T)
            return out

        return cls(dim=dim, a1=a1, a2=a2, terms=terms, source=source)

    @classmethod
    def from_provider(cls, a_of_t: Callable[[float], np.ndarray], dim: int):
        """Generator from a pointwise matrix function; no separable structure,
        so only grid clocks can dilate it."""

        def a1(t):
            return hermitian_split(a_of_t(t))[0]

        def a2(t):
            return hermitian_split(a_of_t(t))[1]

        return cls(dim=dim, a1=a1, a2=a2, terms=None)


def split_generator(e: OperatorExpr, bases: Mapping[str, ModeBasis]) -> Generator:
    """Compile an expression and split it numerically into Hermitian parts."""
    compiled, dim = compile_terms(e, bases)
    return Generator.from_terms(compiled, dim, source=e)
