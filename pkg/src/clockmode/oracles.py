"""Ground-truth propagators, exact solutions and error metrics.

These are the independent references every protocol in the package is
validated against: a midpoint-rule time-ordered propagator, closed forms for
generators that commute at different times, the fidelity-loss prefactors of
the clock protocol, and the exact moments of the time-dependent
Ornstein-Uhlenbeck density.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

__all__ = [
    "PropagatorOracle",
    "ErrorConstants",
    "time_ordered_propagator",
    "commuting_exact",
    "error_constants",
    "fidelity",
    "trace_distance",
    "purity_check",
    "ou_moments",
    "gaussian_observables",
    "regularized_solution",
    "delta_profile",
    "profile_second_moment",
]


def time_ordered_propagator(h_fn: Callable, t0: float, t1: float, steps: int) -> np.ndarray:
    """Chronological propagator from t0 to t1 as a product of midpoint-rule
    exponentials; second-order accurate in the step size and exact for
    time-independent generators."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = (t1 - t0) / steps
    h0 = np.asarray(h_fn(t0 + 0.5 * dt), dtype=complex)
    u = expm(-1j * dt * h0)
    for k in range(1, steps):
        u = expm(-1j * dt * np.asarray(h_fn(t0 + (k + 0.5) * dt), dtype=complex)) @ u
    return u


def propagate_state(h_fn: Callable, y0, t0: float, t1: float, steps: int) -> np.ndarray:
    """Integrate dy/dt = -i H(t) y with classic fixed-step RK4; the
    matvec-only oracle for dimensions where propagator matrices are too
    expensive."""
    y = np.asarray(y0, dtype=complex).copy()
    dt = (t1 - t0) / steps
    rhs = lambda t, v: -1j * (np.asarray(h_fn(t)) @ v)
    for k in range(steps):
        t = t0 + k * dt
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, y + dt / 2 * k1)
        k3 = rhs(t + dt / 2, y + dt / 2 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


@dataclass(eq=False)
class PropagatorOracle:
    """Midpoint-product propagator with a fixed base step count."""

    generator: Callable[[float], np.ndarray]
    steps: int = 1000
    order: int = 2

    def __call__(self, t0: float, t1: float) -> np.ndarray:
        if t0 == t1:
            dim = np.asarray(self.generator(t0)).shape[0]
            return np.eye(dim, dtype=complex)
        return time_ordered_propagator(self.generator, t0, t1, self.steps)


def _integral(g: Callable, t0: float, t1: float) -> float:
    val, _ = quad(lambda s: np.real(g(s)), t0, t1, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def commuting_exact(h: np.ndarray, g: Callable, t: float) -> np.ndarray:
    """Exact propagator exp(-i (∫_0^t g) h) for generators H(t) = g(t) h that
    commute at different times.  Unitary when h is Hermitian."""
    h = np.asarray(h, dtype=complex)
    return expm(-1j * _integral(g, 0.0, t) * h)


@dataclass(frozen=True)
class ErrorConstants:
    """Fidelity-loss prefactors of the regularized-clock protocol.

    ``c_r`` bounds the classical quadrature error law 1 - Fid = c_r ω² and
    ``c`` the reduced-density-matrix law 1 - Fid = c ω²; always c <= c_r.
    """

    c_r: float
    c: float
    terms: dict

    def __post_init__(self):
        if self.c_r < -1e-10:
            raise ValueError(f"c_r must be nonnegative, got {self.c_r}")
        if self.c > self.c_r + 1e-10:
            raise ValueError(f"expected c <= c_r, got c={self.c}, c_r={self.c_r}")


def error_constants(h_fn: Callable, y0, t: float, steps: int = 2000) -> ErrorConstants:
    """Evaluate the protocol error prefactors for a Hermitian generator.

    Uses the midpoint propagator for the chronological evolution between the
    initial and final Hamiltonian insertions.
    """
    y0 = np.asarray(y0, dtype=complex)
    y0 = y0 / np.linalg.norm(y0)
    h_t = np.asarray(h_fn(t), dtype=complex)
    h_0 = np.asarray(h_fn(0.0), dtype=complex)
    u = time_ordered_propagator(h_fn, 0.0, t, steps)
    yt = u @ y0

    h2_t = float(np.real(yt.conj() @ (h_t @ h_t) @ yt))
    h2_0 = float(np.real(y0.conj() @ (h_0 @ h_0) @ y0))
    cross = float(np.real(yt.conj() @ h_t @ u @ (h_0 @ y0)))
    mean_t = float(np.real(yt.conj() @ h_t @ yt))
    mean_0 = float(np.real(y0.conj() @ h_0 @ y0))

    c_r = h2_t + h2_0 - 2.0 * cross
    c = c_r - (mean_t - mean_0) ** 2
    return ErrorConstants(
        c_r=max(c_r, 0.0),
        c=c,
        terms={
            "h2_final": h2_t,
            "h2_initial": h2_0,
            "cross": cross,
            "mean_final": mean_t,
            "mean_initial": mean_0,
        },
    )


def _as_density(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def purity_check(rho: np.ndarray, tol: float = 1e-9):
    """Raise if rho is not PSD with unit trace (within tol)."""
    rho = np.asarray(rho, dtype=complex)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-6:
        raise ValueError(f"density matrix trace {tr} != 1")
    evals = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
    if evals.min() < -tol:
        raise ValueError(f"density matrix has negative eigenvalue {evals.min():.3e}")


def fidelity(rho, psi, check: bool = False) -> float:
    """Fidelity <psi|rho|psi> between a state (vector or density matrix) and
    a pure reference state psi."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = rho / np.linalg.norm(rho)
        return float(np.abs(np.vdot(rho, psi)) ** 2)
    if check:
        purity_check(rho)
    return float(np.real(psi.conj() @ rho @ psi))


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of rho - sigma."""
    diff = _as_density(rho) - _as_density(sigma)
    diff = (diff + diff.conj().T) / 2.0
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


# --- delta profiles shared by the clock preparation and the classical oracle


def delta_profile(profile: str, omega: float, bias: float = 0.0) -> Callable:
    """Normalised approximate delta of width omega: 'gaussian', 'triangular'
    (1-|x|) or 'cosine' ((1+cos pi x)/2) kernels."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if profile == "gaussian":
        z = 1.0 / np.sqrt(2.0 * np.pi * omega**2)
        return lambda x: z * np.exp(-((x - bias) ** 2) / (2.0 * omega**2))
    if profile == "triangular":
        return lambda x: np.where(
            np.abs(x - bias) <= omega, (1.0 - np.abs(x - bias) / omega) / omega, 0.0
        )
    if profile == "cosine":
        return lambda x: np.where(
            np.abs(x - bias) <= omega,
            (1.0 + np.cos(np.pi * (x - bias) / omega)) / (2.0 * omega),
            0.0,
        )
    raise ValueError(f"unknown delta profile {profile!r}")


def profile_second_moment(profile: str, omega: float) -> float:
    """Exact centered second moment of the delta profile."""
    if profile == "gaussian":
        return omega**2
    if profile == "triangular":
        return omega**2 / 6.0
    if profile == "cosine":
        return omega**2 * (1.0 / 3.0 - 2.0 / np.pi**2)
    raise ValueError(f"unknown delta profile {profile!r}")


def profile_support(profile: str, omega: float, bias: float = 0.0):
    half = 12.0 * omega if profile == "gaussian" else omega
    return (bias - half, bias + half)


def regularized_solution(
    h_fn: Callable,
    y0,
    t: float,
    omega: float,
    profile: str = "gaussian",
    quad_points: int = 129,
    steps: int = 400,
    bias: float = 0.0,
) -> np.ndarray:
    """Classical width-omega regularization of the solution:
    ∫ δ_ω(s - t) U_{s, s-t} y0 ds by Gauss-Legendre quadrature over the
    profile support."""
    y0 = np.asarray(y0, dtype=complex)
    d = delta_profile(profile, omega, bias)
    lo, hi = profile_support(profile, omega, bias)
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    s_vals = t + 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    out = np.zeros_like(y0)
    for s, w in zip(s_vals, weights):
        u = time_ordered_propagator(h_fn, s - t, s, steps)
        out = out + w * d(s - t) * (u @ y0)
    return 0.5 * (hi - lo) * out


# --- Ornstein-Uhlenbeck moments for the drift-diffusion density


def ou_moments(g: Callable, beta: Callable, mu0: float, m0: float, t: float):
    """Exact mean, second moment and variance at time t of the density
    evolved by d/dt q = g(t) (x q)' + beta(t) q''.

    mu(t) = e^{-G(t)} mu0 and
    M(t) = e^{-2G(t)} M0 + e^{-2G(t)} ∫_0^t e^{2G(r)} 2 beta(r) dr
    with G(t) = ∫_0^t g.
    """
    if m0 < mu0**2:
        raise ValueError("initial second moment below mu0^2")
    big_g = _integral(g, 0.0, t)
    mu_t = np.exp(-big_g) * mu0

    def integrand(r):
        return np.exp(2.0 * _integral(g, 0.0, r)) * 2.0 * beta(r)

    inner, _ = quad(integrand, 0.0, t, epsabs=1e-12, epsrel=1e-12, limit=200)
    m_t = np.exp(-2.0 * big_g) * m0 + np.exp(-2.0 * big_g) * inner
    sigma2 = m_t - mu_t**2
    if sigma2 <= 0:
        raise ValueError(f"non-positive variance {sigma2}; invalid inputs")
    return mu_t, m_t, sigma2


def gaussian_observables(mu: float, sigma2: float):
    """Position moments of the amplitude-normalised state of a Gaussian
    density N(mu, sigma2): (<x>, <x^2>) = (mu, sigma2/2 + mu^2)."""
    if sigma2 <= 0:
        raise ValueError("variance must be positive")
    return mu, sigma2 / 2.0 + mu**2
