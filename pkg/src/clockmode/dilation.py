"""Clock-register dilation of time-dependent generators.

Builds the time-independent operator  H̄ = 1 ⊗ P_clock + H(clock position)
on an extra clock mode, prepares regularized clock states, evolves, and
recovers the system state by tracing out or measuring the clock.  The clock
mode is either a Hermite-function basis (continuous-variable flavour) or a
uniform periodic grid with upwind or Fourier-spectral momentum (qubit
flavour).

All assembled systems are immutable; evolution and traces are pure
functions, so ensemble members and sweep points can run concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal, expm

from .hermite import (
    HermiteBasis,
    localized_state,
    momentum_matrix,
    multiplication_operator,
    position_matrix,
    project_state,
)
from .operators import Generator, as_coefficient
from .oracles import delta_profile, profile_second_moment, profile_support

__all__ = [
    "GalerkinClock",
    "GridClock",
    "ClockState",
    "PreparedClock",
    "DilatedSystem",
    "UnderResolvedClockError",
    "auto_window",
    "prepare_clock",
    "upwind_momentum",
    "spectral_momentum",
    "build_dilated",
    "evolve",
    "evolve_times",
    "partial_trace",
    "trace_out_clock",
    "measure_clock_at",
    "commuting_protocol",
    "qubit_count",
]

DENSE_CAP = 16384
# auto method switches to Krylov well before the dense cap, purely for speed
AUTO_DENSE_LIMIT = 4096


class UnderResolvedClockError(ValueError):
    """Clock profile narrower than what the chosen representation resolves."""


@dataclass(frozen=True)
class GalerkinClock:
    """Continuous clock projected on a Hermite-function basis."""

    basis: HermiteBasis

    @classmethod
    def sized(cls, size: int, scale: float) -> "GalerkinClock":
        return cls(HermiteBasis(size, scale))

    @property
    def dim(self) -> int:
        return self.basis.size

    @property
    def resolution(self) -> float:
        # narrowest representable feature ~ scale / sqrt(size)
        return self.basis.scale / np.sqrt(self.basis.size)


@dataclass(frozen=True)
class GridClock:
    """Uniform periodic clock grid with nodes s_{-n/2} < ... < s_{n/2}."""

    n: int
    window: tuple[float, float] = (-0.5, 0.5)
    scheme: str = "spectral"

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError(f"grid size must be even and >= 2, got {self.n}")
        if self.scheme not in ("spectral", "upwind"):
            raise ValueError(f"unknown momentum scheme {self.scheme!r}")
        lo, hi = self.window
        if not lo < hi:
            raise ValueError(f"empty clock window {self.window}")

    @property
    def ds(self) -> float:
        lo, hi = self.window
        return (hi - lo) / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        lo, hi = self.window
        center = 0.5 * (lo + hi)
        return center + np.arange(-self.n // 2, self.n // 2 + 1) * self.ds

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def resolution(self) -> float:
        return self.ds


ClockSpec = GalerkinClock | GridClock


def auto_window(t_final: float, omega: float, pad: float = 4.0):
    """Clock window covering the whole protocol: [-pad ω, T + pad ω]."""
    margin = pad * omega
    return (-margin, max(t_final, 0.0) + margin)


@dataclass(frozen=True)
class ClockState:
    """Specification of the initial clock register state."""

    kind: str  # sqrt_delta | mixed_delta | uniform | custom
    profile: str = "gaussian"
    omega: float | None = None
    bias: float = 0.0
    data: object = None

    @classmethod
    def sqrt_delta(cls, omega, profile="gaussian", bias=0.0):
        return cls("sqrt_delta", profile, omega, bias)

    @classmethod
    def mixed_delta(cls, omega, profile="gaussian", bias=0.0):
        return cls("mixed_delta", profile, omega, bias)

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @classmethod
    def custom(cls, data):
        return cls("custom", data=data)


@dataclass
class PreparedClock:
    """Realized clock state: pure amplitudes, a diagonal weight vector over
    grid nodes, or a density matrix on the Galerkin basis; plus the realized
    first and second profile moments about the intended center."""

    kind: str
    vector: np.ndarray | None = None
    weights: np.ndarray | None = None
    density: np.ndarray | None = None
    mean: float = 0.0
    second_moment: float = 0.0
    leakage: float | None = None
    under_resolved: bool = False

    def members(self):
        """Ensemble of (weight, pure clock vector) realizing the state."""
        if self.vector is not None:
            return [(1.0, self.vector)]
        if self.weights is not None:
            dim = self.weights.size
            return [
                (float(w), _unit(dim, i))
                for i, w in enumerate(self.weights)
                if w > 1e-15
            ]
        evals, evecs = np.linalg.eigh(self.density)
        return [
            (float(w), evecs[:, i]) for i, w in enumerate(evals) if w > 1e-12
        ]


def _unit(dim, i):
    v = np.zeros(dim, dtype=complex)
    v[i] = 1.0
    return v


def prepare_clock(
    clock: ClockSpec,
    state: ClockState,
    center: float = 0.0,
    strict: bool = False,
) -> PreparedClock:
    """Realize a clock state on the chosen representation.

    Pure sqrt-delta states get amplitudes proportional to sqrt(δ_ω); mixed
    diagonal states get node weights δ_ω(s_i) Δs (grid) or the
    quadrature-projected diagonal density (Galerkin).  Profiles narrower than
    the representation's resolution are flagged ``under_resolved`` (warning
    by default, UnderResolvedClockError with strict=True).
    """
    if state.kind == "uniform":
        return _prepare_uniform(clock)
    if state.kind == "custom":
        return _prepare_custom(clock, state.data)
    if state.omega is None or state.omega <= 0:
        raise ValueError("delta clock states need a positive omega")

    omega = state.omega
    under = omega < clock.resolution
    if under:
        msg = (
            f"clock width omega={omega} below representation resolution "
            f"{clock.resolution:.4g}"
        )
        if strict:
            raise UnderResolvedClockError(msg)
        warnings.warn(msg, UserWarning)

    mu = center + state.bias
    prof = delta_profile(state.profile, omega, bias=mu)
    if isinstance(clock, GridClock):
        return _prepare_grid_delta(clock, state, prof, mu, center, under)
    return _prepare_galerkin_delta(clock, state, prof, mu, center, under)


def _prepare_uniform(clock):
    if isinstance(clock, GridClock):
        w = np.full(clock.dim, 1.0 / clock.dim)
        s = clock.nodes
        return PreparedClock(
            "uniform",
            weights=w,
            mean=float(w @ s),
            second_moment=float(w @ s**2),
        )
    n = clock.dim
    rho = np.eye(n, dtype=complex) / n
    x = position_matrix(clock.basis)
    return PreparedClock(
        "uniform",
        density=rho,
        mean=float(np.trace(rho @ x).real),
        second_moment=float(np.trace(rho @ x @ x).real),
    )


def _prepare_custom(clock, data):
    arr = np.asarray(data)
    if arr.ndim == 1:
        v = arr.astype(complex)
        v = v / np.linalg.norm(v)
        return PreparedClock("custom", vector=v, **_vector_moments(clock, v, 0.0))
    rho = arr.astype(complex)
    rho = rho / np.trace(rho).real
    return PreparedClock("custom", density=rho, **_density_moments(clock, rho, 0.0))


def _vector_moments(clock, v, center):
    if isinstance(clock, GridClock):
        p = np.abs(v) ** 2
        s = clock.nodes - center
        return {"mean": float(p @ s), "second_moment": float(p @ s**2)}
    x = position_matrix(clock.basis) - center * np.eye(clock.dim)
    return {
        "mean": float(np.real(v.conj() @ x @ v)),
        "second_moment": float(np.real(v.conj() @ x @ x @ v)),
    }


def _density_moments(clock, rho, center):
    if isinstance(clock, GridClock):
        p = np.diag(rho).real
        s = clock.nodes - center
        return {"mean": float(p @ s), "second_moment": float(p @ s**2)}
    x = position_matrix(clock.basis) - center * np.eye(clock.dim)
    return {
        "mean": float(np.trace(rho @ x).real),
        "second_moment": float(np.trace(rho @ x @ x).real),
    }


def _prepare_grid_delta(clock, state, prof, mu, center, under):
    s = clock.nodes
    vals = np.asarray(prof(s), dtype=float)
    if not np.any(vals > 0):
        raise UnderResolvedClockError(
            "clock profile support contains no grid node"
        )
    if state.kind == "sqrt_delta":
        amps = np.sqrt(vals).astype(complex)
        amps /= np.linalg.norm(amps)
        out = PreparedClock("sqrt_delta", vector=amps, under_resolved=under)
        out.__dict__.update(_vector_moments(clock, amps, center))
        return out
    w = vals * clock.ds
    w = w / w.sum()
    out = PreparedClock("mixed_delta", weights=w, under_resolved=under)
    p = w
    sc = s - center
    out.mean = float(p @ sc)
    out.second_moment = float(p @ sc**2)
    return out


def _prepare_galerkin_delta(clock, state, prof, mu, center, under):
    basis = clock.basis
    omega = state.omega
    support = profile_support(state.profile, omega, bias=mu)
    if state.kind == "sqrt_delta":
        amp = lambda s: np.sqrt(np.maximum(prof(s), 0.0))
        c, leak = project_state(amp, basis, norm=1.0, support=support)
        c = c / np.linalg.norm(c)
        out = PreparedClock(
            "sqrt_delta", vector=c, leakage=leak, under_resolved=under
        )
        out.__dict__.update(_vector_moments(clock, c, center))
        return out
    rho = multiplication_operator(prof, basis, support=support)
    tr = np.trace(rho).real
    if tr <= 0:
        raise UnderResolvedClockError("projected clock density has no mass")
    rho = rho / tr
    rho = (rho + rho.conj().T) / 2.0
    out = PreparedClock(
        "mixed_delta", density=rho, leakage=1.0 - tr, under_resolved=under
    )
    out.__dict__.update(_density_moments(clock, rho, center))
    return out


# --- discrete clock momentum realizations


def upwind_momentum(n_nodes: int, ds: float) -> np.ndarray:
    """-i times the first-order upwind difference with periodic wrap;
    sparsity 2 per row, non-Hermitian (dissipative)."""
    d = (np.eye(n_nodes) - np.roll(np.eye(n_nodes), 1, axis=1).T) / ds
    return -1j * d


def spectral_momentum(n_nodes: int, ds: float) -> np.ndarray:
    """Hermitian Fourier-spectral realization of -i d/ds on the periodic
    grid; exact on resolvable plane waves."""
    f = np.fft.fft(np.eye(n_nodes)) / np.sqrt(n_nodes)
    k = 2.0 * np.pi * np.fft.fftfreq(n_nodes, d=ds)
    p = f.conj().T @ (k[:, None] * f)
    return (p + p.conj().T) / 2.0


def clock_momentum(clock: ClockSpec) -> np.ndarray:
    if isinstance(clock, GalerkinClock):
        return momentum_matrix(clock.basis)
    if clock.scheme == "upwind":
        return upwind_momentum(clock.dim, clock.ds)
    return spectral_momentum(clock.dim, clock.ds)


# --- assembly


def _sparsify(mat, tol=1e-14) -> sp.csr_matrix:
    if sp.issparse(mat):
        m = mat.tocsr().copy()
    else:
        m = sp.csr_matrix(np.asarray(mat, dtype=complex))
    if m.nnz:
        cutoff = tol * max(np.abs(m.data).max(), 1.0)
        m.data[np.abs(m.data) < cutoff] = 0.0
        m.eliminate_zeros()
    return m


class DilatedSystem:
    """Assembled time-independent dilation with its tensor layout.

    ``dims``/``labels`` follow the canonical order (warp?, system, clock);
    the clock is always the last axis.
    """

    def __init__(self, matrix, dims, labels, clock, dense_cap=DENSE_CAP):
        self.matrix = matrix.tocsr()
        self.dims = tuple(int(d) for d in dims)
        self.labels = tuple(labels)
        self.clock = clock
        self.dense_cap = dense_cap
        if int(np.prod(self.dims)) != self.matrix.shape[0]:
            raise ValueError("layout dims do not multiply to matrix dimension")
        diff = (self.matrix - self.matrix.conj().T).tocoo()
        nrm = sp.linalg.norm(self.matrix)
        self.hermitian_defect = sp.linalg.norm(diff) / nrm if nrm else 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def dense(self) -> np.ndarray:
        if self.dim > self.dense_cap:
            raise ValueError(
                f"dimension {self.dim} above dense cap {self.dense_cap}"
            )
        return self.matrix.toarray()

    @cached_property
    def eigensystem(self):
        if self.hermitian_defect > 1e-12:
            raise ValueError(
                f"dense eigensolve needs a Hermitian matrix "
                f"(defect {self.hermitian_defect:.2e})"
            )
        return np.linalg.eigh(self.dense)

    def qubit_counts(self):
        return {lab: qubit_count(d) for lab, d in zip(self.labels, self.dims)}


def qubit_count(dim: int) -> int:
    return int(np.ceil(np.log2(dim)))


def _galerkin_lambda(coeff, basis):
    return multiplication_operator(as_coefficient(coeff), basis)


def build_dilated(
    gen: Generator,
    clock: ClockSpec,
    warp=None,
    dense_cap: int = DENSE_CAP,
    zero_negative_times: bool = True,
    hermitian_tol: float = 1e-10,
) -> DilatedSystem:
    """Assemble H̄ = 1 ⊗ P_clock + H(clock position).

    Without a warp mode the generator must be Hermitian-valued (checked at
    sample times).  With one, the non-unitary generator is extended first:
    H(t) = freq ⊗ A2(t) + 1 ⊗ A1(t) on warp ⊗ system, and the clock
    substitution happens term by term.  Galerkin clocks require the separable
    ``gen.terms`` form; grid clocks accept any pointwise generator and zero
    the generator at negative clock nodes (the initial-value convention for
    discrete clocks) unless told otherwise.
    """
    if isinstance(clock, GalerkinClock):
        if gen.terms is None:
            raise ValueError(
                "Galerkin clocks need a generator in separable form "
                "(sum of coeff(t) * matrix terms)"
            )
        return _build_galerkin(gen, clock, warp, dense_cap, hermitian_tol)
    return _build_grid(
        gen, clock, warp, dense_cap, zero_negative_times, hermitian_tol
    )


def _check_hermitian_samples(gen, tol, times=(0.0, 0.37, 1.0)):
    for t in times:
        a2 = gen.a2(t)
        scale = max(np.abs(gen.a1(t)).max(), np.abs(a2).max(), 1.0)
        if np.abs(a2).max() > tol * scale:
            raise ValueError(
                "generator is not Hermitian-valued; extend it with a warp "
                "mode before dilation"
            )


def _build_galerkin(gen, clock, warp, dense_cap, hermitian_tol):
    basis = clock.basis
    nc = basis.size
    p_clock = _sparsify(momentum_matrix(basis))
    d = gen.dim
    if warp is None:
        _check_hermitian_samples(gen, hermitian_tol)
        dims = (d, nc)
        labels = ("system", "clock")
        h = sp.kron(sp.identity(d, format="csr"), p_clock, format="csr")
        for coeff, m in gen.terms:
            lam = _sparsify(_galerkin_lambda(coeff, basis))
            h = h + sp.kron(_sparsify(m), lam, format="csr")
    else:
        nw = warp.basis.size
        freq = _sparsify(warp.frequency_matrix())
        eye_w = sp.identity(nw, format="csr")
        dims = (nw, d, nc)
        labels = ("warp", "system", "clock")
        h = sp.kron(
            sp.identity(nw * d, format="csr"), p_clock, format="csr"
        )
        for coeff, m in gen.terms:
            ms = _sparsify(m)
            msd = _sparsify(m.conj().T)
            lam = _sparsify(_galerkin_lambda(coeff, basis))
            lamd = _sparsify(lam.conj().T)
            # freq ⊗ A2-part + 1 ⊗ A1-part, term by term
            h = h + sp.kron(0.5j * sp.kron(freq, ms), lam)
            h = h + sp.kron(-0.5j * sp.kron(freq, msd), lamd)
            h = h + sp.kron(0.5 * sp.kron(eye_w, ms), lam)
            h = h + sp.kron(0.5 * sp.kron(eye_w, msd), lamd)
    return DilatedSystem(_sparsify(h), dims, labels, clock, dense_cap)


def _build_grid(gen, clock, warp, dense_cap, zero_negative, hermitian_tol):
    nodes = clock.nodes
    nc = nodes.size
    p_clock = _sparsify(clock_momentum(clock))
    d = gen.dim
    if warp is None:
        _check_hermitian_samples(gen, hermitian_tol)
        block = lambda s: gen.a1(s)
        left_dim = d
        dims = (d, nc)
        labels = ("system", "clock")
    else:
        freq = warp.frequency_matrix()
        eye_w = np.eye(warp.basis.size)
        block = lambda s: np.kron(freq, gen.a2(s)) + np.kron(eye_w, gen.a1(s))
        left_dim = warp.basis.size * d
        dims = (warp.basis.size, d, nc)
        labels = ("warp", "system", "clock")

    rows, cols, vals = [], [], []
    for i, s in enumerate(nodes):
        if zero_negative and s < 0:
            continue
        b = np.asarray(block(s), dtype=complex)
        r, c = np.nonzero(np.abs(b) > 1e-14 * max(np.abs(b).max(), 1.0))
        rows.append(r * nc + i)
        cols.append(c * nc + i)
        vals.append(b[r, c])
    dim = left_dim * nc
    if rows:
        h_of_s = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
        ).tocsr()
    else:
        h_of_s = sp.csr_matrix((dim, dim), dtype=complex)
    h = sp.kron(sp.identity(left_dim, format="csr"), p_clock, format="csr") + h_of_s
    return DilatedSystem(_sparsify(h), dims, labels, clock, dense_cap)


# --- evolution


def evolve(
    system: DilatedSystem,
    psi0: np.ndarray,
    t: float,
    method: str = "auto",
    krylov_tol: float = 1e-8,
    max_subspace: int = 48,
) -> np.ndarray:
    """Apply exp(-i H̄ t) to a state vector."""
    return evolve_times(
        system, psi0, [t], method=method, krylov_tol=krylov_tol,
        max_subspace=max_subspace,
    )[0]


def evolve_times(
    system: DilatedSystem,
    psi0: np.ndarray,
    times: Sequence[float],
    method: str = "auto",
    krylov_tol: float = 1e-8,
    max_subspace: int = 48,
):
    """Apply exp(-i H̄ t) at several times, reusing the eigendecomposition
    (dense path) or stepping incrementally (Krylov path)."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.size != system.dim:
        raise ValueError("state dimension does not match the system")
    if method == "auto":
        method = "dense" if system.dim <= AUTO_DENSE_LIMIT else "krylov"
    if method in ("dense", "dense_eig"):
        if system.dim > system.dense_cap:
            raise ValueError(
                f"dense evolution refused above dimension {system.dense_cap}"
            )
        w, v = system.eigensystem
        coeffs = v.conj().T @ psi0
        return [v @ (np.exp(-1j * w * t) * coeffs) for t in times]
    if method != "krylov":
        raise ValueError(f"unknown evolution method {method!r}")
    if system.hermitian_defect > 1e-10:
        raise ValueError("Krylov evolution requires a Hermitian matrix")
    order = np.argsort(np.abs(times))
    out = [None] * len(times)
    psi = psi0
    t_prev = 0.0
    for idx in order:
        t = times[idx]
        if t != t_prev:
            psi = krylov_expm(
                system.matrix, psi, t - t_prev, tol=krylov_tol, m_max=max_subspace
            )
            t_prev = t
        out[idx] = psi
    return out


def krylov_expm(h, v, t, tol=1e-8, m_max=48):
    """exp(-i h t) v for sparse Hermitian h via Lanczos with adaptive step
    splitting; the a-posteriori residual estimate is kept below tol per unit
    of evolved time."""
    v = np.asarray(v, dtype=complex)
    if t == 0:
        return v.copy()
    total = abs(t)
    sign = np.sign(t)
    remaining = total
    dt = total
    psi = v
    budget = tol * np.linalg.norm(v)
    while remaining > 1e-14 * total:
        dt = min(dt, remaining)
        w, err = _lanczos_step(h, psi, sign * dt, m_max)
        if err > budget * (dt / total) and dt > 1e-8 * total:
            dt /= 2.0
            continue
        psi = w
        remaining -= dt
        if err < 0.05 * budget * (dt / total):
            dt *= 2.0
    return psi


def _lanczos_step(h, v, tau, m_max):
    nv = np.linalg.norm(v)
    if nv == 0:
        return v.copy(), 0.0
    basis = [v / nv]
    alphas, betas = [], []
    w = h @ basis[0]
    a = float(np.real(np.vdot(basis[0], w)))
    alphas.append(a)
    w = w - a * basis[0]
    beta_next = np.linalg.norm(w)
    for _ in range(1, m_max):
        if beta_next < 1e-13:
            beta_next = 0.0
            break
        q = w / beta_next
        # one Gram-Schmidt sweep keeps the basis orthogonal on long steps
        for b in basis:
            q = q - np.vdot(b, q) * b
        q = q / np.linalg.norm(q)
        basis.append(q)
        betas.append(beta_next)
        w = h @ q - beta_next * basis[-2]
        a = float(np.real(np.vdot(q, w)))
        alphas.append(a)
        w = w - a * q
        beta_next = np.linalg.norm(w)
    m = len(alphas)
    evals, evecs = eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))
    small = evecs @ (np.exp(-1j * tau * evals) * evecs[0].conj())
    approx = nv * (np.column_stack(basis) @ small)
    err = nv * beta_next * abs(small[-1])
    return approx, float(err)


# --- partial traces and measurements


def partial_trace(state, dims, keep) -> np.ndarray:
    """Reduced density matrix over the axes in ``keep`` (vector or density
    input)."""
    dims = tuple(int(d) for d in dims)
    keep = tuple(sorted(keep))
    state = np.asarray(state, dtype=complex)
    n = len(dims)
    if state.ndim == 1:
        psi = state.reshape(dims)
        perm = keep + tuple(i for i in range(n) if i not in keep)
        psi = np.transpose(psi, perm)
        dk = int(np.prod([dims[i] for i in keep]))
        mat = psi.reshape(dk, -1)
        return mat @ mat.conj().T
    rho = state.reshape(dims + dims)
    # trace out everything not kept, pairing axis i with axis n + i
    out = rho
    removed = 0
    for i in range(n):
        if i in keep:
            continue
        ax = i - removed
        out = np.trace(out, axis1=ax, axis2=ax + (n - removed))
        removed += 1
    dk = int(np.prod([dims[i] for i in keep]))
    return out.reshape(dk, dk)


def trace_out_clock(state, dims, ensemble=None) -> np.ndarray:
    """Density matrix on everything but the (last) clock axis.

    ``state`` is a pure vector or density; alternatively pass
    ``ensemble=[(weight, vector), ...]`` for mixed diagonal clocks evolved as
    weighted pure runs.
    """
    keep = tuple(range(len(dims) - 1))
    if ensemble is not None:
        total = sum(w for w, _ in ensemble)
        out = sum(w * partial_trace(v, dims, keep) for w, v in ensemble) / total
        return out
    rho = partial_trace(state, dims, keep)
    tr = np.trace(rho).real
    return rho / tr


def _clock_pointer(clock: ClockSpec, s_target: float) -> np.ndarray:
    if isinstance(clock, GridClock):
        nodes = clock.nodes
        i = int(np.argmin(np.abs(nodes - s_target)))
        return _unit(nodes.size, i)
    if abs(s_target) > clock.basis.turning_point:
        raise ValueError(
            f"s={s_target} outside the Galerkin clock window "
            f"(+-{clock.basis.turning_point:.3g})"
        )
    return localized_state(clock.basis, s_target)


def measure_clock_at(state, s_target, dims, clock, ensemble=None):
    """Condition on the clock pointing at s_target.

    Returns ``(conditional state, probability)``; the conditional state is a
    unit vector for pure input and a density matrix for ensembles.  Grid
    clocks project on the nearest node, Galerkin clocks on the normalised
    position-localized basis vector.
    """
    loc = _clock_pointer(clock, s_target)
    nc = dims[-1]
    left = int(np.prod(dims[:-1]))
    if ensemble is not None:
        rho = np.zeros((left, left), dtype=complex)
        prob = 0.0
        total = sum(w for w, _ in ensemble)
        for w, v in ensemble:
            amp = v.reshape(left, nc) @ loc.conj()
            p = float(np.vdot(amp, amp).real)
            prob += w / total * p
            rho += w / total * np.outer(amp, amp.conj())
        if prob < 1e-12:
            raise ValueError("zero-probability clock outcome; cannot condition")
        return rho / prob, prob
    state = np.asarray(state, dtype=complex)
    amp = state.reshape(left, nc) @ loc.conj()
    prob = float(np.vdot(amp, amp).real)
    if prob < 1e-12:
        raise ValueError("zero-probability clock outcome; cannot condition")
    return amp / np.sqrt(prob), prob


# --- commuting-generator shortcut protocol


def _mean_coefficient(g) -> Callable:
    """G(s) = (1/s) ∫_0^s g, with the s -> 0 limit g(0)."""
    coef = getattr(g, "coef", None)
    if coef is not None:
        from numpy.polynomial import Polynomial

        anti = Polynomial(np.atleast_1d(coef)).integ()

        def gbar(s):
            s = np.asarray(s, dtype=float)
            out = np.where(s == 0.0, complex(g(0.0)), anti(s) / np.where(s == 0, 1.0, s))
            return out

        return gbar

    from scipy.integrate import quad

    def gbar(s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s_arr.shape, dtype=float)
        for i, si in enumerate(s_arr.ravel()):
            if si == 0.0:
                out.ravel()[i] = float(g(0.0))
            else:
                val, _ = quad(g, 0.0, si, limit=200)
                out.ravel()[i] = val / si
        return out.reshape(np.shape(s)) if np.ndim(s) else float(out[0])

    return gbar


def commuting_protocol(
    h: np.ndarray,
    g: Callable,
    t: float,
    clock: ClockSpec,
    omega: float,
    psi0: np.ndarray,
    profile: str = "gaussian",
) -> np.ndarray:
    """Two-step protocol for generators H(t) = g(t) h commuting at different
    times: translate the clock by t, apply exp(-i (h ⊗ G(ŝ)) t) with
    G(s) = (1/s)∫_0^s g, and trace out the clock.  Returns the reduced
    system density matrix, which approaches exp(-i G(t) t h) psi0 as
    omega -> 0."""
    h = np.asarray(h, dtype=complex)
    psi0 = np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    gbar = _mean_coefficient(as_coefficient(g))
    prep = prepare_clock(clock, ClockState.sqrt_delta(omega, profile))
    amps = prep.vector

    if isinstance(clock, GridClock):
        if clock.scheme == "spectral":
            k = 2.0 * np.pi * np.fft.fftfreq(clock.dim, d=clock.ds)
            amps_t = np.fft.ifft(np.exp(-1j * k * t) * np.fft.fft(amps))
        else:
            amps_t = expm(-1j * t * upwind_momentum(clock.dim, clock.ds)) @ amps
        rho = np.zeros((h.shape[0],) * 2, dtype=complex)
        for s_i, a in zip(clock.nodes, amps_t):
            p = float(np.abs(a) ** 2)
            if p < 1e-16:
                continue
            u = expm(-1j * float(np.real(gbar(s_i))) * t * h)
            v = u @ psi0
            rho += p * np.outer(v, v.conj())
        return rho / np.trace(rho).real

    basis = clock.basis
    u1 = expm(-1j * t * momentum_matrix(basis))
    amps_t = u1 @ amps
    gmat = multiplication_operator(gbar, basis)
    full = np.kron(psi0, amps_t)
    u2 = expm(-1j * t * np.kron(h, gmat))
    full = u2 @ full
    return trace_out_clock(full, (h.shape[0], basis.size))
