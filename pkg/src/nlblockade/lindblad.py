"""Lindblad master-equation machinery on vectorized density matrices.

Density matrices are vectorized row-major (``rho.ravel()``), so that
``vec(A rho B) = (A kron B^T) vec(rho)``. Generators are stored as
``scipy.sparse`` CSR matrices.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import DegenerateSteadyStateError, SolverError, StiffnessError, TruncationError
from .fock import annihilation_op, check_density_matrix, number_op

DENSE_STEADY_STATE_MAX_DIM = 32
SPARSE_LU_MAX_DIM = 100
TRUNCATION_TOL = 1e-9


@dataclass(frozen=True)
class CollapseChannel:
    """Jump operator ``operator`` applied at rate ``rate`` (dissipator ``rate * D[operator]``)."""

    operator: np.ndarray
    rate: float

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError(f"collapse rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class Liouvillian:
    dim: int
    generator: sp.csr_matrix

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.generator @ rho.ravel()).reshape(self.dim, self.dim)

    def trace_defect(self) -> float:
        """Largest entry of ``L^dag(identity)``; zero for a trace-preserving generator."""
        idx = np.arange(self.dim) * (self.dim + 1)
        col_sums = np.asarray(self.generator[idx, :].sum(axis=0)).ravel()
        return float(np.max(np.abs(col_sums)))

    def norm(self) -> float:
        return float(spla.norm(self.generator))


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or (t.size > 1 and np.any(np.diff(t) <= 0)):
            raise ValueError("TimeSeries times must be a strictly increasing 1-D grid")


def spre(a) -> sp.csr_matrix:
    """Superoperator of ``rho -> a @ rho``."""
    a = sp.csr_matrix(a)
    return sp.kron(a, sp.identity(a.shape[0], format="csr"), format="csr")


def spost(b) -> sp.csr_matrix:
    """Superoperator of ``rho -> rho @ b``."""
    b = sp.csr_matrix(b)
    return sp.kron(sp.identity(b.shape[0], format="csr"), b.T, format="csr")


def sprepost(a, b) -> sp.csr_matrix:
    """Superoperator of ``rho -> a @ rho @ b``."""
    return sp.kron(sp.csr_matrix(a), sp.csr_matrix(b).T, format="csr")


def dissipator(c) -> sp.csr_matrix:
    c = np.asarray(c)
    cdc = c.conj().T @ c
    return sprepost(c, c.conj().T) - 0.5 * spre(cdc) - 0.5 * spost(cdc)


def build_liouvillian(H, channels: Sequence[CollapseChannel] = (), extra=None) -> Liouvillian:
    """Generator of ``d rho/dt = -i[H, rho] + sum_k rate_k D[L_k] rho``.

    ``extra`` is an optional superoperator (same vectorization) added as is;
    it is used for couplings that are not of Hamiltonian-plus-dissipator form
    term by term, such as cascaded cross terms.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got {H.shape}")
    dim = H.shape[0]
    gen = -1j * (spre(H) - spost(H))
    for ch in channels:
        if ch.operator.shape != (dim, dim):
            raise ValueError(
                f"collapse operator shape {ch.operator.shape} does not match dim {dim}"
            )
        if ch.rate < 0:
            raise ValueError(f"negative collapse rate {ch.rate}")
        if ch.rate:
            gen = gen + ch.rate * dissipator(ch.operator)
    if extra is not None:
        if extra.shape != (dim * dim, dim * dim):
            raise ValueError("extra superoperator has the wrong shape")
        gen = gen + extra
    return Liouvillian(dim=dim, generator=sp.csr_matrix(gen))


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def _trace_row(dim: int) -> np.ndarray:
    row = np.zeros(dim * dim, dtype=complex)
    row[np.arange(dim) * (dim + 1)] = 1.0
    return row


def _pinned_system(gen: sp.csr_matrix):
    """Drop row and column 0 of ``L vec(rho) = 0`` after fixing ``rho[0, 0] = 1``.

    Unlike appending a dense trace row this keeps the sparsity pattern, which
    matters for fill-in and for incomplete-LU preconditioning. It needs a
    steady state with vacuum population, which holds for any damped mode.
    """
    gen = gen.tocsc()
    rhs = -gen[1:, 0].toarray().ravel()
    return gen[1:, 1:].tocsc(), rhs


def steady_state(L: Liouvillian, method: str = "auto", rho0=None, check: bool = True) -> np.ndarray:
    """Unique steady state of ``L``.

    ``method``:

    * ``"dense"``: replace one row of the dense generator by the trace
      constraint and solve directly; an ill-conditioned system means the
      kernel is not one-dimensional and raises.
    * ``"sparse"``: sparse LU of the pinned system (see :func:`_pinned_system`).
    * ``"iterative"``: GMRES on the pinned system with an incomplete-LU
      preconditioner; the choice for two-mode problems where exact LU fill-in
      explodes.
    * ``"propagate"``: evolve ``rho0`` (``|0><0|`` by default) until stationary.
    * ``"auto"``: dense up to dim 32, sparse LU up to dim 100, iterative above.
    """
    dim = L.dim
    if method == "auto":
        if dim <= DENSE_STEADY_STATE_MAX_DIM:
            method = "dense"
        elif dim <= SPARSE_LU_MAX_DIM:
            method = "sparse"
        else:
            method = "iterative"
    norm = L.norm()
    if method == "dense":
        A = L.generator.toarray()
        A[0, :] = _trace_row(dim)
        b = np.zeros(dim * dim, dtype=complex)
        b[0] = 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            try:
                vec = scipy.linalg.solve(A, b)
            except (scipy.linalg.LinAlgWarning, np.linalg.LinAlgError) as exc:
                raise DegenerateSteadyStateError(
                    f"Liouvillian kernel is not one-dimensional: {exc}"
                ) from None
    elif method in ("sparse", "iterative"):
        A, b = _pinned_system(L.generator)
        try:
            if method == "sparse":
                x = spla.splu(A).solve(b)
            else:
                ilu = spla.spilu(A, drop_tol=1e-4, fill_factor=20)
                M = spla.LinearOperator(A.shape, ilu.solve, dtype=complex)
                x, info = spla.gmres(A, b, M=M, rtol=1e-14, atol=0.0, restart=100, maxiter=20)
                if info != 0:
                    raise SolverError(f"GMRES did not converge (info={info})")
        except RuntimeError as exc:
            if isinstance(exc, SolverError):
                raise
            raise DegenerateSteadyStateError(f"pinned steady-state system is singular: {exc}") from None
        vec = np.concatenate(([1.0 + 0j], x))
        if not np.all(np.isfinite(vec)):
            raise DegenerateSteadyStateError("steady-state solve returned non-finite values")
    elif method == "propagate":
        if rho0 is None:
            rho0 = np.zeros((dim, dim), dtype=complex)
            rho0[0, 0] = 1.0
        return evolve_to_steady_state(L, rho0)
    else:
        raise ValueError(f"unknown steady-state method {method!r}")
    rho = _hermitize(vec.reshape(dim, dim))
    rho /= np.trace(rho).real
    if check:
        resid = np.linalg.norm(L.generator @ rho.ravel())
        if resid > 1e-10 * max(norm, 1.0):
            raise SolverError(f"steady-state residual {resid:.3g} exceeds 1e-10 * ||L|| = {norm:.3g}")
        check_density_matrix(rho)
    return rho


def evolve(L: Liouvillian, rho0: np.ndarray, t: float, rtol: float = 1e-9, atol: float = 1e-12,
           t_eval=None, max_step: float = np.inf):
    """Propagate ``rho0`` for a duration ``t`` with an adaptive Dormand-Prince 8(5,3) pair.

    Returns the final density matrix, or an array of density matrices at
    ``t_eval`` when given.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    dim = L.dim
    if t < 0:
        raise ValueError("evolve needs t >= 0")
    if t == 0 and t_eval is None:
        return rho0.copy()
    gen = L.generator

    def rhs(_, y):
        return gen @ y

    if t_eval is None:
        out = _integrate(rhs, rho0.ravel(), t, rtol, atol, max_step).reshape(dim, dim)
        _check_drift(out, rho0)
        return out
    # step between output times so every sample is a step endpoint, not an interpolant
    t_eval = np.asarray(t_eval, dtype=float)
    states = np.empty((t_eval.size, dim, dim), dtype=complex)
    y, t_prev = rho0.ravel(), 0.0
    for k, tk in enumerate(t_eval):
        if tk < t_prev:
            raise ValueError("t_eval must be nondecreasing and start at >= 0")
        if tk > t_prev:
            y = _integrate(rhs, y, tk - t_prev, rtol, atol, max_step, t0=t_prev)
            t_prev = tk
        states[k] = y.reshape(dim, dim)
        _check_drift(states[k], rho0)
    return states


def _integrate(rhs, y0, duration, rtol, atol, max_step, t0=0.0):
    sol = solve_ivp(rhs, (t0, t0 + duration), y0, method="DOP853", rtol=rtol, atol=atol,
                    max_step=max_step)
    if sol.status != 0:
        raise StiffnessError(f"propagation failed at t={sol.t[-1]:.6g}: {sol.message}")
    return sol.y[:, -1]


def _check_drift(rho, rho0, trace_tol=1e-8, herm_tol=1e-9):
    tr0 = np.trace(rho0)
    if abs(np.trace(rho) - tr0) > trace_tol * max(abs(tr0), 1.0):
        raise SolverError(f"trace drift {abs(np.trace(rho) - tr0):.3g} during propagation")
    herm0 = np.max(np.abs(rho0 - rho0.conj().T))
    if np.max(np.abs(rho - rho.conj().T)) - herm0 > herm_tol:
        raise SolverError("Hermiticity drift during propagation")


def evolve_to_steady_state(L: Liouvillian, rho0: np.ndarray, tol: float = 1e-11, chunk: float = 5.0,
                           max_time: float = 1e4) -> np.ndarray:
    """Propagate in chunks until ``||L rho|| <= tol * ||L||``."""
    rho = np.asarray(rho0, dtype=complex)
    norm = max(L.norm(), 1.0)
    elapsed = 0.0
    while elapsed < max_time:
        rho = evolve(L, rho, chunk, rtol=1e-10, atol=1e-13)
        elapsed += chunk
        if np.linalg.norm(L.generator @ rho.ravel()) <= tol * norm:
            rho = _hermitize(rho)
            return rho / np.trace(rho).real
        chunk = min(2 * chunk, 200.0)
    raise StiffnessError(f"no stationary state reached within t={max_time}")


def fock_probabilities(rho: np.ndarray) -> np.ndarray:
    """Photon-number distribution ``<n|rho|n>``."""
    p = np.real(np.diag(rho)).copy()
    if abs(p.sum() - 1) > 1e-8:
        raise ValueError(f"Fock probabilities sum to {p.sum()!r}")
    return p


def check_truncation(rho: np.ndarray, tol: float = TRUNCATION_TOL, dims=None):
    """Raise :class:`TruncationError` if the top Fock level of any mode holds more
    than ``tol`` population. ``dims`` lists the mode dimensions of a composite
    state (all factors are treated as Fock modes)."""
    if dims is None:
        dims = [rho.shape[0]]
    diag = np.real(np.diag(rho)).reshape(dims)
    worst = 0.0
    for axis in range(len(dims)):
        top = np.take(diag, dims[axis] - 1, axis=axis).sum()
        worst = max(worst, float(top))
    if worst > tol:
        raise TruncationError(f"top Fock level holds {worst:.3g} > {tol:g}", worst)
    return worst


def expect(op: np.ndarray, rho: np.ndarray) -> complex:
    return complex(np.trace(op @ rho))


def g2_zero(rho: np.ndarray, a: np.ndarray | None = None) -> float:
    """Equal-time ``<a^dag a^dag a a> / <a^dag a>^2``."""
    if a is None:
        a = annihilation_op(rho.shape[0])
    ad = a.conj().T
    n = expect(ad @ a, rho).real
    if n <= 1e-300:
        raise ValueError("g2 is undefined for the vacuum state")
    return float(expect(ad @ ad @ a @ a, rho).real / n**2)


def g2_tau(L: Liouvillian, rho_ss: np.ndarray, tau_grid, a: np.ndarray | None = None,
           method: str = "expm") -> TimeSeries:
    """Delayed intensity correlation by the quantum regression theorem.

    ``a rho_ss a^dag`` is propagated under ``L`` and ``<a^dag a>`` of the result
    is normalized by ``<a^dag a>_ss^2``. ``method="expm"`` steps with the exact
    action of the matrix exponential, ``method="rk"`` uses :func:`evolve`.
    """
    taus = np.asarray(tau_grid, dtype=float)
    TimeSeries(taus, taus)  # grid validation
    if taus[0] < 0:
        raise ValueError("tau grid must be nonnegative")
    if a is None:
        a = annihilation_op(L.dim)
    ad = a.conj().T
    nop = ad @ a
    n_ss = expect(nop, rho_ss).real
    if n_ss <= 1e-300:
        raise ValueError("g2(tau) is undefined for a vacuum steady state")
    x0 = a @ rho_ss @ ad
    if method == "rk":
        states = evolve(L, x0, taus[-1], t_eval=taus) if taus[-1] > 0 else x0[None]
        vals = np.array([expect(nop, s).real for s in states])
    elif method == "expm":
        vals = np.empty(taus.size)
        for k, (_, v) in enumerate(_exact_propagation(L, x0.ravel(), taus)):
            vals[k] = expect(nop, v.reshape(L.dim, L.dim)).real
    else:
        raise ValueError(f"unknown g2_tau method {method!r}")
    return TimeSeries(taus, vals / n_ss**2)


def _exact_propagation(L: Liouvillian, v0: np.ndarray, times: np.ndarray):
    """Yield ``(t, exp(L t) v0)`` along ``times``; dense propagators are cached per
    step length for small systems, larger ones use ``expm_multiply``."""
    dense = L.dim <= DENSE_STEADY_STATE_MAX_DIM
    gen = L.generator.toarray() if dense else L.generator.tocsc()
    cache: dict[float, np.ndarray] = {}
    v, t_prev = v0, 0.0
    for t in times:
        dt = float(t - t_prev)
        if dt > 0:
            if dense:
                key = round(dt, 15)
                if key not in cache:
                    cache[key] = scipy.linalg.expm(gen * dt)
                v = cache[key] @ v
            else:
                v = spla.expm_multiply(gen * dt, v)
            t_prev = t
        yield t, v


def fock_rate_step(P, kappa_L: float, kappa_NL: float) -> np.ndarray:
    """Population rate equation for linear and two-photon loss on a truncated ladder."""
    P = np.asarray(P, dtype=float)
    n = np.arange(P.size, dtype=float)
    out = -kappa_L * n * P - kappa_NL * n * (n - 1) * P
    out[:-1] += kappa_L * n[1:] * P[1:]
    out[:-2] += kappa_NL * n[2:] * (n[2:] - 1) * P[2:]
    return out


def mean_photon_number(rho: np.ndarray) -> float:
    return float(expect(number_op(rho.shape[0]), rho).real)
