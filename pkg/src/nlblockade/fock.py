"""Truncated bosonic Fock-space operators and composite-space helpers.

Operators are plain dense ``numpy`` complex arrays. The ladder operators are
truncated hard: ``create(dim)`` sends the top state ``|dim-1>`` to zero, so
``[a, a^dag] = 1`` only holds below the top level.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class FockSpace:
    """Truncated Fock space holding ``|0>, ..., |dim-1>``."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"FockSpace needs an integer dim >= 2, got {self.dim!r}")

    @property
    def cutoff(self) -> int:
        """Largest photon number kept."""
        return self.dim - 1


def _dim(space) -> int:
    return space.dim if isinstance(space, FockSpace) else FockSpace(int(space)).dim


def annihilation_op(space) -> np.ndarray:
    """``a`` with ``a|n> = sqrt(n)|n-1>``; accepts a FockSpace or an int dim."""
    dim = _dim(space)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation_op(space) -> np.ndarray:
    return annihilation_op(space).conj().T


def number_op(space) -> np.ndarray:
    dim = _dim(space)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def identity(space) -> np.ndarray:
    return np.eye(_dim(space), dtype=complex)


def basis(dim: int, n: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


def fock_dm(dim: int, n: int) -> np.ndarray:
    """Projector ``|n><n|``."""
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    return rho


def coherent_dm(dim: int, alpha: complex) -> np.ndarray:
    """Coherent state ``|alpha><alpha|`` from the exact Poisson amplitudes,
    renormalized on the truncated space."""
    n = np.arange(dim)
    logfact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, dim)))))
    if alpha == 0:
        psi = basis(dim, 0)
    else:
        mag = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * logfact)
        psi = mag * np.exp(1j * n * np.angle(alpha))
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product; the first factor is the slowest-varying index."""
    if not ops:
        raise ValueError("tensor() needs at least one operator")
    return reduce(np.kron, ops)


def beam_splitter_unitary(space_a, space_b, theta: float) -> np.ndarray:
    """Passive two-mode rotation ``exp(theta (d^dag a - a^dag d))``.

    The first factor is called ``d`` and the second ``a``. With this sign,
    ``U^dag d U = cos(theta) d + sin(theta) a`` and
    ``U^dag a U = -sin(theta) d + cos(theta) a``. The rotation is exact on the
    sectors of total photon number ``<= dim - 1``; higher sectors are distorted
    by the truncation.
    """
    da, db = _dim(space_a), _dim(space_b)
    if da != db:
        raise ValueError(f"beam splitter needs equal cutoffs, got {da} and {db}")
    d = tensor(annihilation_op(da), identity(db))
    a = tensor(identity(da), annihilation_op(db))
    gen = d.conj().T @ a - a.conj().T @ d
    return scipy.linalg.expm(theta * gen)


def total_number_projector(dim: int, n_min: int) -> np.ndarray:
    """Diagonal of the projector onto two-mode states with ``n_1 + n_2 >= n_min``."""
    n = np.arange(dim)
    tot = (n[:, None] + n[None, :]).ravel()
    return (tot >= n_min).astype(float)


def partial_trace(rho: np.ndarray, dims, keep: int) -> np.ndarray:
    """Reduced state of factor ``keep`` of a multipartite density matrix."""
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"rho has shape {rho.shape}, dims {dims} imply {total}")
    if not 0 <= keep < len(dims):
        raise ValueError(f"keep={keep} out of range for {len(dims)} factors")
    k = len(dims)
    t = rho.reshape(dims + dims)
    row = list(range(k))
    col = list(range(k, 2 * k))
    for i in range(k):
        if i != keep:
            col[i] = row[i]
    return np.einsum(t, row + col, [keep, k + keep])


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def is_hermitian(op: np.ndarray, atol: float = 1e-10) -> bool:
    return bool(np.allclose(op, op.conj().T, atol=atol, rtol=0))


def check_density_matrix(rho: np.ndarray, herm_tol=1e-10, trace_tol=1e-8, psd_tol=1e-8):
    """Raise ValueError unless ``rho`` is a valid density matrix within tolerance."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} != 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam < -psd_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lam:.3g}")
    return rho


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = rho - sigma
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())
