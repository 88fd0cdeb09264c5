"""Full atom-cavity master equation for one or two N-type atoms.

This is the small-scale reference model used to check the adiabatic
elimination behind :mod:`nlblockade.atomic`. Atomic level ``|k>`` (k = 1..4)
is basis index ``k - 1``; the composite space is ``atom_1 (x) ... (x) Fock``.

Detunings are measured from the bare cavity: ``delta`` is the probe-cavity
detuning, ``atom_params.delta21_res`` / ``delta43_res`` are the transition
frequencies minus the bare cavity frequency, and ``N`` in ``atom_params`` is
ignored.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .atomic import NTypeEnsembleParams
from .errors import SolverError
from .fock import annihilation_op, identity, tensor
from .lindblad import CollapseChannel, build_liouvillian, check_truncation, steady_state

MAX_COMPOSITE_DIM = 4096

# (rate attribute, lower level, upper level) for jumps |upper> -> |lower>
DECAY_CHANNELS = (
    ("Gamma41", 1, 4),
    ("Gamma43", 3, 4),
    ("Gamma42", 2, 4),
    ("Gamma21", 1, 2),
    ("Gamma23", 3, 2),
    ("Gamma31", 1, 3),
)


@dataclass(frozen=True)
class MicroscopicConfig:
    n_atoms: int = 1
    fock_cutoff: int = 3
    atom_params: NTypeEnsembleParams = field(default_factory=lambda: NTypeEnsembleParams(N=1))
    delta: float = 0.0
    eps_p: float = 1e-3
    kappa_e1: float = 0.5
    kappa_e2: float = 0.5
    kappa_i: float = 0.0

    def __post_init__(self):
        if self.n_atoms not in (1, 2):
            raise ValueError("n_atoms must be 1 or 2")
        if self.fock_cutoff < 3:
            raise ValueError("fock_cutoff must be >= 3")
        if self.dim > MAX_COMPOSITE_DIM:
            raise ValueError(f"composite dimension {self.dim} exceeds {MAX_COMPOSITE_DIM}")

    @property
    def dim(self) -> int:
        return 4**self.n_atoms * self.fock_cutoff

    @property
    def kappa(self) -> float:
        return self.kappa_e1 + self.kappa_e2 + self.kappa_i

    def replace(self, **changes) -> "MicroscopicConfig":
        return replace(self, **changes)


def sigma(m: int, n: int) -> np.ndarray:
    """Single-atom ``|m><n|`` with levels numbered 1..4."""
    s = np.zeros((4, 4), dtype=complex)
    s[m - 1, n - 1] = 1.0
    return s


def _embed(cfg: MicroscopicConfig, op: np.ndarray, atom: int) -> np.ndarray:
    factors = [identity(4)] * cfg.n_atoms + [identity(cfg.fock_cutoff)]
    factors[atom] = op
    return tensor(*factors)


def cavity_annihilation(cfg: MicroscopicConfig) -> np.ndarray:
    factors = [identity(4)] * cfg.n_atoms + [annihilation_op(cfg.fock_cutoff)]
    return tensor(*factors)


def atomic_projector(cfg: MicroscopicConfig, level: int, atom: int = 0) -> np.ndarray:
    return _embed(cfg, sigma(level, level), atom)


def build_full_model(cfg: MicroscopicConfig):
    """Hamiltonian and collapse channels of the full atom-cavity model."""
    p = cfg.atom_params
    a = cavity_annihilation(cfg)
    ad = a.conj().T
    d21 = p.delta21_res - cfg.delta
    d43 = p.delta43_res - cfg.delta
    d23 = p.delta23
    oc = complex(p.omega_c)
    H = -cfg.delta * (ad @ a) + 1j * math.sqrt(cfg.kappa_e1) * cfg.eps_p * (ad - a)
    channels = [CollapseChannel(a, cfg.kappa)]
    for j in range(cfg.n_atoms):
        s = lambda m, n: _embed(cfg, sigma(m, n), j)  # noqa: E731
        H = H + (
            d21 * s(2, 2)
            + (d21 - d23) * s(3, 3)
            + (d21 - d23 + d43) * s(4, 4)
            + 1j * p.g1 * (ad @ s(1, 2) - s(2, 1) @ a)
            + 1j * p.g2 * (ad @ s(3, 4) - s(4, 3) @ a)
            + 1j * (oc.conjugate() * s(3, 2) - oc * s(2, 3))
        )
        for attr, lower, upper in DECAY_CHANNELS:
            channels.append(CollapseChannel(s(lower, upper), getattr(p, attr)))
    return H, channels


def steady_state_full(cfg: MicroscopicConfig) -> np.ndarray:
    H, channels = build_full_model(cfg)
    rho = steady_state(build_liouvillian(H, channels))
    check_truncation(_cavity_marginal(rho, cfg))
    return rho


def _cavity_marginal(rho: np.ndarray, cfg: MicroscopicConfig) -> np.ndarray:
    na = 4**cfg.n_atoms
    t = rho.reshape(na, cfg.fock_cutoff, na, cfg.fock_cutoff)
    return np.einsum("iaib->ab", t)


def transmission(cfg: MicroscopicConfig) -> float:
    """``kappa_e2 <a^dag a> / eps_p^2`` in the steady state."""
    rho = steady_state_full(cfg)
    a = cavity_annihilation(cfg)
    n = np.trace(a.conj().T @ a @ rho).real
    return cfg.kappa_e2 * n / cfg.eps_p**2


def lorentzian(x, amp, center, fwhm):
    return amp / (1 + (2 * (x - center) / fwhm) ** 2)


@dataclass(frozen=True)
class CavityLineFit:
    center: float
    fwhm: float
    amplitude: float
    bare_width: float

    @property
    def pull(self) -> float:
        return self.center

    @property
    def added_loss(self) -> float:
        return self.fwhm - self.bare_width


def fit_cavity_line(cfg: MicroscopicConfig, detunings=None) -> CavityLineFit:
    """Sweep the probe, fit a Lorentzian to the weak-drive transmission.

    The peak position is the atom-induced cavity pull and the width in excess
    of the bare linewidth ``kappa`` is the added one-photon loss.
    """
    if detunings is None:
        detunings = np.linspace(-1.5, 1.5, 61) * cfg.kappa
    detunings = np.asarray(detunings, dtype=float)
    T = np.array([transmission(cfg.replace(delta=float(d))) for d in detunings])
    k = int(np.argmax(T))
    p0 = (T[k], detunings[k], cfg.kappa)
    try:
        with warnings.catch_warnings():
            # noise-free data: the covariance estimate is meaningless, not an error
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(lorentzian, detunings, T, p0=p0, xtol=1e-14, ftol=1e-14,
                                maxfev=20000)
    except RuntimeError as exc:
        raise SolverError(f"Lorentzian fit failed: {exc}") from None
    amp, center, fwhm = popt
    return CavityLineFit(center=float(center), fwhm=abs(float(fwhm)), amplitude=float(amp),
                         bare_width=cfg.kappa)
