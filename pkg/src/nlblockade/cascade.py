"""Cascaded source/target cavities for quantized input and reflection statistics.

A coherently driven empty source cavity ``d`` (ports 1 and 2) feeds the
target cavity ``a`` (input port e1, output port e2) through a unidirectional
channel with zero propagation delay. The composite space is ``d (x) a`` with
``d`` the slow index.

The reflected field of the target is ``c = (sqrt(kd2) d + sqrt(ke1) a) /
sqrt(kd2 + ke1)``; its photon statistics are obtained by rotating the two
modes so that ``c`` becomes the first factor and tracing out the second.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import TruncationError
from .fock import (annihilation_op, beam_splitter_unitary, identity, partial_trace, tensor,
                   total_number_projector)
from .lindblad import (CollapseChannel, Liouvillian, build_liouvillian, check_truncation,
                       spost, spre, sprepost, steady_state)

MAX_COMPOSITE_DIM = 4096
LEAKAGE_TOL = 1e-6


@dataclass(frozen=True)
class CascadeConfig:
    kappa_d1: float = 0.5
    kappa_d2: float = 0.5
    kappa_e1: float = 0.5
    kappa_e2: float = 0.5
    kappa_i: float = 0.0
    kappa_a_L: float = 0.0
    kappa_a_NL: float = 0.0
    eta: float = 0.0
    alpha: complex = 0.0
    dim_d: int = 12
    dim_a: int = 12
    target_nbar: float | None = None

    def __post_init__(self):
        for name in ("kappa_d1", "kappa_d2", "kappa_e1", "kappa_e2", "kappa_i",
                     "kappa_a_L", "kappa_a_NL"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.dim_d < 4 or self.dim_a < 4:
            raise ValueError("mode cutoffs must be >= 4")
        if self.dim_d * self.dim_a > MAX_COMPOSITE_DIM:
            raise ValueError(f"composite dimension {self.dim_d * self.dim_a} exceeds {MAX_COMPOSITE_DIM}")
        if self.target_nbar is not None:
            object.__setattr__(self, "alpha", calibrate_drive(self, self.target_nbar))

    @property
    def kappa_d(self) -> float:
        return self.kappa_d1 + self.kappa_d2

    @property
    def kappa_a(self) -> float:
        """Total linear decay of the target: both ports, intrinsic and atomic one-photon loss."""
        return self.kappa_e1 + self.kappa_e2 + self.kappa_i + self.kappa_a_L

    def replace(self, **changes) -> "CascadeConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = complex(self.alpha)
        return d


@dataclass(frozen=True)
class ModeStatistics:
    mode: str
    probabilities: np.ndarray
    mean_n: float

    def __post_init__(self):
        if abs(self.probabilities.sum() - 1) > 1e-8:
            raise ValueError(f"mode {self.mode} probabilities sum to {self.probabilities.sum()!r}")


def calibrate_drive(cfg: CascadeConfig, nbar: float) -> float:
    """Drive amplitude giving ``<d^dag d> = nbar`` in the isolated source cavity."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    if nbar == 0:
        return 0.0
    if cfg.kappa_d1 <= 0:
        raise ValueError("calibration needs kappa_d1 > 0")
    return math.sqrt(nbar) * cfg.kappa_d / (2 * math.sqrt(cfg.kappa_d1))


def mode_operators(cfg: CascadeConfig):
    d = tensor(annihilation_op(cfg.dim_d), identity(cfg.dim_a))
    a = tensor(identity(cfg.dim_d), annihilation_op(cfg.dim_a))
    return d, a


def cascade_cross_term(d: np.ndarray, a: np.ndarray, rate: float) -> sp.csr_matrix:
    """Unidirectional coupling ``-rate([a^dag, d rho] - [a, rho d^dag])``."""
    ad, dd = a.conj().T, d.conj().T
    left = spre(ad @ d) - sprepost(d, ad)
    right = sprepost(a, dd) - spost(dd @ a)
    return rate * (right - left)


def build_cascade_liouvillian(cfg: CascadeConfig) -> Liouvillian:
    d, a = mode_operators(cfg)
    ad, dd = a.conj().T, d.conj().T
    alpha = complex(cfg.alpha)
    # -sqrt(kd1)[alpha d^dag - alpha* d, rho] is -i[H, rho] with this H
    h_drive = -1j * math.sqrt(cfg.kappa_d1) * (alpha * dd - alpha.conjugate() * d)
    H = cfg.eta * (ad @ ad @ a @ a) + h_drive
    channels = [
        CollapseChannel(d, cfg.kappa_d),
        CollapseChannel(a, cfg.kappa_a),
        CollapseChannel(a @ a, cfg.kappa_a_NL),
    ]
    cross = cascade_cross_term(d, a, math.sqrt(cfg.kappa_d2 * cfg.kappa_e1))
    return build_liouvillian(H, channels, extra=cross)


def solve_cascade(cfg: CascadeConfig, method: str = "iterative", truncation_tol: float = 1e-9) -> np.ndarray:
    """Steady state of the cascade; both mode cutoffs are checked for adequacy."""
    rho = steady_state(build_cascade_liouvillian(cfg), method=method)
    check_truncation(rho, tol=truncation_tol, dims=[cfg.dim_d, cfg.dim_a])
    return rho


def reflection_angle(cfg: CascadeConfig) -> float:
    if cfg.kappa_d2 == 0 and cfg.kappa_e1 == 0:
        raise ValueError("reflected mode undefined for kappa_d2 = kappa_e1 = 0")
    return math.atan2(math.sqrt(cfg.kappa_e1), math.sqrt(cfg.kappa_d2))


def reflected_mode_state(rho: np.ndarray, cfg: CascadeConfig, leakage_tol: float = LEAKAGE_TOL) -> np.ndarray:
    """Reduced density matrix of the reflected mode ``c``."""
    if cfg.dim_d != cfg.dim_a:
        raise ValueError("reflected-mode extraction needs dim_d == dim_a")
    dim = cfg.dim_d
    theta = reflection_angle(cfg)
    leak = float(np.real(np.diag(rho)) @ total_number_projector(dim, dim))
    if leak > leakage_tol:
        raise TruncationError(f"population {leak:.3g} above the joint cutoff; raise dim_d/dim_a", leak)
    U = beam_splitter_unitary(dim, dim, theta)
    return partial_trace(U @ rho @ U.conj().T, [dim, dim], keep=0)


def mode_fock_statistics(rho: np.ndarray, cfg: CascadeConfig, mode: str) -> ModeStatistics:
    """Photon statistics of the incident (``"d"``), transmitted (``"a"``,
    identified with the intracavity mode) or reflected (``"c"``) mode."""
    if mode == "d":
        red = partial_trace(rho, [cfg.dim_d, cfg.dim_a], keep=0)
    elif mode == "a":
        red = partial_trace(rho, [cfg.dim_d, cfg.dim_a], keep=1)
    elif mode == "c":
        red = reflected_mode_state(rho, cfg)
    else:
        raise ValueError(f"mode must be 'd', 'a' or 'c', got {mode!r}")
    p = np.real(np.diag(red)).copy()
    return ModeStatistics(mode=mode, probabilities=p, mean_n=float(np.arange(p.size) @ p))


def cascade_statistics(cfg: CascadeConfig, method: str = "iterative") -> dict[str, ModeStatistics]:
    rho = solve_cascade(cfg, method=method)
    return {m: mode_fock_statistics(rho, cfg, m) for m in ("d", "a", "c")}


def photon_fluxes(rho: np.ndarray, cfg: CascadeConfig) -> dict[str, float]:
    """Photon fluxes: into port 1, back out of port 1, out of the target's
    transmission port (port 4) and out of its reflection (port 3 output)."""
    d, a = mode_operators(cfg)
    nd = np.trace(d.conj().T @ d @ rho).real
    na = np.trace(a.conj().T @ a @ rho).real
    c = math.sqrt(cfg.kappa_d2) * d + math.sqrt(cfg.kappa_e1) * a
    return {
        "input": abs(complex(cfg.alpha)) ** 2,
        "source_reflected": float(
            abs(complex(cfg.alpha)) ** 2
            + 2 * math.sqrt(cfg.kappa_d1) * (np.conj(cfg.alpha) * np.trace(d @ rho)).real
            + cfg.kappa_d1 * nd
        ),
        "transmitted": cfg.kappa_e2 * na,
        "reflected": float(np.trace(c.conj().T @ c @ rho).real),
    }
