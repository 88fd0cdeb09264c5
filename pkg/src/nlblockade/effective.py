"""Effective single-mode cavity with the atoms adiabatically eliminated.

The probe scans around the pulled resonance with detuning ``delta_prime``.
At each detuning the atomic response is re-evaluated, giving the model

    H = (-delta_prime + shift(delta_prime)) a^dag a + eta a^dag^2 a^2
        + i sqrt(kappa_e1) eps_p (a^dag - a)

with collapse operators ``sqrt(1 + kappa_a_L) a`` and ``sqrt(kappa_a_NL) a^2``
(rates in units of kappa = kappa_e1 + kappa_e2 + kappa_i = 1).
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .atomic import EffectiveParams, NTypeEnsembleParams, dispersive_shift, effective_params
from .errors import SolverError, TruncationError
from .fock import annihilation_op, number_op
from .lindblad import (CollapseChannel, build_liouvillian, check_truncation, g2_zero,
                       mean_photon_number, steady_state)

DEFAULT_FOCK_CUTOFF = 20
MAX_FOCK_CUTOFF = 80


def geometric_detuning_grid(span: float = 2e-3, n: int = 200, min_step: float = 1e-6) -> np.ndarray:
    """Symmetric grid of ``n`` points on ``[-span, span]``, geometrically dense near zero.

    For odd ``n`` zero is included.
    """
    half = n // 2
    if half == 0:
        return np.zeros(1)
    pos = np.geomspace(min_step, span, half)
    mid = [0.0] if n % 2 else []
    return np.concatenate((-pos[::-1], mid, pos))


def default_eps_p(kappa_e1: float, drive_rate: float = 0.05) -> float:
    """Probe amplitude for which the cavity drive ``sqrt(kappa_e1) eps_p`` equals ``drive_rate``."""
    return drive_rate / math.sqrt(kappa_e1)


@dataclass(frozen=True)
class EffectiveCavityConfig:
    kappa_e1: float = 0.45
    kappa_e2: float = 0.45
    kappa_i: float = 0.1
    eps_p: float | None = None
    detuning_grid: tuple = field(default_factory=lambda: tuple(geometric_detuning_grid()))
    atom_params: NTypeEnsembleParams = field(default_factory=NTypeEnsembleParams)
    fock_cutoff: int = DEFAULT_FOCK_CUTOFF

    def __post_init__(self):
        if self.eps_p is None:
            object.__setattr__(self, "eps_p", default_eps_p(self.kappa_e1))
        object.__setattr__(self, "detuning_grid", tuple(float(x) for x in self.detuning_grid))
        for name in ("kappa_e1", "kappa_e2", "kappa_i"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        total = self.kappa_e1 + self.kappa_e2 + self.kappa_i
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"port rates must sum to 1 (the unit of kappa), got {total}")
        if self.eps_p < 0:
            raise ValueError("eps_p must be >= 0")
        if self.fock_cutoff < 3:
            raise ValueError("fock_cutoff must be >= 3")

    def replace(self, **changes) -> "EffectiveCavityConfig":
        return replace(self, **changes)


@dataclass
class SweepPoint:
    delta_prime: float
    transmission: float = math.nan
    g2_0: float = math.nan
    mean_n: float = math.nan
    eff: EffectiveParams | None = None
    shift: float = math.nan
    fock_cutoff: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def model_rates(cfg: EffectiveCavityConfig, delta_prime: float):
    """Effective rates and dispersive shift at one detuning (zero for an empty cavity)."""
    p = cfg.atom_params
    if p.N == 0:
        return EffectiveParams(0.0, 0.0, 0.0, 0.0), 0.0
    return effective_params(p, delta_prime), dispersive_shift(p, delta_prime)


def kerr_cavity_model(dim: int, delta_eff: float, eta: float, kappa_t: float, kappa_nl: float,
                      drive: float):
    """Hamiltonian and channels of a driven cavity with Kerr and two-photon loss.

    ``drive`` multiplies ``i (a^dag - a)``.
    """
    a = annihilation_op(dim)
    ad = a.conj().T
    H = delta_eff * number_op(dim) + eta * (ad @ ad @ a @ a) + 1j * drive * (ad - a)
    channels = [CollapseChannel(a, kappa_t), CollapseChannel(a @ a, kappa_nl)]
    return H, channels


def build_effective_model(cfg: EffectiveCavityConfig, delta_prime: float, dim: int | None = None):
    """``(H, channels)`` of the effective model at probe detuning ``delta_prime``."""
    eff, shift = model_rates(cfg, delta_prime)
    return kerr_cavity_model(
        dim or cfg.fock_cutoff,
        delta_eff=-delta_prime + shift,
        eta=eff.eta,
        kappa_t=1.0 + eff.kappa_a_L,
        kappa_nl=eff.kappa_a_NL,
        drive=math.sqrt(cfg.kappa_e1) * cfg.eps_p,
    )


def solve_point(cfg: EffectiveCavityConfig, delta_prime: float) -> SweepPoint:
    """Steady state at one detuning, escalating the Fock cutoff until the top
    level is empty to within the truncation threshold."""
    eff, shift = model_rates(cfg, delta_prime)
    pt = SweepPoint(delta_prime=float(delta_prime), eff=eff, shift=shift)
    if cfg.eps_p == 0:
        pt.error = "transmission undefined for eps_p = 0"
        return pt
    dim = cfg.fock_cutoff
    while True:
        H, channels = kerr_cavity_model(
            dim, -delta_prime + shift, eff.eta, 1.0 + eff.kappa_a_L, eff.kappa_a_NL,
            math.sqrt(cfg.kappa_e1) * cfg.eps_p,
        )
        try:
            rho = steady_state(build_liouvillian(H, channels))
            check_truncation(rho)
            break
        except TruncationError as exc:
            if 2 * dim > MAX_FOCK_CUTOFF:
                pt.error = f"truncation inadequate at cutoff {dim}: {exc}"
                return pt
            dim *= 2
        except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
            pt.error = f"{type(exc).__name__}: {exc}"
            return pt
    n = mean_photon_number(rho)
    pt.mean_n = n
    pt.transmission = cfg.kappa_e2 * n / cfg.eps_p**2
    pt.g2_0 = g2_zero(rho)
    pt.fock_cutoff = dim
    return pt


def _solve_star(args):
    return solve_point(*args)


def transmission_sweep(cfg: EffectiveCavityConfig, workers: int = 1) -> list[SweepPoint]:
    """Transmission, g2(0), photon number and rates over ``cfg.detuning_grid``.

    Failed points carry an ``error`` string instead of raising.
    """
    tasks = [(cfg, d) for d in cfg.detuning_grid]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_star, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [solve_point(*t) for t in tasks]


def weak_drive_g2_analytic(kappa_t: float, kappa_nl: float, eta: float, delta_eff: float) -> float:
    """Weak-drive limit of g2(0) from the {|0>, |1>, |2>} amplitude equations."""
    if kappa_t <= 0:
        raise ValueError("kappa_t must be > 0")
    num = 4 * (delta_eff**2 + kappa_t**2 / 4)
    den = (2 * delta_eff + 2 * eta) ** 2 + (kappa_t + kappa_nl) ** 2
    return num / den


def extract_fwhm(sweep, values=None) -> float:
    """Full width at half maximum of the transmission.

    ``sweep`` is a list of :class:`SweepPoint`, or a detuning array when
    ``values`` holds the matching transmissions. Crossings are found by linear
    interpolation between the grid points that bracket half maximum.
    """
    if values is None:
        pts = [p for p in sweep if p.ok]
        x = np.array([p.delta_prime for p in pts])
        y = np.array([p.transmission for p in pts])
    else:
        x = np.asarray(sweep, dtype=float)
        y = np.asarray(values, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    if x.size < 3:
        raise ValueError("need at least three points to extract a linewidth")
    k = int(np.argmax(y))
    if k == 0 or k == x.size - 1:
        raise ValueError("transmission maximum sits at the edge of the grid")
    half = y[k] / 2

    def crossing(indices):
        prev = k
        for i in indices:
            if y[i] <= half:
                return x[prev] + (half - y[prev]) * (x[i] - x[prev]) / (y[i] - y[prev])
            prev = i
        raise ValueError("half-maximum crossing not bracketed by the grid")

    left = crossing(range(k - 1, -1, -1))
    right = crossing(range(k + 1, x.size))
    return float(right - left)
