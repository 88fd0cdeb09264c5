"""Adiabatically eliminated response of an N-type atomic ensemble.

Level labels follow the usual N scheme: ground states 1 and 3, excited
states 2 and 4. The cavity drives 1-2 and 3-4, a classical coupling laser
drives 3-2. Every rate and detuning is expressed in units of the total cavity
decay rate kappa.

The probe detuning ``delta_prime`` is measured from the pulled cavity
resonance, so the atomic detunings are ``delta21 = delta21_res - delta_prime``
and ``delta43 = delta43_res - delta_prime``. All functions broadcast over
array-valued ``delta_prime``.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, fields, replace

import numpy as np


@dataclass(frozen=True)
class NTypeEnsembleParams:
    N: float = 12.5e6
    g1: float = 0.15
    g2: float = 0.15
    omega_c: float = 10.0
    Gamma21: float = 4.5
    Gamma23: float = 4.5
    Gamma31: float = 1e-5
    Gamma41: float = 0.0
    Gamma42: float = 0.0
    Gamma43: float = 4.5
    delta23: float = 4560.0
    delta21_res: float = 4560.0
    delta43_res: float = -0.0219

    def __post_init__(self):
        if self.N < 0:
            raise ValueError(f"atom number must be >= 0, got {self.N}")
        for name in ("Gamma21", "Gamma23", "Gamma31", "Gamma41", "Gamma42", "Gamma43"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.omega_c <= 0:
            raise ValueError("omega_c must be > 0")

    def replace(self, **changes) -> "NTypeEnsembleParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NTypeEnsembleParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown atom parameters: {sorted(unknown)}")
        return cls(**d)


# Operating point used for the rate sweeps, spectra and correlation scans.
RESONANT_PARAMS = NTypeEnsembleParams()


@dataclass(frozen=True)
class DephasingTable:
    gamma12: float
    gamma13: float
    gamma34: float
    gamma24: float
    gamma23: float
    gamma14: float


@dataclass(frozen=True)
class LinearResponse:
    F1: complex
    F2: complex
    Y1: float
    Y2: float


@dataclass(frozen=True)
class EffectiveParams:
    delta_omega_cav: float
    kappa_a_L: float
    kappa_a_NL: float
    eta: float

    def as_dict(self) -> dict:
        return asdict(self)


def level_decay_totals(p: NTypeEnsembleParams) -> tuple[float, float, float, float]:
    """Total population decay rate out of levels 1..4 (level 1 is stable)."""
    return (
        0.0,
        p.Gamma21 + p.Gamma23,
        p.Gamma31,
        p.Gamma41 + p.Gamma42 + p.Gamma43,
    )


def dephasing_rates(p: NTypeEnsembleParams) -> DephasingTable:
    G1, G2, G3, G4 = level_decay_totals(p)
    return DephasingTable(
        gamma12=(G1 + G2) / 2,
        gamma13=(G1 + G3) / 2,
        gamma34=(G3 + G4) / 2,
        gamma24=(G2 + G4) / 2,
        gamma23=(G2 + G3) / 2,
        gamma14=(G1 + G4) / 2,
    )


def _y_factors(p: NTypeEnsembleParams) -> tuple[float, float]:
    denom = p.Gamma31 * (p.Gamma21 + p.Gamma23)
    if denom == 0:
        raise ValueError("Y1/Y2 are singular: need Gamma31 > 0 and Gamma21 + Gamma23 > 0")
    return (p.Gamma23 + 2 * p.Gamma31) / denom, p.Gamma23 / denom


def linear_responses(p: NTypeEnsembleParams, delta_prime=0.0) -> LinearResponse:
    """F1, F2 (complex, in kappa) and Y1, Y2 (in 1/kappa) at probe detuning ``delta_prime``."""
    Y1, Y2 = _y_factors(p)
    g = dephasing_rates(p)
    d21 = p.delta21_res - np.asarray(delta_prime, dtype=float)
    d43 = p.delta43_res - np.asarray(delta_prime, dtype=float)
    oc2 = abs(p.omega_c) ** 2
    F1 = 1j * d21 + g.gamma12 + oc2 / (1j * (d21 - p.delta23) + g.gamma13)
    F2 = 1j * d43 + g.gamma34 + oc2 / (1j * (d43 - p.delta23) + g.gamma24)
    if np.ndim(F1) == 0:
        F1, F2 = complex(F1), complex(F2)
    return LinearResponse(F1=F1, F2=F2, Y1=Y1, Y2=Y2)


def _rates(p: NTypeEnsembleParams, resp: LinearResponse):
    F1, F2 = np.asarray(resp.F1), np.asarray(resp.F2)
    a1 = np.abs(F1) ** 2
    a2 = np.abs(F2) ** 2
    g1sq, g2sq = p.g1**2, p.g2**2
    # ensemble sum over identical atoms -> factor N
    n = p.N
    dw = -g1sq * n * F1.imag / a1
    kl = 2 * g1sq * n * F1.real / a1
    cross = F1.real / (a2 * a1)
    knl = 4 * g1sq * n * (
        -g1sq * resp.Y1 * F1.real**2 / a1**2 + g2sq * resp.Y2 * F2.real * cross
    )
    eta = 2 * g1sq * n * (
        g1sq * resp.Y1 * F1.imag * F1.real / a1**2 - g2sq * resp.Y2 * F2.imag * cross
    )
    return dw, kl, knl, eta


def effective_params(p: NTypeEnsembleParams, delta_prime=0.0, strict: bool = False) -> EffectiveParams:
    """Cavity pull, one-photon loss, two-photon loss and Kerr coefficient.

    Negative loss rates are unphysical for the adiabatic model; they trigger a
    ``RuntimeWarning`` (or ``ValueError`` with ``strict=True``).
    """
    resp = linear_responses(p, delta_prime)
    dw, kl, knl, eta = _rates(p, resp)
    if np.any(np.asarray(kl) < 0) or np.any(np.asarray(knl) < 0):
        msg = f"negative effective loss rate (kappa_a_L={kl}, kappa_a_NL={knl})"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if np.ndim(dw) == 0:
        dw, kl, knl, eta = float(dw), float(kl), float(knl), float(eta)
    return EffectiveParams(delta_omega_cav=dw, kappa_a_L=kl, kappa_a_NL=knl, eta=eta)


def _inverse_f1(p: NTypeEnsembleParams, delta_prime):
    """``1/F1`` written without dividing by the EIT term, so it stays finite
    (and vanishes) at exact two-photon resonance with ``gamma13 = 0``."""
    g = dephasing_rates(p)
    d21 = p.delta21_res - np.asarray(delta_prime, dtype=float)
    lam = 1j * (d21 - p.delta23) + g.gamma13
    return lam / ((1j * d21 + g.gamma12) * lam + abs(p.omega_c) ** 2)


def cavity_pull(p: NTypeEnsembleParams, delta_prime=0.0):
    """Only the frequency pull; cheaper than :func:`effective_params` and never
    raises on Y1/Y2 singularities."""
    # -Im F1 / |F1|^2 = Im(1/F1)
    out = p.g1**2 * p.N * _inverse_f1(p, delta_prime).imag
    return float(out) if np.ndim(out) == 0 else out


def one_photon_loss(p: NTypeEnsembleParams, delta_prime=0.0):
    out = 2 * p.g1**2 * p.N * _inverse_f1(p, delta_prime).real
    return float(out) if np.ndim(out) == 0 else out


def dispersive_shift(p: NTypeEnsembleParams, delta_prime=0.0):
    """Change of the cavity pull between probe detuning ``delta_prime`` and zero."""
    out = cavity_pull(p, delta_prime) - cavity_pull(p, 0.0)
    return float(out) if np.ndim(out) == 0 else out
