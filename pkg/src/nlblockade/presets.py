"""Physical parameter sets converted to units of the total cavity decay rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import hbar


@dataclass(frozen=True)
class PhysicalPreset:
    """Rates in units of 2 pi MHz."""

    name: str
    kappa: float
    kappa_e1: float
    kappa_e2: float
    kappa_i: float
    g: float
    hyperfine_splitting: float
    gamma_atomic: float
    wavelength: float

    def __post_init__(self):
        for k in ("kappa", "kappa_e1", "kappa_e2", "g", "hyperfine_splitting", "gamma_atomic"):
            if getattr(self, k) <= 0:
                raise ValueError(f"{k} must be > 0")
        if self.kappa_i < 0:
            raise ValueError("kappa_i must be >= 0")

    @property
    def kappa_rad_s(self) -> float:
        return 2 * math.pi * 1e6 * self.kappa

    def ensemble_overrides(self) -> dict:
        """Atomic couplings, decays and hyperfine detunings in kappa units."""
        k = self.kappa
        split = self.hyperfine_splitting / k
        return {
            "g1": self.g / k,
            "g2": self.g / k,
            "Gamma21": self.gamma_atomic / k,
            "Gamma23": self.gamma_atomic / k,
            "Gamma43": self.gamma_atomic / k,
            "delta23": split,
            "delta21_res": split,
        }

    def cavity_overrides(self) -> dict:
        # normalize so the three port rates sum to one exactly
        total = self.kappa_e1 + self.kappa_e2 + self.kappa_i
        return {
            "kappa_e1": self.kappa_e1 / total,
            "kappa_e2": self.kappa_e2 / total,
            "kappa_i": self.kappa_i / total,
        }

    def eps_p_from_power(self, power: float) -> float:
        """Dimensionless probe amplitude ``sqrt(P / hbar w_p) / sqrt(kappa)`` for power in W."""
        if power < 0:
            raise ValueError("power must be >= 0")
        omega_p = 2 * math.pi * SPEED_OF_LIGHT / self.wavelength
        return math.sqrt(power / (hbar * omega_p)) / math.sqrt(self.kappa_rad_s)


PRESETS = {
    "rb87-d1": PhysicalPreset(
        name="rb87-d1",
        kappa=1.32,
        kappa_e1=0.6,
        kappa_e2=0.6,
        kappa_i=0.12,
        g=0.2,
        hyperfine_splitting=6020.0,
        gamma_atomic=6.0,
        wavelength=795e-9,
    ),
}


def get_preset(name: str) -> PhysicalPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
