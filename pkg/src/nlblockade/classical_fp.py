"""Classical Fabry-Perot cavity with an intracavity dispersive medium.

The round-trip phase is ``phi(w) = w L / c + w chi'(w) l_m / (2 c)`` and the
intracavity intensity follows the Airy form. Steep normal dispersion slows
the phase accumulation near resonance and narrows the transmission line.

Optical frequencies (~1e15 rad/s) and linewidths (~1e3..1e7 rad/s) differ by
up to twelve orders of magnitude, so every frequency argument here is the
offset ``delta = w - w_q`` from the bare resonance ``w_q = q 2 pi c / L``.
Dispersion profiles are callables of that offset. The phase is evaluated
relative to ``2 pi q`` so no precision is lost to the large ``w L / c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.optimize import bisect

from .atomic import NTypeEnsembleParams, cavity_pull
from .lindblad import TimeSeries

DispersionProfile = Callable[[np.ndarray], np.ndarray]

# Rb D1 probe wavelength, used to pick the default longitudinal mode
PROBE_WAVELENGTH = 795e-9
# physical total cavity decay of the reference setup [rad/s]
KAPPA_PHYSICAL = 2 * math.pi * 1.32e6


class RootNotBracketedError(RuntimeError):
    """No half-intensity crossing inside the scanned band."""


@dataclass(frozen=True)
class FPGeometry:
    """Ring/standing-wave cavity geometry; lengths are per round trip."""

    L: float = 0.8
    l_m: float = 0.05
    r1: float = math.sqrt(0.99)
    t1: float = math.sqrt(0.01)
    r2: float = math.sqrt(0.99)
    alpha_loss: float = 0.0
    q: int | None = None

    def __post_init__(self):
        if not (0 < self.r1 < 1 and 0 < self.r2 < 1):
            raise ValueError("mirror reflectivities must lie in (0, 1)")
        if self.t1 < 0 or self.r1**2 + self.t1**2 > 1 + 1e-12:
            raise ValueError("need r1^2 + t1^2 <= 1")
        if not (self.L >= self.l_m > 0):
            raise ValueError("need L >= l_m > 0")
        if self.alpha_loss < 0:
            raise ValueError("alpha_loss must be >= 0")
        if self.q is None:
            object.__setattr__(self, "q", int(round(self.L / PROBE_WAVELENGTH)))
        if self.q < 1:
            raise ValueError("mode index q must be >= 1")

    def replace(self, **changes) -> "FPGeometry":
        return replace(self, **changes)

    @property
    def omega_cav(self) -> float:
        return self.q * 2 * math.pi * SPEED_OF_LIGHT / self.L

    @property
    def fsr(self) -> float:
        return 2 * math.pi * SPEED_OF_LIGHT / self.L

    @property
    def g_rt(self) -> float:
        """Modulus of the round-trip gain."""
        return self.r1 * self.r2 * math.exp(-self.alpha_loss * self.L)

    @property
    def half_width_phase(self) -> float:
        """Half-phase offset at half maximum, ``arcsin((1 - g)/(2 sqrt g))``."""
        g = self.g_rt
        return math.asin((1 - g) / (2 * math.sqrt(g)))

    @property
    def bare_linewidth(self) -> float:
        """FWHM of the empty cavity [rad/s]."""
        return 4 * SPEED_OF_LIGHT / self.L * self.half_width_phase


def no_dispersion(delta):
    return np.zeros_like(np.asarray(delta, dtype=float))


def linear_dispersion(slope: float) -> DispersionProfile:
    """``chi'(delta) = slope * delta``; slope > 0 is normal dispersion."""
    return lambda delta: slope * np.asarray(delta, dtype=float)


def eit_dispersion(geom: FPGeometry, params: NTypeEnsembleParams | None = None,
                   kappa_physical: float = KAPPA_PHYSICAL) -> DispersionProfile:
    """Susceptibility that reproduces the ensemble cavity pull.

    Inverts ``delta_omega_cav = -(l_m / 2L) w_cav chi'`` with the pull taken
    from the adiabatically eliminated response at ``delta_prime = delta /
    kappa_physical``.
    """
    p = params or NTypeEnsembleParams()
    scale = -2 * geom.L / (geom.l_m * geom.omega_cav)

    def chi(delta):
        dp = np.asarray(delta, dtype=float) / kappa_physical
        return scale * kappa_physical * np.asarray(cavity_pull(p, dp))

    return chi


def half_phase_offset(geom: FPGeometry, chi: DispersionProfile, delta):
    """``phi(w_q + delta) / 2 - q pi``."""
    delta = np.asarray(delta, dtype=float)
    c = SPEED_OF_LIGHT
    return (delta * geom.L / (2 * c)
            + (geom.omega_cav + delta) * np.asarray(chi(delta)) * geom.l_m / (4 * c))


def round_trip_gain(geom: FPGeometry, chi: DispersionProfile, delta):
    """Complex round-trip gain at offset ``delta`` (phase reduced mod 2 pi)."""
    phase = 2 * half_phase_offset(geom, chi, delta)
    out = geom.g_rt * np.exp(-1j * phase)
    return complex(out) if np.ndim(out) == 0 else out


def intensity_spectrum(geom: FPGeometry, chi: DispersionProfile, deltas) -> TimeSeries:
    """Intracavity intensity on a grid of offsets (``times`` holds the offsets)."""
    deltas = np.asarray(deltas, dtype=float)
    g = geom.g_rt
    s = np.sin(half_phase_offset(geom, chi, deltas))
    T = geom.t1**2 / ((1 - g) ** 2 + 4 * g * s**2)
    return TimeSeries(times=deltas, values=T)


class LinewidthResult(NamedTuple):
    delta_plus: float
    delta_minus: float
    delta_omega_prime: float
    omega_cav: float

    @property
    def omega_plus(self) -> float:
        return self.omega_cav + self.delta_plus

    @property
    def omega_minus(self) -> float:
        return self.omega_cav + self.delta_minus


def _scan_root(f, direction: int, window: float, n: int = 600) -> float:
    """First sign change of ``f`` going outward from zero, refined by bisection."""
    # geometric scan resolves both very narrow and bare-width lines
    pts = np.concatenate(([0.0], np.geomspace(window * 1e-12, window, n))) * direction
    vals = f(pts)
    f0 = vals[0]
    for i in range(1, pts.size):
        if np.sign(vals[i]) != np.sign(f0) or vals[i] == 0:
            lo, hi = pts[i - 1], pts[i]
            if vals[i] == 0:
                return float(hi)
            scalar = lambda x: float(f(np.array([x]))[0])  # noqa: E731
            return bisect(scalar, min(lo, hi), max(lo, hi), xtol=1e-300, rtol=1e-12, maxiter=2000)
    raise RootNotBracketedError(f"no half-maximum crossing within {window:.3g} rad/s")


def narrowed_linewidth(geom: FPGeometry, chi: DispersionProfile, window: float | None = None,
                       widen: float = 10.0) -> LinewidthResult:
    """Half-intensity points ``w_+-`` and the modified linewidth ``w_+ - w_-``.

    The crossings solve ``phi/2 - q pi = +-arcsin((1 - g)/(2 sqrt g))``. Each
    side is scanned outward from the bare resonance; if no crossing is found
    the window is widened once by ``widen`` (capped at half a free spectral
    range) before giving up.
    """
    target = geom.half_width_phase
    if window is None:
        window = 5 * geom.bare_linewidth
    cap = geom.fsr / 2

    roots = []
    for sign in (1, -1):
        f = lambda d, s=sign: half_phase_offset(geom, chi, d) - s * target  # noqa: E731
        try:
            roots.append(_scan_root(f, sign, min(window, cap)))
        except RootNotBracketedError:
            roots.append(_scan_root(f, sign, min(window * widen, cap)))
    d_plus, d_minus = roots
    return LinewidthResult(delta_plus=d_plus, delta_minus=d_minus,
                           delta_omega_prime=d_plus - d_minus, omega_cav=geom.omega_cav)


def linear_dispersion_linewidth(geom: FPGeometry, slope: float) -> float:
    """First-order closed form for ``chi' = slope * delta``."""
    return geom.bare_linewidth / (1 + geom.l_m / (2 * geom.L) * geom.omega_cav * slope)
