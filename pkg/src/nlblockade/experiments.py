"""Scenario runners behind the command-line interface.

Every scenario takes a fully resolved parameter tree (see
:data:`SCENARIO_DEFAULTS`) and returns a :class:`Table`. Runners never read
files or global state, so identical parameters give identical tables.
"""
from __future__ import annotations

import copy
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .atomic import (NTypeEnsembleParams, cavity_pull, effective_params, linear_responses,
                     one_photon_loss)
from .cascade import CascadeConfig, cascade_statistics
from .classical_fp import (FPGeometry, eit_dispersion, linear_dispersion, linear_dispersion_linewidth,
                           narrowed_linewidth, no_dispersion)
from .effective import (EffectiveCavityConfig, build_effective_model, default_eps_p, extract_fwhm,
                        geometric_detuning_grid, transmission_sweep)
from .lindblad import build_liouvillian, g2_tau, steady_state
from .microscopic import MicroscopicConfig, fit_cavity_line
from .presets import get_preset

_ENSEMBLE = NTypeEnsembleParams().as_dict()
_CAVITY = {"kappa_e1": 0.45, "kappa_e2": 0.45, "kappa_i": 0.1, "eps_p": default_eps_p(0.45),
           "fock_cutoff": 20}

SCENARIO_DEFAULTS: dict[str, dict] = {
    "rates-linear": {
        # coupling laser resonant with 3-2; x axis is w'_cav - w_21
        "ensemble": {**_ENSEMBLE, "delta23": 0.0},
        "grid": {"start": -30.0, "stop": 30.0, "n": 601},
    },
    "rates-nonlinear": {
        # x axis is w_43 - w'_cav at two-photon resonance
        "ensemble": dict(_ENSEMBLE),
        "grid": {"start": -0.2, "stop": 0.2, "n": 401},
    },
    "spectrum-g2": {
        "ensemble": dict(_ENSEMBLE),
        "cavity": dict(_CAVITY),
        "grid": {"span": 2e-3, "n": 200, "min_step": 1e-6},
    },
    "g2-tau": {
        "ensemble": dict(_ENSEMBLE),
        "cavity": dict(_CAVITY),
        "tau": {"stop": 20.0, "n": 201, "delta_prime": 0.0},
    },
    "cascade-fock": {
        "cascade": {"kappa_d1": 0.5, "kappa_d2": 0.5, "kappa_e1": 0.5, "kappa_e2": 0.5,
                    "kappa_i": 0.0, "kappa_a_L": 0.0, "kappa_a_NL": 28.0, "eta": 0.0,
                    "nbar": 0.6, "dim_d": 12, "dim_a": 12, "rates_from_ensemble": False},
        # only read when rates_from_ensemble is true (resonant probe)
        "ensemble": dict(_ENSEMBLE),
    },
    "linewidth": {
        "ensemble": dict(_ENSEMBLE),
        "geometry": {"L": 0.8, "l_m": 0.05, "r1": math.sqrt(0.99), "t1": math.sqrt(0.01),
                     "r2": math.sqrt(0.99), "alpha_loss": 0.0, "q": int(round(0.8 / 795e-9))},
        "dispersion": {"kappa_physical_MHz": 1.32, "linear_slope": 1e-15},
    },
    "oracle": {
        "ensemble": {**NTypeEnsembleParams(N=1).as_dict(), "g2": 0.0, "omega_c": 2.0,
                     "delta23": 0.0, "delta21_res": 20.0, "delta43_res": -4560.0},
        "microscopic": {"g1_values": [0.05, 0.1, 0.15], "fock_cutoff": 3, "eps_p": 1e-3,
                        "kappa_e1": 0.5, "kappa_e2": 0.5, "kappa_i": 0.0, "span": 1.5,
                        "n_points": 61},
    },
}

SCENARIOS = tuple(SCENARIO_DEFAULTS)


class ConfigError(ValueError):
    pass


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _merge(base: dict, override: dict, path: str) -> None:
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown parameter {path}{key}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}{key} must be a table")
            _merge(base[key], value, f"{path}{key}.")
        else:
            base[key] = value


def resolve_params(scenario: str, file_params: dict | None = None, preset: str | None = None,
                   fock_cutoff: int | None = None) -> dict:
    """Defaults, then preset, then file values, then the cutoff flag."""
    if scenario not in SCENARIO_DEFAULTS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    params = copy.deepcopy(SCENARIO_DEFAULTS[scenario])
    if preset is not None:
        try:
            pr = get_preset(preset)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if "ensemble" in params:
            params["ensemble"].update(pr.ensemble_overrides())
        if "cavity" in params:
            params["cavity"].update(pr.cavity_overrides())
            params["cavity"]["eps_p"] = default_eps_p(params["cavity"]["kappa_e1"])
        if "dispersion" in params:
            params["dispersion"]["kappa_physical_MHz"] = pr.kappa
    _merge(params, file_params or {}, "")
    if fock_cutoff is not None:
        if fock_cutoff < 3:
            raise ConfigError("--fock-cutoff must be >= 3")
        if "cavity" in params:
            params["cavity"]["fock_cutoff"] = fock_cutoff
        elif "cascade" in params:
            params["cascade"]["dim_d"] = params["cascade"]["dim_a"] = fock_cutoff
        elif "microscopic" in params:
            params["microscopic"]["fock_cutoff"] = fock_cutoff
        else:
            raise ConfigError(f"--fock-cutoff does not apply to {scenario}")
    validate(scenario, params)
    return params


def _grid(g: dict) -> np.ndarray:
    if int(g["n"]) < 1:
        raise ConfigError("grids must be nonempty")
    return np.linspace(float(g["start"]), float(g["stop"]), int(g["n"]))


def _ensemble(params) -> NTypeEnsembleParams:
    return NTypeEnsembleParams.from_dict(params["ensemble"])


def _cavity_config(params, grid=()) -> EffectiveCavityConfig:
    c = params["cavity"]
    return EffectiveCavityConfig(kappa_e1=c["kappa_e1"], kappa_e2=c["kappa_e2"], kappa_i=c["kappa_i"],
                                 eps_p=c["eps_p"], detuning_grid=tuple(grid),
                                 atom_params=_ensemble(params), fock_cutoff=int(c["fock_cutoff"]))


def _cascade_config(params) -> CascadeConfig:
    c = dict(params["cascade"])
    nbar = c.pop("nbar")
    if c.pop("rates_from_ensemble"):
        e = effective_params(_ensemble(params), 0.0, strict=True)
        c.update(kappa_a_L=e.kappa_a_L, kappa_a_NL=e.kappa_a_NL, eta=e.eta)
    return CascadeConfig(**c, target_nbar=nbar)


def _geometry(params) -> FPGeometry:
    return FPGeometry(**params["geometry"])


def validate(scenario: str, params: dict) -> None:
    """Build every typed object the scenario needs, so bad input fails before compute."""
    try:
        if "ensemble" in params:
            _ensemble(params)
        if "grid" in params:
            if scenario == "spectrum-g2":
                if int(params["grid"]["n"]) < 3:
                    raise ConfigError("spectrum grid needs at least 3 points")
            else:
                _grid(params["grid"])
        if "cavity" in params:
            _cavity_config(params)
        if "tau" in params and (params["tau"]["stop"] <= 0 or int(params["tau"]["n"]) < 2):
            raise ConfigError("tau grid needs stop > 0 and n >= 2")
        if "cascade" in params:
            _cascade_config(params)
        if "geometry" in params:
            _geometry(params)
        if "microscopic" in params:
            m = params["microscopic"]
            if not m["g1_values"] or int(m["n_points"]) < 5:
                raise ConfigError("oracle needs g1 values and at least 5 probe points")
            MicroscopicConfig(fock_cutoff=int(m["fock_cutoff"]))
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid {scenario} parameters: {exc}") from None


def run_rates_linear(params: dict, workers: int = 1) -> Table:
    p = _ensemble(params)
    x = _grid(params["grid"])
    # w'_cav - w_21 = x at fixed transitions: delta21 = -x
    p = p.replace(delta21_res=0.0)
    resp = linear_responses(p, x)
    pull = cavity_pull(p, x)
    F1 = np.asarray(resp.F1)
    kl = one_photon_loss(p, x)
    t = Table(["omega_cav_offset", "delta_omega_cav", "kappa_a_L", "F1_re", "F1_im"])
    for i in range(x.size):
        t.rows.append([x[i], pull[i], kl[i], F1[i].real, F1[i].imag])
    return t


def run_rates_nonlinear(params: dict, workers: int = 1) -> Table:
    p = _ensemble(params)
    x = _grid(params["grid"])
    t = Table(["delta43", "kappa_a_NL", "eta", "kappa_a_L", "delta_omega_cav"])
    for d43 in x:
        e = effective_params(p.replace(delta43_res=float(d43)), 0.0)
        t.rows.append([d43, e.kappa_a_NL, e.eta, e.kappa_a_L, e.delta_omega_cav])
    return t


def run_spectrum_g2(params: dict, workers: int = 1) -> Table:
    g = params["grid"]
    grid = geometric_detuning_grid(float(g["span"]), int(g["n"]), float(g["min_step"]))
    sweep = transmission_sweep(_cavity_config(params, grid), workers=workers)
    t = Table(["delta_prime", "transmission", "g2_0", "mean_n", "kappa_a_L", "kappa_a_NL", "eta",
               "dispersive_shift", "fock_cutoff", "status"])
    for s in sweep:
        e = s.eff
        t.rows.append([s.delta_prime, s.transmission, s.g2_0, s.mean_n, e.kappa_a_L, e.kappa_a_NL,
                       e.eta, s.shift, s.fock_cutoff, "ok" if s.ok else s.error])
        if not s.ok:
            t.failures.append(f"delta_prime={s.delta_prime!r}: {s.error}")
    try:
        t.summary["fwhm"] = extract_fwhm(sweep)
    except ValueError as exc:
        t.summary["fwhm_error"] = str(exc)
    return t


def run_g2_tau(params: dict, workers: int = 1) -> Table:
    cfg = _cavity_config(params)
    tau = params["tau"]
    H, channels = build_effective_model(cfg, float(tau["delta_prime"]))
    L = build_liouvillian(H, channels)
    rho = steady_state(L)
    taus = np.linspace(0.0, float(tau["stop"]), int(tau["n"]))
    series = g2_tau(L, rho, taus)
    t = Table(["tau", "g2"])
    t.rows.extend([float(a), float(b)] for a, b in zip(series.times, series.values))
    return t


def run_cascade_fock(params: dict, workers: int = 1) -> Table:
    cfg = _cascade_config(params)
    stats = cascade_statistics(cfg)
    n = max(s.probabilities.size for s in stats.values())
    t = Table(["n", "P_incident", "P_transmitted", "P_reflected"])
    t.summary["resolved_cascade"] = cfg.as_dict()
    t.summary["mean_n"] = {m: s.mean_n for m, s in stats.items()}
    for k in range(n):
        t.rows.append([k] + [float(stats[m].probabilities[k]) if k < stats[m].probabilities.size else 0.0
                             for m in ("d", "a", "c")])
    return t


def run_linewidth(params: dict, workers: int = 1) -> Table:
    geom = _geometry(params)
    disp = params["dispersion"]
    kappa_phys = 2 * math.pi * 1e6 * float(disp["kappa_physical_MHz"])
    slope = float(disp["linear_slope"])
    profiles = [
        ("none", no_dispersion, geom.bare_linewidth),
        ("linear", linear_dispersion(slope), linear_dispersion_linewidth(geom, slope)),
        ("eit", eit_dispersion(geom, _ensemble(params), kappa_phys), math.nan),
    ]
    t = Table(["profile", "delta_plus", "delta_minus", "delta_omega_prime", "closed_form",
               "bare_linewidth", "delta_omega_prime_over_kappa"])
    for name, chi, closed in profiles:
        r = narrowed_linewidth(geom, chi)
        t.rows.append([name, r.delta_plus, r.delta_minus, r.delta_omega_prime, closed,
                       geom.bare_linewidth, r.delta_omega_prime / kappa_phys])
    return t


def _oracle_point(args):
    ens, m, g1 = args
    cfg = MicroscopicConfig(
        n_atoms=1, fock_cutoff=int(m["fock_cutoff"]), atom_params=ens.replace(g1=g1),
        eps_p=float(m["eps_p"]), kappa_e1=float(m["kappa_e1"]), kappa_e2=float(m["kappa_e2"]),
        kappa_i=float(m["kappa_i"]),
    )
    det = np.linspace(-1, 1, int(m["n_points"])) * float(m["span"]) * cfg.kappa
    fit = fit_cavity_line(cfg, det)
    return fit.pull, fit.added_loss


def run_oracle(params: dict, workers: int = 1) -> Table:
    ens = _ensemble(params).replace(N=1)
    m = params["microscopic"]
    g1s = [float(g) for g in m["g1_values"]]
    tasks = [(ens, m, g) for g in g1s]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = list(pool.map(_oracle_point, tasks))
    else:
        results = [_oracle_point(a) for a in tasks]
    t = Table(["g1", "pull", "added_width", "pull_over_g1sq", "added_width_over_g1sq",
               "closed_form_pull", "closed_form_loss"])
    for g1, (pull, width) in zip(g1s, results):
        p1 = ens.replace(g1=g1)
        t.rows.append([g1, pull, width, pull / g1**2, width / g1**2,
                       cavity_pull(p1, 0.0), one_photon_loss(p1, 0.0)])
    return t


RUNNERS = {
    "rates-linear": run_rates_linear,
    "rates-nonlinear": run_rates_nonlinear,
    "spectrum-g2": run_spectrum_g2,
    "g2-tau": run_g2_tau,
    "cascade-fock": run_cascade_fock,
    "linewidth": run_linewidth,
    "oracle": run_oracle,
}


def run_scenario(scenario: str, params: dict, workers: int = 1) -> Table:
    return RUNNERS[scenario](params, workers)
