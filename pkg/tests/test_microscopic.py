import math

import numpy as np
import pytest

from nlblockade.atomic import NTypeEnsembleParams, cavity_pull, one_photon_loss
from nlblockade.fock import fock_dm, is_hermitian, tensor
from nlblockade.lindblad import build_liouvillian, evolve
from nlblockade.microscopic import (MicroscopicConfig, atomic_projector, build_full_model,
                                    fit_cavity_line, lorentzian, sigma, transmission)

# Lambda subsystem, far-detuned 3-4 transition, EIT resolvable on a coarse probe grid
LAMBDA = NTypeEnsembleParams(N=1, g2=0.0, omega_c=2.0, delta23=0.0, delta21_res=20.0,
                             delta43_res=-4560.0)


@pytest.fixture(scope="module")
def lambda_fits():
    return {g1: fit_cavity_line(MicroscopicConfig(atom_params=LAMBDA.replace(g1=g1)))
            for g1 in (0.05, 0.1, 0.15)}


def test_config_guards():
    with pytest.raises(ValueError):
        MicroscopicConfig(n_atoms=3)
    with pytest.raises(ValueError):
        MicroscopicConfig(fock_cutoff=2)
    with pytest.raises(ValueError):
        MicroscopicConfig(n_atoms=2, fock_cutoff=300)
    assert MicroscopicConfig(n_atoms=2, fock_cutoff=4).dim == 64


def test_sigma_convention():
    s = sigma(1, 2)
    assert s[0, 1] == 1 and s.sum() == 1


@pytest.mark.parametrize("n_atoms", [1, 2])
@pytest.mark.parametrize("delta", [-0.4, 0.0, 1.3])
def test_hamiltonian_hermitian(n_atoms, delta):
    cfg = MicroscopicConfig(n_atoms=n_atoms, delta=delta, eps_p=0.2,
                            atom_params=NTypeEnsembleParams(N=1, omega_c=1.5))
    H, channels = build_full_model(cfg)
    assert is_hermitian(H, atol=1e-13)
    assert len(channels) == 1 + 6 * n_atoms


def test_isolated_excited_state_decay_branching():
    g21, g23 = 1.0, 2.0
    p = NTypeEnsembleParams(N=1, g1=0.0, g2=0.0, omega_c=1e-9, Gamma21=g21, Gamma23=g23,
                            Gamma31=0.0, Gamma43=1.0)
    cfg = MicroscopicConfig(atom_params=p, eps_p=0.0)
    H, ch = build_full_model(cfg)
    rho0 = tensor(sigma(2, 2), fock_dm(cfg.fock_cutoff, 0))
    L = build_liouvillian(H, ch)
    ts = np.array([0.1, 0.5, 2.0])
    states = evolve(L, rho0, ts[-1], t_eval=ts)
    total = g21 + g23
    for t, rho in zip(ts, states):
        pops = [np.trace(atomic_projector(cfg, k) @ rho).real for k in (1, 2, 3)]
        grown = 1 - math.exp(-total * t)
        assert pops[1] == pytest.approx(math.exp(-total * t), abs=1e-8)
        assert pops[0] == pytest.approx(g21 / total * grown, abs=1e-8)
        assert pops[2] == pytest.approx(g23 / total * grown, abs=1e-8)


def test_population_conserved_for_two_driven_atoms():
    p = NTypeEnsembleParams(N=1, g1=0.4, g2=0.3, omega_c=1.0, Gamma41=0.5, delta21_res=0.5,
                            delta23=0.2, delta43_res=-0.3)
    cfg = MicroscopicConfig(n_atoms=2, atom_params=p, eps_p=0.5)
    H, ch = build_full_model(cfg)
    rho0 = tensor(sigma(2, 2), sigma(4, 4), fock_dm(cfg.fock_cutoff, 0))
    states = evolve(build_liouvillian(H, ch), rho0, 3.0, t_eval=np.linspace(0.5, 3.0, 6))
    ops = sum(atomic_projector(cfg, k, j) for k in (1, 2, 3, 4) for j in (0, 1))
    for rho in states:
        assert np.trace(ops @ rho).real == pytest.approx(2.0, abs=1e-8)


def test_empty_line_is_bare_cavity():
    p = LAMBDA.replace(g1=0.0)
    fit = fit_cavity_line(MicroscopicConfig(atom_params=p))
    assert abs(fit.pull) < 1e-9
    assert fit.fwhm == pytest.approx(1.0, rel=1e-6)
    assert fit.amplitude == pytest.approx(1.0, rel=1e-5)  # matched ports


def test_weak_drive_transmission_matches_linear_theory():
    cfg = MicroscopicConfig(atom_params=LAMBDA.replace(g1=0.0), delta=0.3)
    assert transmission(cfg) == pytest.approx(4 * 0.25 / (1 + 4 * 0.09), rel=1e-5)


def test_lorentzian_shape():
    assert lorentzian(0.3, 2.0, 0.3, 1.0) == 2.0
    assert lorentzian(0.8, 2.0, 0.3, 1.0) == pytest.approx(1.0)


def test_pull_matches_closed_form(lambda_fits):
    for g1, fit in lambda_fits.items():
        want = cavity_pull(LAMBDA.replace(g1=g1), 0.0)
        assert fit.pull == pytest.approx(want, rel=0.05)


def test_pull_and_loss_scale_as_g1_squared(lambda_fits):
    pulls = np.array([f.pull / g**2 for g, f in lambda_fits.items()])
    widths = np.array([f.added_loss / g**2 for g, f in lambda_fits.items()])
    assert np.ptp(pulls) < 0.05 * abs(pulls.mean())
    assert np.ptp(widths) < 0.05 * abs(widths.mean())
    # halving g1 quarters the added loss
    assert lambda_fits[0.05].added_loss == pytest.approx(lambda_fits[0.1].added_loss / 4, rel=0.05)
    assert lambda_fits[0.1].added_loss > 0


def test_added_loss_includes_dispersive_slope(lambda_fits):
    # resonance where delta = pull(delta): the width is (kappa + kappa_aL) / (1 - pull'),
    # i.e. kappa_aL + pull' to first order in g1^2
    g1 = 0.1
    p = LAMBDA.replace(g1=g1)
    h = 1e-4
    slope = (cavity_pull(p, h) - cavity_pull(p, -h)) / (2 * h)
    want = one_photon_loss(p, 0.0) + slope
    assert lambda_fits[g1].added_loss == pytest.approx(want, rel=0.02)


def test_eit_cancels_pull():
    p = LAMBDA.replace(g1=0.15, delta21_res=0.0, omega_c=10.0)
    fit = fit_cavity_line(MicroscopicConfig(atom_params=p))
    assert abs(fit.pull) < 1e-9
    # the residual width change is the EIT dispersion, of order -g1^2 / omega_c^2
    assert abs(fit.added_loss) < 5e-4
    assert fit.added_loss == pytest.approx(-(0.15**2) / 10.0**2, rel=0.1)
