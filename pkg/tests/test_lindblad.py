import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from nlblockade.effective import EffectiveCavityConfig, build_effective_model, kerr_cavity_model
from nlblockade.errors import DegenerateSteadyStateError, TruncationError
from nlblockade.fock import annihilation_op, coherent_dm, fock_dm, number_op, trace_distance
from nlblockade.lindblad import (CollapseChannel, Liouvillian, TimeSeries, build_liouvillian,
                                 check_truncation, evolve, evolve_to_steady_state,
                                 fock_probabilities, fock_rate_step, g2_tau, g2_zero,
                                 mean_photon_number, steady_state)


def decay_liouvillian(dim, kappa_l=1.0, kappa_nl=0.0, H=None):
    a = annihilation_op(dim)
    H = np.zeros((dim, dim)) if H is None else H
    return build_liouvillian(H, [CollapseChannel(a, kappa_l), CollapseChannel(a @ a, kappa_nl)])


@pytest.fixture(scope="module")
def resonant_model():
    H, ch = build_effective_model(EffectiveCavityConfig(), 0.0)
    L = build_liouvillian(H, ch)
    return L, steady_state(L)


@pytest.fixture(scope="module")
def small_resonant_model():
    # two-photon loss makes high Fock levels stiff for explicit propagation;
    # at <n> ~ 0.06 eight levels are ample
    H, ch = build_effective_model(EffectiveCavityConfig(fock_cutoff=8), 0.0)
    L = build_liouvillian(H, ch)
    rho = steady_state(L)
    check_truncation(rho)
    return L, rho


def test_collapse_channel_rejects_negative_rate():
    with pytest.raises(ValueError):
        CollapseChannel(annihilation_op(3), -1.0)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        build_liouvillian(np.zeros((3, 3)), [CollapseChannel(annihilation_op(4), 1.0)])
    with pytest.raises(ValueError):
        build_liouvillian(np.zeros((3, 4)))


@given(st.integers(2, 6), st.floats(0, 3), st.floats(0, 3), st.floats(-2, 2), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_trace_preservation(dim, kl, knl, drive, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = x + x.conj().T + drive * number_op(dim)
    L = decay_liouvillian(dim, kl, knl, H)
    assert L.trace_defect() < 1e-9


def test_single_photon_decay_exponential():
    L = decay_liouvillian(4)
    for t in (0.3, 1.0, 2.5):
        rho = evolve(L, fock_dm(4, 1), t)
        assert rho[1, 1].real == pytest.approx(math.exp(-t), abs=1e-7)


def test_evolve_zero_time_is_identity():
    rho0 = coherent_dm(5, 0.4)
    out = evolve(decay_liouvillian(5), rho0, 0.0)
    np.testing.assert_array_equal(out, rho0)


def test_number_conserving_hamiltonian_keeps_diagonal():
    dim = 5
    L = build_liouvillian(1.7 * number_op(dim))
    rho0 = np.diag([0.1, 0.2, 0.3, 0.25, 0.15]).astype(complex)
    rho = evolve(L, rho0, 3.0)
    np.testing.assert_allclose(rho, rho0, atol=1e-11)


def test_two_photon_decay():
    knl = 0.7
    L = decay_liouvillian(5, 0.0, knl)
    for t in (0.2, 1.0):
        p = fock_probabilities(evolve(L, fock_dm(5, 2), t))
        want = math.exp(-2 * knl * t)
        assert p[2] == pytest.approx(want, abs=1e-8)
        assert p[0] == pytest.approx(1 - want, abs=1e-8)


def test_evolve_t_eval_samples():
    L = decay_liouvillian(3)
    ts = np.array([0.0, 0.5, 1.0, 2.0])
    states = evolve(L, fock_dm(3, 1), 2.0, t_eval=ts)
    np.testing.assert_allclose(states[:, 1, 1].real, np.exp(-ts), atol=1e-8)


def test_evolve_negative_time_rejected():
    with pytest.raises(ValueError):
        evolve(decay_liouvillian(3), fock_dm(3, 0), -1.0)


@pytest.mark.parametrize("kt", [1.0, 1.3])
def test_driven_cavity_coherent_steady_state(kt):
    dim, ke1, eps = 15, 0.45, 0.3
    drive = math.sqrt(ke1) * eps
    H, ch = kerr_cavity_model(dim, 0.0, 0.0, kt, 0.0, drive)
    rho = steady_state(build_liouvillian(H, ch))
    assert mean_photon_number(rho) == pytest.approx(4 * ke1 * eps**2 / kt**2, rel=1e-9)
    assert g2_zero(rho) == pytest.approx(1.0, abs=1e-8)


def test_undriven_cavity_relaxes_to_vacuum():
    rho = steady_state(decay_liouvillian(6, 0.5, 0.2, 0.3 * number_op(6)))
    np.testing.assert_allclose(rho, fock_dm(6, 0), atol=1e-12)


def test_steady_state_methods_agree():
    H, ch = kerr_cavity_model(8, 0.3, 0.2, 1.0, 2.0, 0.4)
    L = build_liouvillian(H, ch)
    ref = steady_state(L, method="dense")
    for m in ("sparse", "iterative", "propagate"):
        assert trace_distance(steady_state(L, method=m), ref) < 1e-8, m


def test_degenerate_kernel_reported():
    L = build_liouvillian(number_op(3))
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(L, method="dense")
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(L, method="sparse")


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        steady_state(decay_liouvillian(3), method="magic")


def test_residual_bound(resonant_model):
    L, rho = resonant_model
    assert np.linalg.norm(L.generator @ rho.ravel()) <= 1e-10 * L.norm()


def test_long_evolution_matches_steady_state(small_resonant_model):
    L, rho_ss = small_resonant_model
    rho = evolve_to_steady_state(L, fock_dm(L.dim, 0))
    assert trace_distance(rho, rho_ss) < 1e-6


def test_poisson_fock_probabilities():
    p = fock_probabilities(coherent_dm(30, math.sqrt(0.6)))
    np.testing.assert_allclose(p[:3], [0.5488, 0.3293, 0.0988], atol=5e-5)
    assert np.all(p >= -1e-9)
    np.testing.assert_array_equal(fock_probabilities(fock_dm(4, 2)), [0, 0, 1, 0])


def test_fock_probabilities_rejects_unnormalized():
    with pytest.raises(ValueError):
        fock_probabilities(2 * fock_dm(3, 0))


def test_g2_zero_reference_states():
    assert g2_zero(coherent_dm(40, 1.2)) == pytest.approx(1.0, abs=1e-9)
    assert g2_zero(fock_dm(4, 1)) == 0.0
    assert g2_zero(fock_dm(4, 2)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        g2_zero(fock_dm(4, 0))


def test_g2_tau_coherent_cavity_is_flat():
    H, ch = kerr_cavity_model(12, 0.2, 0.0, 1.0, 0.0, 0.2)
    L = build_liouvillian(H, ch)
    series = g2_tau(L, steady_state(L), np.linspace(0, 5, 11))
    np.testing.assert_allclose(series.values, 1.0, atol=1e-6)


def test_g2_tau_starts_at_g2_zero_and_decorrelates(resonant_model):
    L, rho = resonant_model
    taus = np.linspace(0, 20, 41)
    s = g2_tau(L, rho, taus)
    assert s.values[0] == pytest.approx(g2_zero(rho), abs=1e-8)
    assert np.all(np.diff(s.values) >= -1e-4)
    assert s.values[-1] == pytest.approx(1.0, rel=0.01)


def test_g2_tau_long_delay_matches_direct_evolution(small_resonant_model):
    # oracle: propagate a rho a^dag to convergence and normalize
    L, rho = small_resonant_model
    a = annihilation_op(L.dim)
    x = a @ rho @ a.conj().T
    xt = evolve(L, x, 30.0)
    n = mean_photon_number(rho)
    direct = np.trace(number_op(L.dim) @ xt).real / n**2
    assert g2_tau(L, rho, [0.0, 30.0]).values[-1] == pytest.approx(direct, rel=1e-6)


def test_g2_tau_methods_agree():
    H, ch = kerr_cavity_model(8, 0.0, 0.0, 1.0, 5.0, 0.2)
    L = build_liouvillian(H, ch)
    rho = steady_state(L)
    taus = np.linspace(0, 4, 9)
    np.testing.assert_allclose(g2_tau(L, rho, taus, method="rk").values,
                               g2_tau(L, rho, taus).values, rtol=1e-7)


def test_g2_tau_vacuum_rejected():
    L = decay_liouvillian(4)
    with pytest.raises(ValueError):
        g2_tau(L, fock_dm(4, 0), [0.0, 1.0])


def test_timeseries_requires_increasing_grid():
    TimeSeries(np.array([0.0, 1.0]), np.array([1, 2]))
    with pytest.raises(ValueError):
        TimeSeries(np.array([0.0, 0.0]), np.array([1, 2]))


def test_fock_rate_step_examples():
    np.testing.assert_array_equal(fock_rate_step([0, 1, 0, 0], 1.0, 0.0), [1, -1, 0, 0])
    np.testing.assert_array_equal(fock_rate_step([0, 0, 1, 0], 0.0, 1.0), [2, 0, -2, 0])
    np.testing.assert_array_equal(fock_rate_step([0.2, 0.3, 0.5], 0.0, 0.0), [0, 0, 0])


@given(st.lists(st.floats(0, 1), min_size=3, max_size=15).filter(lambda v: sum(v) > 0.1),
       st.floats(0, 5), st.floats(0, 30))
@settings(max_examples=50, deadline=None)
def test_fock_rate_step_conserves_probability(p, kl, knl):
    p = np.array(p) / sum(p)
    assert abs(fock_rate_step(p, kl, knl).sum()) < 1e-12


def test_master_equation_diagonal_obeys_rate_equation(rng):
    dim, kl, knl = 12, 1.02812, 28.12
    L = decay_liouvillian(dim, kl, knl)
    for _ in range(100):
        p = rng.random(dim)
        p /= p.sum()
        drho = L.apply(np.diag(p).astype(complex))
        np.testing.assert_allclose(np.diag(drho).real, fock_rate_step(p, kl, knl), rtol=0, atol=1e-12)


def test_truncation_check():
    assert check_truncation(fock_dm(5, 1)) == 0.0
    with pytest.raises(TruncationError) as info:
        check_truncation(fock_dm(5, 4))
    assert info.value.top_population == pytest.approx(1.0)
    two_mode = np.kron(fock_dm(3, 0), fock_dm(4, 3))
    with pytest.raises(TruncationError):
        check_truncation(two_mode, dims=[3, 4])


def test_liouvillian_apply_matches_commutator():
    dim = 4
    H = number_op(dim) + 0.3 * (annihilation_op(dim) + annihilation_op(dim).conj().T)
    L = build_liouvillian(H)
    rho = coherent_dm(dim, 0.5)
    np.testing.assert_allclose(L.apply(rho), -1j * (H @ rho - rho @ H), atol=1e-14)
    assert isinstance(L, Liouvillian) and sp.issparse(L.generator)
