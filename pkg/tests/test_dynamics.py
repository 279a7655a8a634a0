import math
from types import SimpleNamespace

import numpy as np
import pytest

from ersim.dynamics import (PhononModel, PopulationState, PumpConfig, RelaxationParams,
                            boltzmann_factor, branching_matrix, evolve_populations, gamma_of_T,
                            hole_lifetime_vs_field, planck_occupancy, pump_matrix, relaxation_matrix,
                            simulate_spin_pumping, stationary_state, thermal_equilibrium)
from ersim.errors import DomainError, InvalidConfigError, InvalidStateError
from ersim.levels import CONSTANTS, StrengthModel, build_level_scheme, reflect_populations, transition_table

# mpmath references (50 digits), frozen
NBAR_1498THZ_1P4K = 4.9906005531e-23
HF_OVER_K_1498THZ = 71.8927
ADJ_RATIO_994MHZ_1P4K = 0.96647618408795
B0_DEFAULT = 0.0328317791517312


def test_gamma_direct_only():
    p = RelaxationParams(gamma_d=9e-4, gamma_or=0.0)
    assert gamma_of_T(p, 1.4) == pytest.approx(1.26e-3, rel=1e-14)
    assert 1.0 / gamma_of_T(p, 1.6) == pytest.approx(694.444444444444, rel=1e-12)


def test_gamma_all_zero():
    assert gamma_of_T(RelaxationParams(0.0, 0.0, 0.0), 3.0) == 0.0


def test_gamma_three_terms_as_written():
    p = RelaxationParams(gamma_d=1e-3, gamma_r=2e-6, gamma_or=1e-24, f=1.498e12)
    T = 2.0
    h, k = CONSTANTS.planck_h, CONSTANTS.boltzmann_k
    expect = 1e-3 * T + 2e-6 * T**9 + 1e-24 * 1.498e12**3 * math.exp(-h * 1.498e12 / (k * T))
    assert gamma_of_T(p, T) == pytest.approx(expect, rel=1e-14)


def test_gamma_rejects_nonpositive_temperature():
    with pytest.raises(DomainError):
        gamma_of_T(RelaxationParams(), 0.0)
    with pytest.raises(DomainError):
        gamma_of_T(RelaxationParams(), [1.0, -1.0])


def test_relaxation_params_validation():
    with pytest.raises(InvalidConfigError):
        RelaxationParams(gamma_d=-1.0)
    with pytest.raises(InvalidConfigError):
        RelaxationParams(gamma_or=1e-30, f=0.0)


def test_planck_unit_occupancy_at_ln2():
    T = 1.4
    f = math.log(2.0) * CONSTANTS.boltzmann_k * T / CONSTANTS.planck_h
    assert planck_occupancy(f, T) == pytest.approx(1.0, rel=1e-13)


def test_planck_electronic_splitting():
    assert CONSTANTS.planck_h * 1.498e12 / CONSTANTS.boltzmann_k == pytest.approx(HF_OVER_K_1498THZ, rel=1e-6)
    assert planck_occupancy(1.498e12, 1.4) == pytest.approx(NBAR_1498THZ_1P4K, rel=1e-9)


def test_planck_classical_limit():
    f = 1e9
    for T in (10.0, 100.0, 1000.0):
        x = CONSTANTS.planck_h * f / (CONSTANTS.boltzmann_k * T)
        assert x < 0.01
        assert planck_occupancy(f, T) == pytest.approx(1.0 / x, rel=0.01)


def test_planck_domain():
    with pytest.raises(DomainError):
        planck_occupancy(0.0, 1.0)
    with pytest.raises(DomainError):
        planck_occupancy(1e9, -1.0)


def test_thermal_adjacent_ratio(scheme):
    p = thermal_equilibrium(scheme, 1.4).p
    ratios = p[1:] / p[:-1]
    np.testing.assert_allclose(ratios, ADJ_RATIO_994MHZ_1P4K, rtol=1e-12)
    np.testing.assert_allclose(p, 1 / 8, atol=0.02)


def test_thermal_degenerate_is_uniform():
    # level schemes reject zero spacings; the function only reads the ground energies
    s = SimpleNamespace(ground_energies=np.full(8, 5e9))
    np.testing.assert_array_equal(thermal_equilibrium(s, 1.4).p, np.full(8, 1 / 8))


def test_thermal_cold_limit(scheme):
    p = thermal_equilibrium(scheme, 1e-4).p
    lowest = int(np.argmin(scheme.ground_energies))
    assert p[lowest] == pytest.approx(1.0, abs=1e-12)


def test_population_state_validation():
    with pytest.raises(InvalidStateError):
        PopulationState(np.ones(7) / 7)
    with pytest.raises(InvalidStateError):
        PopulationState(np.array([1.5, -0.5, 0, 0, 0, 0, 0, 0]))
    p = PopulationState.from_array(np.arange(8.0), normalize=True)
    assert p.p.sum() == pytest.approx(1.0, abs=1e-15)


def test_detailed_balance_in_rate_matrix(scheme):
    q = relaxation_matrix(scheme, 1e-3, 1.4)
    np.testing.assert_allclose(q.sum(axis=0), 0.0, atol=1e-18)
    for i in range(7):
        up_over_down = q[i + 1, i] / q[i, i + 1]
        assert up_over_down == pytest.approx(ADJ_RATIO_994MHZ_1P4K, rel=1e-12)


def test_zero_duration_is_identity(scheme):
    s = PopulationState.polarized()
    traj = evolve_populations(s, 1e-3, scheme, 1.4, duration=0.0)
    np.testing.assert_array_equal(traj.final.p, s.p)


def test_long_relaxation_reaches_boltzmann(scheme):
    traj = evolve_populations(PopulationState.polarized(), 1.0, scheme, 1.4, duration=400.0)
    np.testing.assert_allclose(traj.final.p, thermal_equilibrium(scheme, 1.4).p, atol=1e-6)


def test_stationary_state_is_boltzmann(scheme):
    p = stationary_state(relaxation_matrix(scheme, 2e-3, 1.4))
    np.testing.assert_allclose(p, thermal_equilibrium(scheme, 1.4).p, atol=1e-12)


def _chain_modes(p0, gamma, t):
    # equal up/down rates: discrete Laplacian with reflecting ends, cosine modes
    n = 8
    k = np.arange(n)
    v = np.cos(np.pi * np.outer(np.arange(n) + 0.5, k) / n)
    v /= np.linalg.norm(v, axis=0)
    lam = -2 * gamma * (1 - np.cos(np.pi * k / n))
    return v @ (np.exp(lam * t) * (v.T @ p0))


@pytest.mark.parametrize("method", ["DOP853", "RK45", "expm"])
def test_infinite_temperature_matches_cosine_modes(scheme, method):
    p0 = PopulationState.polarized().p
    times = np.linspace(0, 3000.0, 7)
    traj = evolve_populations(PopulationState(p0), 1e-3, scheme, None, duration=3000.0, times=times,
                              method=method, rtol=1e-11, atol=1e-14)
    for t, p in zip(times, traj.populations):
        np.testing.assert_allclose(p, _chain_modes(p0, 1e-3, t), atol=1e-8)


def test_two_level_exponential(scheme):
    # a two-state block of the rate matrix relaxes exponentially at gamma (1 + r)
    q = relaxation_matrix(scheme, 1e-2, 1.4)[:2, :2].copy()
    q[0, 0], q[1, 1] = -q[1, 0], -q[0, 1]
    r = ADJ_RATIO_994MHZ_1P4K
    p_inf = np.array([1.0, r]) / (1 + r)
    t = 123.0
    from scipy.linalg import expm
    p = expm(q * t) @ np.array([1.0, 0.0])
    closed = p_inf + (np.array([1.0, 0.0]) - p_inf) * math.exp(-1e-2 * (1 + r) * t)
    np.testing.assert_allclose(p, closed, atol=1e-12)


def test_conservation_over_long_run(scheme):
    traj = evolve_populations(PopulationState.polarized(), 1e-3, scheme, 1.4, duration=2e4,
                              times=np.linspace(0, 2e4, 41))
    assert np.max(np.abs(traj.populations.sum(axis=1) - 1.0)) < 1e-9


def test_error_estimate_self_consistency(scheme):
    pump = PumpConfig(band=1, rate=0.1)
    a = evolve_populations(PopulationState.uniform(), 1e-3, scheme, 1.4, pump, 500.0, estimate_error=True)
    b = evolve_populations(PopulationState.uniform(), 1e-3, scheme, 1.4, pump, 500.0, rtol=0.5e-9,
                           atol=0.5e-13)
    assert a.error_estimate > 0
    assert np.max(np.abs(a.final.p - b.final.p)) <= a.error_estimate


def test_bad_output_times(scheme):
    with pytest.raises(DomainError):
        evolve_populations(PopulationState.uniform(), 1e-3, scheme, 1.4, duration=10.0, times=[0, 20])
    with pytest.raises(DomainError):
        evolve_populations(PopulationState.uniform(), 1e-3, scheme, 1.4, duration=-1.0)


def test_branching_columns_are_distributions(full_table):
    b = branching_matrix(full_table)
    np.testing.assert_allclose(b.sum(axis=0), 1.0, rtol=1e-14)
    b0 = branching_matrix(full_table, {0: 1.0})
    np.testing.assert_array_equal(b0, np.eye(8))


def test_pump_matrix_conserves(full_table):
    q = pump_matrix(full_table, PumpConfig(band=1, rate=3.0))
    np.testing.assert_allclose(q.sum(axis=0), 0.0, atol=1e-14)
    assert np.all(q[:, 7] == 0)  # +7/2 has no Delta m = +1 line


def test_pump_config_validation():
    with pytest.raises(InvalidConfigError):
        PumpConfig(band=0)
    with pytest.raises(InvalidConfigError):
        PumpConfig(rate=-1.0)
    with pytest.raises(InvalidConfigError):
        PumpConfig(branching={0: 0.5, -1: 0.4})


def test_zero_rate_pump_is_pure_relaxation(scheme, full_table):
    s = PopulationState.polarized()
    a = simulate_spin_pumping(scheme, PumpConfig(1, 0.0), 1e-3, 500.0, initial=s, table=full_table)
    b = evolve_populations(s, 1e-3, scheme, 1.4, duration=500.0).final
    np.testing.assert_allclose(a.p, b.p, atol=1e-12)


def test_strong_pump_concentrates_top_state(scheme, full_table):
    g = 1e-3
    out = simulate_spin_pumping(scheme, PumpConfig(1, 1000 * g), g, 3000.0, table=full_table)
    assert int(np.argmax(out.p)) == 7
    assert out.p[7] > 0.95


def test_minus_band_mirrors_plus_band():
    sym = StrengthModel(minus_start=0.031, minus_end=0.31, plus_start=0.31, plus_end=0.031)
    s = build_level_scheme(strengths=sym)
    tab = transition_table(s, include_branching=True)
    up = simulate_spin_pumping(s, PumpConfig(1, 0.5), 1e-3, 3000.0, T=None, table=tab)
    down = simulate_spin_pumping(s, PumpConfig(-1, 0.5), 1e-3, 3000.0, T=None, table=tab)
    np.testing.assert_allclose(down.p, reflect_populations(up.p), atol=1e-9)
    assert int(np.argmax(down.p)) == 0


def test_boltzmann_factor():
    assert boltzmann_factor(1e9, None) == 1.0
    with pytest.raises(DomainError):
        boltzmann_factor(1e9, 0.0)


def test_decay_field_root():
    m = PhononModel()
    assert m.decay_field == pytest.approx(B0_DEFAULT, rel=1e-9)


def test_lifetime_plateau_and_low_field_peak():
    m = PhononModel()
    assert hole_lifetime_vs_field(m, None, [6.0, 7.0]) == pytest.approx([70.0, 70.0], rel=1e-6)
    B = np.linspace(0.02, 0.5, 4801)
    life = hole_lifetime_vs_field(m, None, B)
    interior = np.flatnonzero((life[1:-1] > life[:-2]) & (life[1:-1] > life[2:])) + 1
    assert interior.size >= 1
    assert B[interior[0]] == pytest.approx(0.1, abs=0.002)
    assert hole_lifetime_vs_field(m, None, [0.1])[0] == pytest.approx(0.0360229, rel=1e-5)


def test_lifetime_rises_to_plateau_above_three_tesla():
    life = hole_lifetime_vs_field(PhononModel(), None, np.linspace(3.0, 7.0, 41))
    assert np.all(np.diff(life) >= 0)
    assert life[0] > 0.5 * 70.0


def test_electron_term_tracks_planck_occupancy():
    m = PhononModel(zero_field_cross_rate=0.0)
    T = m.temperature
    f = math.log(2.0) * CONSTANTS.boltzmann_k * T / CONSTANTS.planck_h
    B = f / m.zeeman_slope
    x = math.log(2.0)
    assert m.phonon_density(B) == pytest.approx(x**3 * planck_occupancy(f, T), rel=1e-12)
    assert m.electron_rate(B) == pytest.approx(m.phonon_coupling * x**3 * 1.0, rel=1e-12)


def test_lifetime_with_spin_lattice_term():
    m = PhononModel(include_spin_lattice=True)
    p = RelaxationParams(gamma_d=9e-4, gamma_or=0.0)
    base = hole_lifetime_vs_field(PhononModel(), None, [7.0])[0]
    with_sl = hole_lifetime_vs_field(m, p, [7.0])[0]
    assert 1 / with_sl == pytest.approx(1 / base + 9e-4 * 1.4, rel=1e-9)


def test_lifetime_negative_field():
    with pytest.raises(DomainError):
        hole_lifetime_vs_field(PhononModel(), None, [-0.1])
