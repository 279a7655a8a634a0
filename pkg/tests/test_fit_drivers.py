import numpy as np
import pytest

from ersim.dynamics import PopulationState, RelaxationParams, evolve_populations, thermal_equilibrium
from ersim.errors import DomainError, InsufficientDataError, UnidentifiableParameterError
from ersim.fit import (BOTTLENECK_TEMPERATURE, eq1_params, fit_eq1, fit_population_fractions,
                       fit_relaxation_timeseries, orbach_for_crossover, synthetic_rates)
from ersim.levels import CONSTANTS
from ersim.spectrum import AbsorptionModel, SpectrumGrid, default_grid, synthesize_absorption

F = 1.498e12
# gamma_or placing the Orbach/direct crossover at 1.9 K (mpmath)
GAMMA_OR_CROSS = 1.37848074693531e-23
T_GRID = np.linspace(1.4, 3.4, 21)


def test_crossover_coefficient():
    assert orbach_for_crossover(9e-4, F, 1.9) == pytest.approx(GAMMA_OR_CROSS, rel=1e-10)


def test_eq1_noiseless_round_trip():
    p = RelaxationParams(gamma_d=9e-4, gamma_or=GAMMA_OR_CROSS, f=F)
    res = fit_eq1(T_GRID, synthetic_rates(p, T_GRID), F)
    assert res["gamma_d"] == pytest.approx(9e-4, rel=1e-6)
    assert res["gamma_or"] == pytest.approx(GAMMA_OR_CROSS, rel=1e-6)
    back = eq1_params(res, F)
    assert back.gamma_or == res["gamma_or"]


def test_eq1_noisy_intervals_contain_truth(rng):
    p = RelaxationParams(gamma_d=9e-4, gamma_or=GAMMA_OR_CROSS, f=F)
    res = fit_eq1(T_GRID, synthetic_rates(p, T_GRID, 0.05, rng), F)
    assert res.intervals["gamma_d"].contains(9e-4)
    assert res.intervals["gamma_or"].contains(GAMMA_OR_CROSS)


def test_eq1_without_orbach_includes_zero(rng):
    p = RelaxationParams(gamma_d=9e-4, gamma_or=0.0, f=F)
    res = fit_eq1(T_GRID, synthetic_rates(p, T_GRID, 0.03, rng), F)
    assert res.intervals["gamma_or"].contains(0.0)


def test_eq1_masks_bottleneck_points():
    p = RelaxationParams(gamma_d=9e-4, gamma_or=GAMMA_OR_CROSS, f=F)
    rates = synthetic_rates(p, T_GRID)
    rates[T_GRID > BOTTLENECK_TEMPERATURE] *= 0.1  # plateau the model must not see
    res = fit_eq1(T_GRID, rates, F, intervals=False)
    assert res.residuals.size == int(np.sum(T_GRID <= BOTTLENECK_TEMPERATURE))
    assert res["gamma_d"] == pytest.approx(9e-4, rel=1e-6)


def test_eq1_needs_three_points():
    with pytest.raises(InsufficientDataError):
        fit_eq1([1.5, 2.0, 3.0, 3.5], [1e-3, 2e-3, 3e-3, 4e-3], F)
    with pytest.raises(DomainError):
        fit_eq1([1.5, 2.0, -1.0], [1e-3, 2e-3, 3e-3], F)


def _spectrum(table, p, step=2e6):
    grid = default_grid(step=step)
    return synthesize_absorption(AbsorptionModel(table, PopulationState.from_array(p)), grid)


def test_populations_polarized(scheme, full_table):
    state, res = fit_population_fractions(_spectrum(full_table, PopulationState.polarized().p), scheme)
    assert state.p[7] == pytest.approx(0.95, rel=1e-6)
    np.testing.assert_allclose(state.p, PopulationState.polarized().p, atol=1e-8)


def test_populations_thermal(scheme, full_table):
    th = thermal_equilibrium(scheme, 1.4).p
    state, _ = fit_population_fractions(_spectrum(full_table, th), scheme, intervals=False)
    np.testing.assert_allclose(state.p, th, rtol=1e-6)
    np.testing.assert_allclose(state.p, 1 / 8, atol=0.02)


def test_populations_depleted_state(scheme, full_table, rng):
    p = np.full(8, 1 / 7)
    p[4] = 0.0
    state, _ = fit_population_fractions(_spectrum(full_table, p), scheme, intervals=False)
    assert state.p[4] == pytest.approx(0.0, abs=1e-8)
    spec = _spectrum(full_table, p)
    noisy = SpectrumGrid(spec.frequencies, spec.values + 0.01 * rng.standard_normal(spec.values.size))
    _, res = fit_population_fractions(noisy, scheme)
    assert res.intervals["p4"].contains(0.0)


def test_populations_band_coverage(scheme, full_table):
    spec = _spectrum(full_table, PopulationState.uniform().p)
    cut = spec.frequencies > -0.5e9  # the Delta m = -1 band sits near -1 GHz
    with pytest.raises(DomainError):
        fit_population_fractions(SpectrumGrid(spec.frequencies[cut], spec.values[cut]), scheme)


GAMMA = 1.26e-3
TIMES = np.array([0.0, 200.0, 500.0, 900.0, 1500.0, 2500.0])


def _series(scheme, table, noise=0.0, rng=None, scale=1.0, step=4e6):
    traj = evolve_populations(PopulationState.polarized(), GAMMA, scheme, 1.4, duration=TIMES[-1],
                              times=TIMES, method="expm")
    out = []
    for p in traj.populations:
        s = _spectrum(table, np.clip(p, 0, None) / np.clip(p, 0, None).sum(), step)
        v = scale * s.values
        if noise:
            v = v + noise * np.max(v) * rng.standard_normal(v.size)
        out.append(SpectrumGrid(s.frequencies, v))
    return out


def test_relaxation_noiseless_round_trip(scheme, full_table):
    series = _series(scheme, full_table)
    res = fit_relaxation_timeseries(TIMES, series, scheme, initial=PopulationState.polarized(),
                                    intervals=False)
    assert res["gamma"] == pytest.approx(GAMMA, rel=1e-6)
    assert res["scale"] == pytest.approx(1.0, rel=1e-6)


def test_relaxation_joint_initial_state(scheme, full_table):
    res = fit_relaxation_timeseries(TIMES, _series(scheme, full_table), scheme, intervals=False)
    assert res["gamma"] == pytest.approx(GAMMA, rel=1e-6)
    assert res["p7"] == pytest.approx(0.95, rel=1e-6)


def test_relaxation_noisy(scheme, full_table, rng):
    res = fit_relaxation_timeseries(TIMES, _series(scheme, full_table, 0.01, rng), scheme)
    assert res["gamma"] == pytest.approx(GAMMA, rel=0.05)
    assert res.intervals["gamma"].contains(res["gamma"])


def test_relaxation_scale_invariant(scheme, full_table):
    a = fit_relaxation_timeseries(TIMES, _series(scheme, full_table), scheme, intervals=False)
    b = fit_relaxation_timeseries(TIMES, _series(scheme, full_table, scale=3.0), scheme, intervals=False)
    assert b["gamma"] == pytest.approx(a["gamma"], rel=1e-6)
    assert b["scale"] == pytest.approx(3.0 * a["scale"], rel=1e-6)


def test_relaxation_degenerate_inputs(scheme, full_table):
    s = _spectrum(full_table, PopulationState.polarized().p, 4e6)
    with pytest.raises(UnidentifiableParameterError):
        fit_relaxation_timeseries([0.0, 10.0, 20.0], [s, s, s], scheme)
    with pytest.raises(InsufficientDataError):
        fit_relaxation_timeseries([0.0, 10.0], [s, s], scheme)
    with pytest.raises(DomainError):
        fit_relaxation_timeseries([0.0, 10.0, 5.0], [s, s, s], scheme)
