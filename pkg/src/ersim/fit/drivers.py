"""Fit drivers for the relaxation, spectroscopy and temperature experiments."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from scipy.linalg import expm

from ..dynamics import PopulationState, RelaxationParams, gamma_of_T, relaxation_matrix
from ..errors import DomainError, InsufficientDataError, UnidentifiableParameterError
from ..levels import CONSTANTS, N_LEVELS, IsotopeComposition, LevelScheme, TransitionTable, transition_table
from ..spectrum import (DEFAULT_LINESHAPE, DEFAULT_PEAK_CALIBRATION, Lineshape, SpectrumGrid,
                        absorption_profile, line_components)
from .engine import FitResult, least_squares, rmsd_doubling_intervals

BOTTLENECK_TEMPERATURE = 2.6


def _orbach_shape(f: float, T):
    return f**3 * np.exp(-CONSTANTS.planck_h * f / (CONSTANTS.boltzmann_k * np.asarray(T)))


def fit_eq1(temperatures: Sequence[float], rates: Sequence[float], f: float, *,
            t_max: float = BOTTLENECK_TEMPERATURE, t_min: float = 0.0, gamma_r: float = 0.0,
            intervals: bool = True) -> FitResult:
    """Fit gamma_d and gamma_or of gamma(T) to measured rates.

    Points outside ``[t_min, t_max]`` are masked; the default upper limit
    drops the phonon-bottleneck regime.  Residuals are relative,
    ``model / data - 1``, because the rates span decades.  Internally the
    Orbach coefficient is carried as its rate at the hottest unmasked
    temperature so both parameters are of order the data.
    """
    T = np.asarray(temperatures, dtype=float)
    y = np.asarray(rates, dtype=float)
    if T.shape != y.shape:
        raise DomainError("temperatures and rates differ in length")
    if np.any(T <= 0) or np.any(y <= 0):
        raise DomainError("temperatures and rates must be > 0")
    keep = (T >= t_min) & (T <= t_max)
    if keep.sum() < 3:
        raise InsufficientDataError(f"{int(keep.sum())} unmasked points; need at least 3")
    T, y = T[keep], y[keep]
    t_ref = T.max()
    shape = _orbach_shape(f, T)
    shape_ref = float(_orbach_shape(f, t_ref))
    rel_shape = shape / shape_ref
    raman = gamma_r * T**9

    def residual(p):
        return (p[0] * T + raman + p[1] * rel_shape) / y - 1.0

    cold = np.argsort(T)[: max(2, T.size // 3)]
    gd0 = float(np.median(y[cold] / T[cold]))
    orb0 = max(float(y[-1] if T[-1] == t_ref else y[np.argmax(T)]) - gd0 * t_ref, 1e-3 * gd0 * t_ref)
    res = least_squares(residual, [gd0, orb0], ([0.0, 0.0], [np.inf, np.inf]),
                        names=("gamma_d", "orbach_rate_ref"), scale=[gd0, max(orb0, gd0 * t_ref)])
    if intervals:
        rmsd_doubling_intervals(res)
    # report the Orbach coefficient in s^-1 Hz^-3
    conv = 1.0 / shape_ref
    res.names = ("gamma_d", "gamma_or")
    res.x = np.array([res.x[0], res.x[1] * conv])
    if res.intervals:
        iv_d, iv_o = res.intervals["gamma_d"], res.intervals["orbach_rate_ref"]
        res.intervals = {"gamma_d": iv_d,
                         "gamma_or": type(iv_o)(iv_o.low * conv, iv_o.high * conv,
                                                iv_o.open_low, iv_o.open_high)}
    res.residual_fn = None
    res.message += f"; {T.size} points used, t_ref={t_ref:g} K"
    return res


def eq1_params(result: FitResult, f: float, gamma_r: float = 0.0) -> RelaxationParams:
    return RelaxationParams(gamma_d=result["gamma_d"], gamma_r=gamma_r,
                            gamma_or=result["gamma_or"], f=f)


def _ground_columns(table: TransitionTable, lineshape: Lineshape, freqs, calibration) -> np.ndarray:
    """Absorption per unit population of each ground state, shape (n_grid, 8)."""
    comps = line_components(table, np.ones(N_LEVELS), lineshape, freqs, calibration).real
    cols = np.zeros((freqs.size, N_LEVELS))
    for k, g in enumerate(table.ground_indices):
        cols[:, g] += comps[k]
    return cols


def fit_population_fractions(spectrum: SpectrumGrid, scheme: LevelScheme,
                             lineshape: Lineshape = DEFAULT_LINESHAPE, *,
                             table: TransitionTable | None = None,
                             calibration: float = DEFAULT_PEAK_CALIBRATION,
                             isotopes: IsotopeComposition | None = IsotopeComposition(),
                             margin: float | None = None,
                             intervals: bool = True) -> tuple[PopulationState, FitResult]:
    """Estimate ground populations from the Delta m = -1 band only.

    The fitted spectrum is restricted to the band plus ``margin`` (default
    one lineshape FWHM) on each side.  Populations of |-5/2> .. |+7/2> are
    free in [0, 1]; |-7/2>, which has no Delta m = -1 line, takes the
    remainder of unit total.  All lines of the table contribute to the model
    in that window, as does the impurity line when ``isotopes`` is given.
    """
    table = table or transition_table(scheme, include_branching=True)
    band = table.frequencies[[t.delta_m == -1 for t in table]]
    margin = lineshape.fwhm if margin is None else margin
    lo, hi = band.min() - margin, band.max() + margin
    f = spectrum.frequencies
    if f.size == 0 or f[0] > lo or f[-1] < hi:
        raise DomainError("spectrum does not cover the Delta m = -1 band")
    sel = (f >= lo) & (f <= hi)
    freqs = f[sel]
    y = np.asarray(spectrum.values, dtype=float)[sel]
    cols = _ground_columns(table, lineshape, freqs, calibration)
    if isotopes is not None:
        y = y - absorption_profile(table, np.zeros(N_LEVELS), lineshape, freqs, calibration, isotopes).real
    base = cols[:, 0]
    design = cols[:, 1:] - base[:, None]
    target = y - base

    def residual(p):
        return design @ p - target

    res = least_squares(residual, np.full(N_LEVELS - 1, 1.0 / N_LEVELS), ([0.0] * 7, [1.0] * 7),
                        names=tuple(f"p{i}" for i in range(1, N_LEVELS)), scale=[0.1] * 7,
                        jac=lambda p: design)
    if intervals:
        rmsd_doubling_intervals(res)
    p = np.concatenate([[1.0 - res.x.sum()], res.x])
    p = np.clip(p, 0.0, None)
    return PopulationState.from_array(p, normalize=True), res


def _propagators(scheme: LevelScheme, gamma: float, T: float | None, elapsed: np.ndarray) -> np.ndarray:
    """U[k] with p(elapsed[k]) = U[k] @ p(0).

    Same propagator as ``evolve_populations(..., method="expm")``, applied to
    all basis states at once.
    """
    q = relaxation_matrix(scheme, gamma, T)
    return np.array([expm(q * t) for t in elapsed])


def fit_relaxation_timeseries(times: Sequence[float], spectra: Sequence[SpectrumGrid],
                              scheme: LevelScheme, lineshape: Lineshape = DEFAULT_LINESHAPE, *,
                              T: float | None = 1.4, initial: PopulationState | None = None,
                              table: TransitionTable | None = None,
                              calibration: float = DEFAULT_PEAK_CALIBRATION,
                              isotopes: IsotopeComposition | None = IsotopeComposition(),
                              gamma0: float | None = None, intervals: bool = True) -> FitResult:
    """Fit the spin-lattice rate gamma to a time series of spectra.

    Each spectrum is modelled as ``scale`` times the absorption of the
    populations reached by relaxing the initial state for
    ``times[k] - times[0]`` seconds.  With ``initial`` given, the fitted
    parameters are ``gamma`` (s^-1) and ``scale``.  Otherwise the initial
    populations ``p1`` .. ``p7`` are fitted jointly (``p0`` is the remainder),
    starting from the Delta m = -1 estimate of the first spectrum; the whole
    series constrains them far better than a single spectrum does.
    Intervals are profiled for ``gamma`` and ``scale`` only.
    """
    ts = np.asarray(times, dtype=float)
    if ts.size != len(spectra):
        raise DomainError("one timestamp per spectrum required")
    if ts.size < 3:
        raise InsufficientDataError("need at least 3 spectra")
    if np.any(np.diff(ts) <= 0):
        raise DomainError("timestamps must increase")
    ys = [np.asarray(s.values, dtype=float) for s in spectra]
    spread = max(float(np.max(np.abs(y - ys[0]))) for y in ys[1:])
    if spread <= 1e-12 * max(float(np.max(np.abs(ys[0]))), 1e-300):
        raise UnidentifiableParameterError("spectra do not evolve; gamma is unidentifiable")
    table = table or transition_table(scheme, include_branching=True)
    joint = initial is None
    if joint:
        initial, _ = fit_population_fractions(spectra[0], scheme, lineshape, table=table,
                                              calibration=calibration, isotopes=isotopes,
                                              intervals=False)
    elapsed = ts - ts[0]
    cols = [_ground_columns(table, lineshape, s.frequencies, calibration) for s in spectra]
    imp = [absorption_profile(table, np.zeros(N_LEVELS), lineshape, s.frequencies, calibration,
                              isotopes).real if isotopes is not None else 0.0 for s in spectra]
    y_all = np.concatenate(ys)
    p_init = np.array(initial.p)

    def residual(x):
        p0 = np.concatenate([[1.0 - x[2:].sum()], x[2:]]) if joint else p_init
        u = _propagators(scheme, x[0], T, elapsed)
        return np.concatenate([x[1] * (c @ (uk @ p0) + i) for c, uk, i in zip(cols, u, imp)]) - y_all

    if gamma0 is None:
        gamma0 = 1.0 / max(elapsed[-1], 1e-12)
    names = ["gamma", "scale"]
    x0 = [gamma0, 1.0]
    lo, hi = [0.0, 0.0], [np.inf, np.inf]
    scale = [gamma0, 1.0]
    if joint:
        names += [f"p{i}" for i in range(1, N_LEVELS)]
        x0 += list(p_init[1:])
        lo += [0.0] * 7
        hi += [1.0] * 7
        scale += [0.1] * 7
    res = least_squares(residual, x0, (lo, hi), names=names, scale=scale)
    if intervals:
        rmsd_doubling_intervals(res, only=("gamma", "scale"))
    return res


def synthetic_rates(params: RelaxationParams, temperatures, noise: float = 0.0, rng=None) -> np.ndarray:
    """gamma(T) with optional multiplicative Gaussian noise."""
    g = np.asarray(gamma_of_T(params, np.asarray(temperatures, dtype=float)), dtype=float)
    if noise:
        rng = rng or np.random.default_rng()
        g = g * (1.0 + noise * rng.standard_normal(g.shape))
    return g


def orbach_for_crossover(gamma_d: float, f: float, T_cross: float) -> float:
    """gamma_or making the Orbach and direct terms equal at ``T_cross``."""
    return gamma_d * T_cross / float(_orbach_shape(f, T_cross))


def half_life(rate: float) -> float:
    return math.log(2.0) / rate
