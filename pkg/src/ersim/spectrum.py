"""Inhomogeneously broadened absorption spectra and modulation responses.

Absorption is expressed in dB/cm of intensity.  Each optical line is a Voigt
profile scaled to unit height, so ``peak_calibration`` is the absorption of
a line carrying unit (population x rel_strength) at its centre.  The
dispersion partner of every line is the imaginary part of the complex
probability function, so ``synthesize_complex`` returns absorption + i
dispersion in the same units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.signal import hilbert
from scipy.special import wofz

from .dynamics import PopulationState
from .errors import DomainError, InvalidConfigError, InvalidStateError
from .levels import IsotopeComposition, TransitionTable

DB_PER_NEPER = 10.0 * math.log10(math.e)
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_G_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def db_to_neper(a_db):
    return np.asarray(a_db) / DB_PER_NEPER


def neper_to_db(a_np):
    return np.asarray(a_np) * DB_PER_NEPER


@dataclass(frozen=True)
class Lineshape:
    gaussian_fwhm: float
    lorentzian_fwhm: float

    def __post_init__(self):
        if self.gaussian_fwhm < 0 or self.lorentzian_fwhm < 0:
            raise InvalidConfigError("lineshape widths must be >= 0")
        if self.gaussian_fwhm == 0 and self.lorentzian_fwhm == 0:
            raise InvalidConfigError("lineshape needs a non-zero width")

    @classmethod
    def from_total_fwhm(cls, fwhm: float, gl_ratio: float = 1.0) -> "Lineshape":
        """Voigt whose own FWHM is ``fwhm`` with G:L component FWHM ratio ``gl_ratio``."""
        if fwhm <= 0 or gl_ratio < 0:
            raise InvalidConfigError("fwhm must be > 0 and gl_ratio >= 0")

        def excess(lw):
            return cls(gl_ratio * lw, lw).fwhm - fwhm

        lw = brentq(excess, fwhm * 1e-3, fwhm, xtol=1e-12 * fwhm)
        return cls(gl_ratio * lw, lw)

    @property
    def sigma(self) -> float:
        return self.gaussian_fwhm * _G_FWHM_TO_SIGMA

    @property
    def hwhm_lorentz(self) -> float:
        return 0.5 * self.lorentzian_fwhm

    @property
    def fwhm(self) -> float:
        """Full width at half maximum of the combined profile."""
        peak = voigt(0.0, self).real
        upper = self.gaussian_fwhm + self.lorentzian_fwhm
        return 2.0 * brentq(lambda x: voigt(x, self).real - 0.5 * peak, 0.0, upper,
                            xtol=1e-12 * upper, rtol=1e-15)


def voigt(detuning, shape: Lineshape):
    """Unit-area complex Voigt profile: absorption + i * dispersion (1/Hz)."""
    x = np.asarray(detuning, dtype=float)
    gamma = shape.hwhm_lorentz
    sigma = shape.sigma
    if sigma == 0.0:
        return (gamma + 1j * x) / (math.pi * (x * x + gamma * gamma))
    z = (x + 1j * gamma) / (sigma * _SQRT2)
    return wofz(z) / (sigma * _SQRT2PI)


DEFAULT_LINESHAPE = Lineshape.from_total_fwhm(150e6)


@dataclass(frozen=True)
class SpectrumGrid:
    frequencies: np.ndarray
    values: np.ndarray
    units: str = ""
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=float)
        v = np.array(self.values)
        if f.ndim != 1 or f.shape != v.shape:
            raise InvalidConfigError("frequencies and values must be 1-D with equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise InvalidConfigError("frequencies must be strictly increasing")
        f.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.frequencies.size

    def scaled(self, factor: float) -> "SpectrumGrid":
        return SpectrumGrid(self.frequencies, self.values * factor, self.units, self.warnings)


def _peak_value(shape: Lineshape) -> float:
    return float(voigt(0.0, shape).real)


@dataclass(frozen=True)
class AbsorptionModel:
    table: TransitionTable
    populations: PopulationState
    lineshape: Lineshape = DEFAULT_LINESHAPE
    peak_calibration: float = 0.0  # 0 -> DEFAULT_PEAK_CALIBRATION
    isotopes: IsotopeComposition | None = dc_field(default_factory=IsotopeComposition)
    path_length: float = 0.6

    def __post_init__(self):
        if self.peak_calibration == 0.0:
            object.__setattr__(self, "peak_calibration", DEFAULT_PEAK_CALIBRATION)
        if self.peak_calibration <= 0:
            raise InvalidConfigError("peak_calibration must be > 0")
        if self.path_length <= 0:
            raise InvalidConfigError("path_length must be > 0")
        if not isinstance(self.populations, PopulationState):
            raise InvalidStateError("populations must be a normalized PopulationState")


def line_components(table: TransitionTable, populations, lineshape: Lineshape,
                    frequencies, calibration: float) -> np.ndarray:
    """Complex absorption of each transition, shape (n_transitions, n_grid)."""
    f = np.asarray(frequencies, dtype=float)
    p = np.asarray(populations, dtype=float)
    weights = calibration * p[table.ground_indices] * table.strengths / _peak_value(lineshape)
    return weights[:, None] * voigt(f[None, :] - table.frequencies[:, None], lineshape)


def impurity_component(isotopes: IsotopeComposition, lineshape: Lineshape, frequencies,
                       calibration: float) -> np.ndarray:
    if isotopes.target_fraction == 0:
        raise InvalidConfigError("target_fraction must be > 0 to scale the impurity line")
    f = np.asarray(frequencies, dtype=float)
    amp = calibration * isotopes.impurity_strength * isotopes.impurity_fraction / isotopes.target_fraction
    return amp * voigt(f - isotopes.impurity_offset, lineshape) / _peak_value(lineshape)


def absorption_profile(table: TransitionTable, populations, lineshape: Lineshape, frequencies,
                       calibration: float, isotopes: IsotopeComposition | None = None) -> np.ndarray:
    """Complex absorption (dB/cm) for a raw population vector.

    Linear in ``populations``; the impurity line is added only when
    ``isotopes`` is given.
    """
    out = line_components(table, populations, lineshape, frequencies, calibration).sum(axis=0)
    if isotopes is not None:
        out = out + impurity_component(isotopes, lineshape, frequencies, calibration)
    return out


def synthesize_complex(model: AbsorptionModel, grid) -> SpectrumGrid:
    f = np.asarray(grid, dtype=float)
    vals = absorption_profile(model.table, model.populations.p, model.lineshape, f,
                              model.peak_calibration, model.isotopes)
    return SpectrumGrid(f, vals, "dB/cm")


def synthesize_absorption(model: AbsorptionModel, grid) -> SpectrumGrid:
    """Absorption coefficient (dB/cm) on ``grid`` (Hz relative to the optical origin)."""
    c = synthesize_complex(model, grid)
    return SpectrumGrid(c.frequencies, c.values.real.copy(), "dB/cm")


def transition_peak(model: AbsorptionModel, ground_m: float, excited_m: float) -> float:
    """Centre absorption (dB/cm) carried by one transition on its own."""
    t = model.table.find(ground_m, excited_m)
    return model.peak_calibration * model.populations.p[t.ground_index] * t.rel_strength


def dispersion_from_absorption(grid: SpectrumGrid, pad_factor: int = 8) -> np.ndarray:
    """Kramers-Kronig partner of a real absorption spectrum on a uniform grid.

    Returns H[a](nu) = (1/pi) PV int a(x) / (nu - x) dx, matching the sign of
    the imaginary part of :func:`voigt`.  Absorption beyond the grid is taken
    as zero, so the result is only trustworthy away from the edges.
    """
    f = grid.frequencies
    a = np.asarray(grid.values, dtype=float)
    if f.size < 3:
        raise DomainError("need at least 3 grid points")
    step = np.diff(f)
    if np.max(np.abs(step - step[0])) > 1e-6 * abs(step[0]):
        raise DomainError("Kramers-Kronig transform needs a uniform grid")
    n = a.size
    pad = n * pad_factor
    padded = np.zeros(n + 2 * pad)
    padded[pad:pad + n] = a
    return np.imag(hilbert(padded))[pad:pad + n]


def _complex_absorption_at(spec: SpectrumGrid, nu) -> np.ndarray:
    vals = np.asarray(spec.values)
    if np.iscomplexobj(vals):
        re = np.interp(nu, spec.frequencies, vals.real, left=0.0, right=0.0)
        im = np.interp(nu, spec.frequencies, vals.imag, left=0.0, right=0.0)
        return re + 1j * im
    disp = dispersion_from_absorption(spec)
    re = np.interp(nu, spec.frequencies, vals, left=0.0, right=0.0)
    im = np.interp(nu, spec.frequencies, disp, left=0.0, right=0.0)
    return re + 1j * im


def field_transmission(kappa_db, path_length: float):
    """t = exp(-[a/2 + i phi] L) with a, phi converted from dB/cm to nepers/cm."""
    return np.exp(-0.5 * db_to_neper(kappa_db) * path_length)


def _beat(spec: SpectrumGrid, carrier: float, mod_freqs, path_length, sign,
          carrier_amp, sideband_amp, absorbed_db):
    fm = np.asarray(mod_freqs, dtype=float)
    kc = _complex_absorption_at(spec, np.array([carrier]))
    tc = field_transmission(kc, path_length)[0]
    tu = field_transmission(_complex_absorption_at(spec, carrier + fm), path_length)
    tl = field_transmission(_complex_absorption_at(spec, carrier - fm), path_length)
    beat = carrier_amp * sideband_amp * (tu * np.conj(tc) + sign * tc * np.conj(tl))
    flags = ()
    carrier_loss = float(kc.real[0]) * path_length
    if carrier_loss > absorbed_db:
        msg = (f"carrier sits inside the absorption ({carrier_loss:.2f} dB single pass); "
               "the weak-sideband model is not valid there")
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        flags = (msg,)
    return fm, beat, flags


def am_response(alpha: SpectrumGrid, carrier_detuning: float, mod_freqs, path_length: float = 0.6,
                *, carrier_amp: float = 1.0, sideband_amp: float = 0.1,
                absorbed_db: float = 1.0) -> SpectrumGrid:
    """Beat amplitude between the carrier and AM sidebands vs modulation frequency.

    ``alpha`` is absorption in dB/cm, either real (the dispersion is then
    reconstructed by Kramers-Kronig) or complex (absorption + i dispersion).
    """
    fm, beat, flags = _beat(alpha, carrier_detuning, mod_freqs, path_length, +1,
                            carrier_amp, sideband_amp, absorbed_db)
    return SpectrumGrid(fm, np.abs(beat), "beat", flags)


def pm_response(alpha: SpectrumGrid, carrier_detuning: float, mod_freqs, path_length: float = 0.6,
                *, component: str = "quadrature", carrier_amp: float = 1.0,
                sideband_amp: float = 0.1, absorbed_db: float = 1.0) -> SpectrumGrid:
    """PM beat: sidebands in odd phase, so a featureless medium gives zero.

    ``component`` picks the quadrature (dispersion-like, default), in-phase
    (absorption-like) part, or ``"complex"`` for both.
    """
    fm, beat, flags = _beat(alpha, carrier_detuning, mod_freqs, path_length, -1,
                            carrier_amp, sideband_amp, absorbed_db)
    if component == "quadrature":
        vals = beat.imag.copy()
    elif component == "inphase":
        vals = beat.real.copy()
    elif component == "complex":
        vals = beat
    else:
        raise InvalidConfigError(f"unknown PM component {component!r}")
    return SpectrumGrid(fm, vals, "beat", flags)


def default_grid(start: float = -1.6e9, stop: float = 1.6e9, step: float = 1e6) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    return start + step * np.arange(n)


def calibrate_peak(table: TransitionTable, populations: PopulationState, target: float,
                   lineshape: Lineshape = DEFAULT_LINESHAPE,
                   isotopes: IsotopeComposition | None = None,
                   grid: Sequence[float] | None = None) -> float:
    """Calibration that makes the spectrum maximum equal ``target`` dB/cm."""
    f = default_grid() if grid is None else np.asarray(grid, dtype=float)
    unit = absorption_profile(table, populations.p, lineshape, f, 1.0,
                              isotopes or IsotopeComposition()).real
    return target / unit.max()


# Maximum of the polarized (95 % in |+7/2>) default spectrum is 70 dB/cm.
DEFAULT_PEAK_CALIBRATION = 70.0075
