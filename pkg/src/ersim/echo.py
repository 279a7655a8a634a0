"""Raman-echo formation and decay.

The hyperfine coherence is modelled as a Lambda system reduced to its two
ground levels.  Pulses are ideal and instantaneous: the pi/2 pulse at t = 0
creates the coherence, the pi pulse at t = T conjugates the accumulated
phase, and each packet at detuning delta contributes
exp(i 2 pi delta (t - 2T)) afterwards.  The ensemble sum peaks at 2T.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy.special import roots_hermite

from .errors import DomainError, FitError, InsufficientDataError, InvalidConfigError
from .fit.engine import FitResult, least_squares, rmsd_doubling_intervals
from .levels import LevelScheme

DEFAULT_T2 = 1.3
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class EchoDecayModel:
    """Stretched-exponential decay of the echo amplitude vs total delay."""

    t2: float = DEFAULT_T2
    mims_x: float = 1.0

    def __post_init__(self):
        if not self.t2 > 0:
            raise DomainError("t2 must be > 0")
        if not 0 < self.mims_x <= 3:
            raise DomainError("mims_x must lie in (0, 3]")

    @property
    def half_life(self) -> float:
        return self.t2 * math.log(2.0) ** (1.0 / self.mims_x)


def echo_amplitude(tau, model: EchoDecayModel):
    """A(tau) = exp(-(tau / t2)^x); tau is the total delay to the echo."""
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise DomainError("tau must be >= 0")
    out = np.exp(-((t / model.t2) ** model.mims_x))
    return float(out) if out.ndim == 0 else out


class EnvelopeConvention(str, enum.Enum):
    """Time-bandwidth pairings between echo envelope and linewidth FWHM.

    ``AMPLITUDE_GAUSSIAN`` is the transform-limited Gaussian product
    2 ln2 / pi.  ``ECHO_ENVELOPE`` pairs the FWHM of the echo amplitude
    envelope with the FWHM of a Gaussian detuning distribution, 4 ln2 / pi;
    this is what :func:`simulate_raman_echo` produces.
    """

    AMPLITUDE_GAUSSIAN = "amplitude-gaussian"
    ECHO_ENVELOPE = "echo-envelope"

    @property
    def product(self) -> float:
        if self is EnvelopeConvention.AMPLITUDE_GAUSSIAN:
            return 2.0 * math.log(2.0) / math.pi
        return 4.0 * math.log(2.0) / math.pi


def _convention(convention) -> EnvelopeConvention:
    try:
        return EnvelopeConvention(convention)
    except ValueError:
        names = ", ".join(c.value for c in EnvelopeConvention)
        raise InvalidConfigError(f"unknown convention {convention!r}; expected one of {names}") from None


def envelope_from_linewidth(fwhm: float, convention=EnvelopeConvention.AMPLITUDE_GAUSSIAN) -> float:
    """Echo envelope FWHM (s) for an inhomogeneous linewidth FWHM (Hz)."""
    if not fwhm > 0:
        raise DomainError("fwhm must be > 0")
    return _convention(convention).product / fwhm


def linewidth_from_envelope(duration: float, convention=EnvelopeConvention.AMPLITUDE_GAUSSIAN) -> float:
    """Inverse of :func:`envelope_from_linewidth`."""
    if not duration > 0:
        raise DomainError("duration must be > 0")
    return _convention(convention).product / duration


@dataclass(frozen=True)
class RamanEchoSequence:
    """pi/2 at 0, pi at ``separation``; the echo is sampled around 2 x separation.

    ``pair`` names the two ground projections whose coherence is rephased.
    """

    separation: float = 30e-3
    window: float = 20e-6
    samples: int = 801
    pair: tuple[float, float] = (-3.5, -2.5)

    def __post_init__(self):
        if not self.separation > 0:
            raise DomainError("pulse separation must be > 0")
        if not self.window > 0 or self.samples < 3:
            raise DomainError("window must be > 0 with at least 3 samples")
        if 0.5 * self.window >= self.separation:
            raise DomainError("sampling window overlaps the rephasing pulse")

    @property
    def total_delay(self) -> float:
        return 2.0 * self.separation

    def times(self) -> np.ndarray:
        return self.total_delay + np.linspace(-0.5 * self.window, 0.5 * self.window, self.samples)


@dataclass(frozen=True)
class EchoEnvelope:
    times: np.ndarray
    amplitude: np.ndarray
    hyperfine_frequency: float = 0.0
    convention: EnvelopeConvention = EnvelopeConvention.ECHO_ENVELOPE
    sampling_error: float = 0.0
    warnings: tuple[str, ...] = dc_field(default=())

    @property
    def peak_time(self) -> float:
        return float(self.times[int(np.argmax(self.amplitude))])

    @property
    def peak(self) -> float:
        return float(np.max(self.amplitude))

    @property
    def fwhm(self) -> float:
        """Full width at half maximum by linear interpolation; inf if never halved."""
        a, t = self.amplitude, self.times
        k = int(np.argmax(a))
        half = 0.5 * a[k]
        left = np.flatnonzero(a[:k] < half)
        right = np.flatnonzero(a[k:] < half)
        if left.size == 0 or right.size == 0:
            return math.inf
        i, j = left[-1], k + right[0]
        tl = np.interp(half, [a[i], a[i + 1]], [t[i], t[i + 1]])
        tr = np.interp(half, [a[j], a[j - 1]], [t[j], t[j - 1]])
        return float(tr - tl)

    @property
    def area(self) -> float:
        return float(np.trapezoid(self.amplitude, self.times))


def _packets(sigma: float, count: int, sampling: str, seed: int | None):
    if sampling == "gauss-hermite":
        x, w = roots_hermite(count)
        return math.sqrt(2.0) * sigma * x, w / math.sqrt(math.pi)
    if sampling == "monte-carlo":
        rng = np.random.default_rng(seed)
        return sigma * rng.standard_normal(count), np.full(count, 1.0 / count)
    raise InvalidConfigError(f"unknown sampling {sampling!r}")


def _ensemble(delta, weights, offsets) -> np.ndarray:
    phase = np.exp(2j * np.pi * np.outer(offsets, delta))
    return np.abs(phase @ weights)


def simulate_raman_echo(scheme: LevelScheme, inhomogeneous_fwhm: float,
                        sequence: RamanEchoSequence = RamanEchoSequence(), packet_count: int = 200, *,
                        sampling: str = "gauss-hermite", seed: int | None = None,
                        decay: EchoDecayModel | None = None, tolerance: float = 1e-2) -> EchoEnvelope:
    """Echo amplitude envelope around the rephasing time.

    Detunings are drawn from a Gaussian of FWHM ``inhomogeneous_fwhm`` (Hz)
    about the hyperfine splitting of ``sequence.pair``, either on
    Gauss-Hermite nodes (deterministic) or by seeded Monte-Carlo.  With a
    ``decay`` model the envelope is scaled by the echo amplitude at the
    total delay.  A warning is issued when the estimated sampling error
    exceeds ``tolerance`` (relative to the peak).
    """
    if packet_count < 100:
        raise DomainError("packet_count must be >= 100")
    if inhomogeneous_fwhm < 0:
        raise DomainError("inhomogeneous_fwhm must be >= 0")
    centre = scheme.ground_splitting(*sequence.pair)
    t = sequence.times()
    offsets = t - sequence.total_delay
    sigma = inhomogeneous_fwhm / FWHM_PER_SIGMA
    delta, w = _packets(sigma, packet_count, sampling, seed)
    amp = _ensemble(delta, w, offsets)
    if sampling == "monte-carlo":
        # spread of the per-packet phasor about the ensemble mean
        err = float(np.max(np.sqrt(np.maximum(1.0 - amp**2, 0.0) / packet_count)))
    else:
        d2, w2 = _packets(sigma, packet_count // 2, sampling, seed)
        err = float(np.max(np.abs(_ensemble(d2, w2, offsets) - amp)))
    notes = []
    if err > tolerance:
        msg = f"estimated sampling error {err:.3g} exceeds {tolerance:g}; raise packet_count"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if decay is not None:
        amp = amp * echo_amplitude(sequence.total_delay, decay)
    return EchoEnvelope(t, amp, centre, EnvelopeConvention.ECHO_ENVELOPE, err, tuple(notes))


@dataclass
class EchoFit:
    model: EchoDecayModel
    amplitude: float
    result: FitResult


def _initial_guess(tau, amp):
    a0 = float(np.max(amp))
    ratio = amp / a0
    ok = (ratio > 0.02) & (ratio < 0.98)
    if ok.sum() >= 2:
        lx = np.log(tau[ok])
        ly = np.log(-np.log(ratio[ok]))
        x, c = np.polyfit(lx, ly, 1)
        if x > 0:
            return a0, float(np.exp(-c / x)), float(min(max(x, 0.2), 3.0))
    below = np.flatnonzero(ratio < math.exp(-1.0))
    t2 = float(tau[below[0]]) if below.size else float(tau[-1])
    return a0, t2, 1.0


def fit_echo_decay(tau: Sequence[float], amplitude: Sequence[float], *, intervals: bool = True) -> EchoFit:
    """Fit A0 exp(-(tau / t2)^x) to echo amplitudes vs total delay.

    A0, t2 and x are all free; t2 is therefore independent of the
    normalization of the data.  Raises :class:`FitError` with a residual
    report if the fit does not converge.
    """
    t = np.asarray(tau, dtype=float)
    a = np.asarray(amplitude, dtype=float)
    if t.shape != a.shape:
        raise DomainError("tau and amplitude differ in length")
    if t.size < 5:
        raise InsufficientDataError("need at least 5 points")
    if np.any(t <= 0):
        raise DomainError("tau must be > 0")
    if not np.any(a > 0):
        raise DomainError("amplitudes must include positive values")

    def residual(p):
        return p[0] * np.exp(-((t / p[1]) ** p[2])) - a

    a0, t2, x = _initial_guess(t, a)
    res = least_squares(residual, [a0, t2, x], ([0.0, 1e-12 * t.max(), 1e-6], [np.inf, np.inf, 3.0]),
                        names=("amplitude", "t2", "mims_x"), scale=[a0, t2, 1.0])
    if not res.converged:
        raise FitError(f"echo decay fit did not converge ({res.message})",
                       {"rmsd": res.rmsd, "iterations": res.iterations, "params": res.params,
                        "residuals": res.residuals.tolist()})
    if intervals:
        rmsd_doubling_intervals(res)
    return EchoFit(EchoDecayModel(res["t2"], res["mims_x"]), res["amplitude"], res)
