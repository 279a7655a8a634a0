"""Ground-state hyperfine population dynamics.

Spin-lattice relaxation couples every adjacent pair of ground hyperfine
states with one rate gamma.  The downward rate (towards lower energy) is
gamma and the upward rate is gamma * exp(-h delta / kT), so the stationary
state is the Boltzmann distribution.  Optical pumping on a Delta m = +-1 band
is an effective rate process: ions are excited at ``rate * rel_strength`` and
return to the ground manifold instantly according to a branching law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import brentq

from .errors import DomainError, InvalidConfigError, InvalidStateError, NumericalError
from .levels import (CONSTANTS, DEFAULT_FIELD, DEFAULT_ZEEMAN_SLOPE, N_LEVELS,
                     LevelScheme, TransitionTable, m_to_index, transition_table)

SUM_TOL = 1e-9


@dataclass(frozen=True)
class PopulationState:
    """Fractional populations of the eight ground hyperfine states."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.shape != (N_LEVELS,):
            raise InvalidStateError(f"population vector needs {N_LEVELS} entries")
        if np.any(~np.isfinite(p)) or np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise InvalidStateError(f"populations outside [0, 1]: {p}")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise InvalidStateError(f"populations sum to {p.sum():.12g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls) -> "PopulationState":
        return cls(np.full(N_LEVELS, 1.0 / N_LEVELS))

    @classmethod
    def polarized(cls, m: float = 3.5, fraction: float = 0.95) -> "PopulationState":
        """``fraction`` in state ``m``; the remainder spread evenly."""
        if not 0.0 <= fraction <= 1.0:
            raise InvalidStateError("fraction must lie in [0, 1]")
        p = np.full(N_LEVELS, (1.0 - fraction) / (N_LEVELS - 1))
        p[m_to_index(m)] = fraction
        return cls(p)

    @classmethod
    def from_array(cls, p: Sequence[float], normalize: bool = False) -> "PopulationState":
        p = np.asarray(p, dtype=float)
        if normalize:
            total = p.sum()
            if total <= 0:
                raise InvalidStateError("cannot normalize an empty population")
            p = p / total
        return cls(p)

    def __getitem__(self, i):
        return self.p[i]


@dataclass(frozen=True)
class RelaxationParams:
    """Coefficients of the spin-lattice rate gamma(T).

    Units: gamma_d s^-1 K^-1, gamma_r s^-1 K^-9, gamma_or s^-1 Hz^-3, f Hz.
    """

    gamma_d: float = 9e-4
    gamma_r: float = 0.0
    gamma_or: float = 8e-30
    f: float = DEFAULT_ZEEMAN_SLOPE * DEFAULT_FIELD

    def __post_init__(self):
        if min(self.gamma_d, self.gamma_r, self.gamma_or) < 0:
            raise InvalidConfigError("relaxation coefficients must be >= 0")
        if self.gamma_or > 0 and self.f <= 0:
            raise InvalidConfigError("f must be > 0 when the Orbach term is active")


def _check_positive(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f"{name} must be > 0")
    return x


def gamma_of_T(params: RelaxationParams, T):
    """gamma(T) = gamma_d T + gamma_r T^9 + gamma_or f^3 exp(-h f / k T)."""
    T = _check_positive("temperature", T)
    h, k = CONSTANTS.planck_h, CONSTANTS.boltzmann_k
    orbach = 0.0
    if params.gamma_or:
        orbach = params.gamma_or * params.f**3 * np.exp(-h * params.f / (k * T))
    out = params.gamma_d * T + params.gamma_r * T**9 + orbach
    return float(out) if np.ndim(out) == 0 else out


def planck_occupancy(f, T):
    """Mean thermal phonon number 1 / (exp(h f / k T) - 1)."""
    f = _check_positive("frequency", f)
    T = _check_positive("temperature", T)
    x = CONSTANTS.planck_h * f / (CONSTANTS.boltzmann_k * T)
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(x)
    return float(out) if np.ndim(out) == 0 else out


def boltzmann_factor(delta_hz: float, T: float | None) -> float:
    """exp(-h delta / k T); 1 for ``T=None`` (infinite temperature)."""
    if T is None:
        return 1.0
    if T <= 0:
        raise DomainError("temperature must be > 0")
    return math.exp(-CONSTANTS.planck_h * delta_hz / (CONSTANTS.boltzmann_k * T))


def thermal_equilibrium(scheme: LevelScheme, T: float) -> PopulationState:
    if T <= 0:
        raise DomainError("temperature must be > 0")
    e = scheme.ground_energies
    x = CONSTANTS.planck_h * (e - e.min()) / (CONSTANTS.boltzmann_k * T)
    w = np.exp(-x)
    w /= w.sum()
    # renormalize once more so the sum is 1 to rounding
    return PopulationState(w / w.sum())


def relaxation_matrix(scheme: LevelScheme, gamma: float, T: float | None) -> np.ndarray:
    """Rate matrix Q (dp/dt = Q p) for nearest-neighbour spin-lattice coupling."""
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    q = np.zeros((N_LEVELS, N_LEVELS))
    e = scheme.ground_energies
    for i in range(N_LEVELS - 1):
        lo, hi = (i, i + 1) if e[i + 1] > e[i] else (i + 1, i)
        down = gamma
        up = gamma * boltzmann_factor(abs(e[i + 1] - e[i]), T)
        q[lo, hi] += down
        q[hi, hi] -= down
        q[hi, lo] += up
        q[lo, lo] -= up
    return q


@dataclass(frozen=True)
class PumpConfig:
    """Optical pumping on one Delta m = +-1 band.

    ``branching`` maps the decay change m_ground - m_excited onto a
    probability.  When omitted, each excited state decays to every ground
    state it has a line to, in proportion to that line's strength.
    Destinations that fall outside the ladder are dropped and the remaining
    probabilities renormalized.
    """

    band: int = 1
    rate: float = 0.0
    branching: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.band not in (1, -1):
            raise InvalidConfigError("pump band must be +1 or -1")
        if self.rate < 0:
            raise InvalidConfigError("pump rate must be >= 0")
        if self.branching is not None:
            b = {int(k): float(v) for k, v in dict(self.branching).items()}
            if any(v < 0 for v in b.values()) or abs(sum(b.values()) - 1.0) > 1e-9:
                raise InvalidConfigError("branching probabilities must be >= 0 and sum to 1")
            object.__setattr__(self, "branching", b)


def branching_matrix(table: TransitionTable, branching: Mapping[int, float] | None = None) -> np.ndarray:
    """B[g, e]: probability that excited state e decays into ground state g."""
    b = np.zeros((N_LEVELS, N_LEVELS))
    if branching is None:
        s = table.strength_matrix()  # (excited, ground)
        for e in range(N_LEVELS):
            row = s[e]
            if row.sum() > 0:
                b[:, e] = row / row.sum()
        return b
    for e in range(N_LEVELS):
        for dm, prob in branching.items():
            g = e + dm
            if 0 <= g < N_LEVELS:
                b[g, e] += prob
        total = b[:, e].sum()
        if total > 0:
            b[:, e] /= total
    return b


def pump_matrix(table: TransitionTable, pump: PumpConfig) -> np.ndarray:
    """Rate matrix contribution of optical pumping."""
    q = np.zeros((N_LEVELS, N_LEVELS))
    if pump.rate == 0:
        return q
    b = branching_matrix(table, pump.branching)
    for t in table.band(pump.band):
        g, e = t.ground_index, t.excited_index
        r = pump.rate * t.rel_strength
        q[:, g] += r * b[:, e]
        q[g, g] -= r
    return q


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    populations: np.ndarray  # (len(times), 8)
    error_estimate: float = 0.0
    nfev: int = 0

    @property
    def final(self) -> PopulationState:
        return PopulationState.from_array(self.populations[-1])

    def states(self) -> list[PopulationState]:
        return [PopulationState.from_array(p) for p in self.populations]


def _integrate(q, p0, t_eval, duration, rtol, atol, method):
    extra = {"jac": q} if method in ("Radau", "BDF", "LSODA") else {}
    sol = solve_ivp(lambda t, y: q @ y, (0.0, duration), p0, method=method,
                    t_eval=t_eval, rtol=rtol, atol=atol, **extra)
    if not sol.success:
        raise NumericalError("population integration failed",
                             {"message": sol.message, "t_reached": float(sol.t[-1]) if sol.t.size else 0.0,
                              "nfev": sol.nfev, "rtol": rtol})
    return sol


def evolve_populations(state: PopulationState, gamma: float, scheme: LevelScheme,
                       T: float | None, pump: PumpConfig | None = None,
                       duration: float = 0.0, *, times: Sequence[float] | None = None,
                       table: TransitionTable | None = None, rtol: float = 1e-9,
                       atol: float = 1e-13, method: str = "DOP853",
                       estimate_error: bool = False) -> Trajectory:
    """Integrate the rate equations from ``state`` for ``duration`` seconds.

    ``times`` selects the output instants (defaults to the start and end).
    ``method`` is any :func:`scipy.integrate.solve_ivp` method, or ``"expm"``
    for the exact matrix-exponential propagator of the constant-rate system.
    With ``estimate_error`` the integration is repeated at a sixteenth of
    ``rtol`` and the largest component difference is reported.
    """
    if duration < 0:
        raise DomainError("duration must be >= 0")
    p0 = np.array(state.p, dtype=float)
    if times is None:
        t_eval = np.array([0.0, duration])
    else:
        t_eval = np.asarray(times, dtype=float)
        if np.any(t_eval < 0) or np.any(t_eval > duration) or np.any(np.diff(t_eval) < 0):
            raise DomainError("output times must be sorted within [0, duration]")
    if duration == 0:
        return Trajectory(t_eval, np.tile(p0, (t_eval.size, 1)))
    q = relaxation_matrix(scheme, gamma, T)
    if pump is not None:
        q = q + pump_matrix(table or transition_table(scheme, include_branching=True), pump)
    if method == "expm":
        pops = np.array([expm(q * t) @ p0 for t in t_eval])
        return Trajectory(t_eval, pops)
    sol = _integrate(q, p0, t_eval, duration, rtol, atol, method)
    err = 0.0
    if estimate_error:
        fine = _integrate(q, p0, t_eval, duration, rtol / 16, atol / 16, method)
        err = float(np.max(np.abs(fine.y - sol.y)))
    return Trajectory(sol.t, sol.y.T.copy(), err, int(sol.nfev))


def stationary_state(q: np.ndarray) -> np.ndarray:
    """Null vector of a rate matrix, normalized to unit sum."""
    w, v = np.linalg.eig(q)
    p = np.real(v[:, np.argmin(np.abs(w))])
    return p / p.sum()


def simulate_spin_pumping(scheme: LevelScheme, pump: PumpConfig, gamma: float,
                          duration: float, *, T: float | None = 1.4,
                          initial: PopulationState | None = None,
                          table: TransitionTable | None = None, **kw) -> PopulationState:
    """Pump from ``initial`` (thermal by default) for ``duration`` seconds."""
    if initial is None:
        initial = thermal_equilibrium(scheme, T) if T is not None else PopulationState.uniform()
    traj = evolve_populations(initial, gamma, scheme, T, pump, duration, table=table, **kw)
    return PopulationState.from_array(np.clip(traj.populations[-1], 0.0, None), normalize=True)


@dataclass(frozen=True)
class PhononModel:
    """Field dependence of the spectral-hole lifetime.

    The electron-spin flip rate has a phonon part proportional to the thermal
    Planck spectral density x^3 / (exp(x) - 1), x = h f(B) / k T, and a
    low-field electron cross-relaxation part decaying as exp(-B / B0).  B0 is
    solved so the lifetime has a stationary point at ``low_field_peak_field``.
    Above a few tesla both vanish and the hyperfine cross-relaxation floor
    ``1 / cross_relax_plateau`` remains.
    """

    zeeman_slope: float = DEFAULT_ZEEMAN_SLOPE
    temperature: float = 1.4
    cross_relax_plateau: float = 70.0
    low_field_peak_field: float = 0.1
    phonon_coupling: float = 50.0
    zero_field_cross_rate: float = 200.0
    include_spin_lattice: bool = False
    decay_field: float = dc_field(default=float("nan"), compare=False)

    def __post_init__(self):
        if self.cross_relax_plateau <= 0 or self.temperature <= 0:
            raise InvalidConfigError("plateau and temperature must be > 0")
        if self.phonon_coupling < 0 or self.zero_field_cross_rate < 0:
            raise InvalidConfigError("rates must be >= 0")
        if math.isnan(self.decay_field):
            object.__setattr__(self, "decay_field", self._solve_decay_field())

    def reduced_energy(self, B):
        f = self.zeeman_slope * np.asarray(B, dtype=float)
        return CONSTANTS.planck_h * f / (CONSTANTS.boltzmann_k * self.temperature)

    def phonon_density(self, B):
        """x^3 n(x), the Planck spectral density in reduced units."""
        x = np.asarray(self.reduced_energy(B), dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        with np.errstate(over="ignore"):
            out[pos] = x[pos] ** 3 / np.expm1(x[pos])
        return out

    def _phonon_slope(self, B, h=1e-6):
        return (self.phonon_density(B + h) - self.phonon_density(B - h)) / (2 * h)

    def _solve_decay_field(self) -> float:
        bp = self.low_field_peak_field
        if self.zero_field_cross_rate == 0 or bp <= 0:
            return float("inf")
        need = self.phonon_coupling * float(self._phonon_slope(bp)) / self.zero_field_cross_rate
        # (1/b0) exp(-bp/b0) peaks at b0 = bp with value 1/(e bp)
        if need <= 0 or need > 1.0 / (math.e * bp):
            raise InvalidConfigError("cannot place a lifetime maximum at the requested field")
        return brentq(lambda b0: math.exp(-bp / b0) / b0 - need, bp / 50, bp)

    def electron_rate(self, B):
        B = np.asarray(B, dtype=float)
        cross = self.zero_field_cross_rate * np.exp(-B / self.decay_field)
        return self.phonon_coupling * self.phonon_density(B) + cross


def hole_lifetime_vs_field(model: PhononModel, params: RelaxationParams | None, fields) -> np.ndarray:
    """Spectral-hole lifetime (s) at each field (T).

    ``params`` only enters when ``model.include_spin_lattice`` is set, adding
    the hyperfine spin-lattice rate gamma(T) at the model temperature.
    """
    fields = np.asarray(fields, dtype=float)
    if np.any(fields < 0):
        raise DomainError("fields must be >= 0")
    rate = model.electron_rate(fields) + 1.0 / model.cross_relax_plateau
    if model.include_spin_lattice and params is not None:
        rate = rate + gamma_of_T(params, model.temperature)
    return 1.0 / rate
