"""Hyperfine level structure and optical transition table.

Nuclear projections are indexed 0..7 throughout the package, mapping onto
m_I = -7/2 .. +7/2.  Energies are frequencies in Hz.  The ground and excited
ladders each start at zero for the m_I = -7/2 state and increase with index.

Optical transition frequencies are stored relative to the optical origin
(nominal 1538 nm line centre): ``excited[m'] - ground[m]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Iterator, Mapping, Sequence

import numpy as np
import scipy.constants as sc

from .errors import InvalidConfigError, UnsupportedTransitionError

N_LEVELS = 8
M_VALUES = np.arange(-7, 8, 2) / 2.0

DEFAULT_GROUND_SPACING = 994.7e6
DEFAULT_EXCITED_SPACING = 1.0e9
DEFAULT_ZEEMAN_SLOPE = 214e9  # Hz/T along D1
DEFAULT_FIELD = 7.0
DEFAULT_OPTICAL_ORIGIN = sc.c / 1538e-9


def m_to_index(m: float) -> int:
    """Map a nuclear projection m_I (half-integer) onto the 0..7 index."""
    idx = m + 3.5
    if idx != int(idx) or not 0 <= idx < N_LEVELS:
        raise UnsupportedTransitionError(f"m_I={m} is not one of -7/2..+7/2")
    return int(idx)


def index_to_m(i: int) -> float:
    return float(M_VALUES[i])


def format_m(m: float) -> str:
    """Render a projection as a ket label, e.g. ``|+5/2>``."""
    return f"|{int(round(2 * m)):+d}/2>"


@dataclass(frozen=True)
class PhysicalConstants:
    planck_h: float = sc.h
    boltzmann_k: float = sc.k


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class StrengthModel:
    """End points of the linear Delta m = -1 / +1 oscillator-strength trends.

    Strengths are relative to the Delta m = 0 lines.  The trend runs over the
    seven transitions of each band, from the one involving m_I = -7/2 to the
    one involving m_I = +7/2.
    """

    minus_start: float = 0.25
    minus_end: float = 0.025
    plus_start: float = 0.31
    plus_end: float = 0.031

    def __post_init__(self):
        for name in ("minus_start", "minus_end", "plus_start", "plus_end"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InvalidConfigError(f"strength {name}={v} outside (0, 1]")


@dataclass(frozen=True)
class IsotopeComposition:
    target_fraction: float = 0.92
    impurity_offset: float = -250e6
    impurity_strength: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.target_fraction <= 1.0:
            raise InvalidConfigError("target_fraction must lie in [0, 1]")
        if self.impurity_strength < 0:
            raise InvalidConfigError("impurity_strength must be >= 0")

    @property
    def impurity_fraction(self) -> float:
        return 1.0 - self.target_fraction


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LevelScheme:
    ground_energies: np.ndarray
    excited_energies: np.ndarray
    optical_origin: float = DEFAULT_OPTICAL_ORIGIN
    zeeman_slope: float = DEFAULT_ZEEMAN_SLOPE
    field: float = DEFAULT_FIELD
    strengths: StrengthModel = dc_field(default_factory=StrengthModel)

    def __post_init__(self):
        g = _readonly(self.ground_energies)
        e = _readonly(self.excited_energies)
        object.__setattr__(self, "ground_energies", g)
        object.__setattr__(self, "excited_energies", e)
        for name, ladder in (("ground", g), ("excited", e)):
            if ladder.shape != (N_LEVELS,):
                raise InvalidConfigError(f"{name} ladder needs {N_LEVELS} energies")
            if ladder[0] != 0.0:
                raise InvalidConfigError(f"{name} ladder must start at 0")
            if np.any(np.diff(ladder) <= 0):
                raise InvalidConfigError(f"{name} ladder must be strictly increasing")
        if self.field < 0:
            raise InvalidConfigError("field must be >= 0")
        if self.zeeman_slope <= 0:
            raise InvalidConfigError("zeeman_slope must be > 0")

    @property
    def zeeman_splitting(self) -> float:
        """Electronic splitting f in Hz."""
        return self.zeeman_slope * self.field

    @property
    def ground_spacings(self) -> np.ndarray:
        return np.diff(self.ground_energies)

    @property
    def excited_spacings(self) -> np.ndarray:
        return np.diff(self.excited_energies)

    def ground_splitting(self, m_a: float, m_b: float) -> float:
        return float(self.ground_energies[m_to_index(m_b)] - self.ground_energies[m_to_index(m_a)])


def _ladder(spacing, name: str) -> np.ndarray:
    sp = np.atleast_1d(np.asarray(spacing, dtype=float))
    if sp.size == 1:
        sp = np.full(N_LEVELS - 1, sp[0])
    if sp.shape != (N_LEVELS - 1,):
        raise InvalidConfigError(f"{name} spacing needs 1 or {N_LEVELS - 1} values")
    if np.any(~np.isfinite(sp)) or np.any(sp <= 0):
        raise InvalidConfigError(f"{name} spacings must be positive")
    return np.concatenate([[0.0], np.cumsum(sp)])


def build_level_scheme(config: Mapping | None = None, **overrides) -> LevelScheme:
    """Build a level scheme from a mapping of parameters.

    Recognised keys: ``field`` (T), ``ground_spacing`` and
    ``excited_spacing`` (Hz, a scalar for a uniform ladder or seven values),
    ``optical_origin`` (Hz), ``zeeman_slope`` (Hz/T) and a nested
    ``strengths`` mapping with ``minus_start``, ``minus_end``, ``plus_start``,
    ``plus_end``.  Keyword overrides take precedence over ``config``.
    """
    cfg = dict(config or {})
    cfg.update(overrides)
    known = {"field", "ground_spacing", "excited_spacing", "optical_origin",
             "zeeman_slope", "strengths"}
    unknown = set(cfg) - known
    if unknown:
        raise InvalidConfigError(f"unknown level-scheme keys: {sorted(unknown)}")
    try:
        field = float(cfg.get("field", DEFAULT_FIELD))
        strengths = cfg.get("strengths") or {}
        if not isinstance(strengths, StrengthModel):
            strengths = StrengthModel(**{k: float(v) for k, v in dict(strengths).items()})
        return LevelScheme(
            ground_energies=_ladder(cfg.get("ground_spacing", DEFAULT_GROUND_SPACING), "ground"),
            excited_energies=_ladder(cfg.get("excited_spacing", DEFAULT_EXCITED_SPACING), "excited"),
            optical_origin=float(cfg.get("optical_origin", DEFAULT_OPTICAL_ORIGIN)),
            zeeman_slope=float(cfg.get("zeeman_slope", DEFAULT_ZEEMAN_SLOPE)),
            field=field,
            strengths=strengths,
        )
    except TypeError as exc:
        raise InvalidConfigError(str(exc)) from exc


def _linear_trend(sign: int, ground_index: int, strengths: StrengthModel) -> float:
    if sign > 0:
        start, end, pos = strengths.plus_start, strengths.plus_end, ground_index
    else:
        start, end, pos = strengths.minus_start, strengths.minus_end, ground_index - 1
    return start + (end - start) * pos / 6.0


def oscillator_strength(delta_m: int, ground_m: float, *, branching: bool = False,
                        strengths: StrengthModel | None = None) -> float:
    """Strength of ``ground_m -> ground_m + delta_m`` relative to Delta m = 0.

    Delta m = +-2, +-3 lines are only available with ``branching=True``; they
    use the geometric extension s(+-1)**|delta_m| evaluated at the same ground
    state.

    >>> oscillator_strength(-1, -2.5)
    0.25
    """
    strengths = strengths or StrengthModel()
    delta_m = int(delta_m)
    gi = m_to_index(ground_m)
    ei = gi + delta_m
    if not 0 <= ei < N_LEVELS:
        raise UnsupportedTransitionError(
            f"no excited state for m_I={ground_m} with delta_m={delta_m}")
    if delta_m == 0:
        return 1.0
    if abs(delta_m) > 3:
        raise UnsupportedTransitionError(f"|delta_m|={abs(delta_m)} > 3 is excluded")
    if abs(delta_m) > 1 and not branching:
        raise UnsupportedTransitionError(
            f"delta_m={delta_m} requires the branching extension")
    return _linear_trend(int(np.sign(delta_m)), gi, strengths) ** abs(delta_m)


@dataclass(frozen=True)
class OpticalTransition:
    ground_m: float
    excited_m: float
    delta_m: int
    frequency: float
    rel_strength: float

    @property
    def ground_index(self) -> int:
        return m_to_index(self.ground_m)

    @property
    def excited_index(self) -> int:
        return m_to_index(self.excited_m)

    @property
    def label(self) -> str:
        return f"{format_m(self.ground_m)}->{format_m(self.excited_m)}"


_BAND_ORDER = (0, -1, 1, -2, 2, -3, 3)


@dataclass(frozen=True)
class TransitionTable:
    transitions: tuple[OpticalTransition, ...]

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self) -> Iterator[OpticalTransition]:
        return iter(self.transitions)

    def __getitem__(self, i) -> OpticalTransition:
        return self.transitions[i]

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([t.frequency for t in self.transitions])

    @property
    def strengths(self) -> np.ndarray:
        return np.array([t.rel_strength for t in self.transitions])

    @property
    def ground_indices(self) -> np.ndarray:
        return np.array([t.ground_index for t in self.transitions], dtype=int)

    @property
    def excited_indices(self) -> np.ndarray:
        return np.array([t.excited_index for t in self.transitions], dtype=int)

    def band(self, delta_m: int) -> list[OpticalTransition]:
        return [t for t in self.transitions if t.delta_m == delta_m]

    def band_centroid(self, delta_m: int) -> float:
        """Unweighted mean frequency of the lines in one Delta m band."""
        lines = self.band(delta_m)
        if not lines:
            raise UnsupportedTransitionError(f"table has no delta_m={delta_m} lines")
        return float(np.mean([t.frequency for t in lines]))

    def find(self, ground_m: float, excited_m: float) -> OpticalTransition:
        for t in self.transitions:
            if t.ground_m == ground_m and t.excited_m == excited_m:
                return t
        raise KeyError((ground_m, excited_m))

    def from_ground(self, ground_index: int) -> list[OpticalTransition]:
        return [t for t in self.transitions if t.ground_index == ground_index]

    def to_excited(self, excited_index: int) -> list[OpticalTransition]:
        return [t for t in self.transitions if t.excited_index == excited_index]

    def strength_matrix(self) -> np.ndarray:
        """Line strengths as an (excited, ground) matrix; zero where absent."""
        s = np.zeros((N_LEVELS, N_LEVELS))
        for t in self.transitions:
            s[t.excited_index, t.ground_index] = t.rel_strength
        return s


def transition_table(scheme: LevelScheme, include_branching: bool = False) -> TransitionTable:
    """Enumerate the optical transitions of ``scheme``.

    Without branching the table holds the 8 Delta m = 0 lines and the 7 lines
    of each Delta m = +-1 band.  With ``include_branching`` the weak
    Delta m = +-2, +-3 lines are appended.
    """
    max_dm = 3 if include_branching else 1
    out = []
    for dm in _BAND_ORDER:
        if abs(dm) > max_dm:
            continue
        for gi in range(N_LEVELS):
            ei = gi + dm
            if not 0 <= ei < N_LEVELS:
                continue
            out.append(OpticalTransition(
                ground_m=index_to_m(gi),
                excited_m=index_to_m(ei),
                delta_m=dm,
                frequency=float(scheme.excited_energies[ei] - scheme.ground_energies[gi]),
                rel_strength=oscillator_strength(dm, index_to_m(gi), branching=True,
                                                 strengths=scheme.strengths),
            ))
    return TransitionTable(tuple(out))


def scheme_to_config(scheme: LevelScheme) -> dict:
    """Inverse of :func:`build_level_scheme`, for round-tripping configs."""
    s = scheme.strengths
    return {
        "field": scheme.field,
        "ground_spacing": [float(x) for x in scheme.ground_spacings],
        "excited_spacing": [float(x) for x in scheme.excited_spacings],
        "optical_origin": scheme.optical_origin,
        "zeeman_slope": scheme.zeeman_slope,
        "strengths": {"minus_start": s.minus_start, "minus_end": s.minus_end,
                      "plus_start": s.plus_start, "plus_end": s.plus_end},
    }


def reflect_populations(p: Sequence[float]) -> np.ndarray:
    """Mirror a population vector under m_I -> -m_I."""
    return np.asarray(p, dtype=float)[::-1].copy()
