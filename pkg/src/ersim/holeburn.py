"""Hole and anti-hole patterns from spectrally selective burning.

A burn moves population out of the ground state of the addressed
transition.  Excited ions decay according to the branching law, and any
population returning to the burned state is burned again, so the removed
population ends up distributed over the other destinations.

Feature amplitudes are population changes weighted by each line's share of
its ground state's total oscillator strength.  With that normalization the
summed hole amplitude equals the summed anti-hole amplitude whenever the
pattern is open (some population leaves the burned state).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

import numpy as np

from .dynamics import branching_matrix
from .errors import DomainError
from .levels import N_LEVELS, LevelScheme, TransitionTable, transition_table
from .spectrum import DEFAULT_LINESHAPE, Lineshape, voigt

HOLE = "hole"
ANTIHOLE = "anti-hole"


@dataclass(frozen=True)
class HoleFeature:
    frequency: float
    sign: str
    amplitude: float
    ground_m: float


@dataclass(frozen=True)
class Transfer:
    """``amount`` of population moved from ground ``source`` to ``dest``.

    ``dest`` is None for a closed burn, where the population has nowhere else
    to go and the hole stands alone.
    """

    source: int
    dest: int | None
    amount: float


@dataclass(frozen=True)
class HolePattern:
    features: tuple[HoleFeature, ...]
    transfers: tuple[Transfer, ...] = ()
    table: TransitionTable | None = dc_field(default=None, compare=False, repr=False)
    warnings: tuple[str, ...] = ()

    @property
    def holes(self) -> list[HoleFeature]:
        return [f for f in self.features if f.sign == HOLE]

    @property
    def antiholes(self) -> list[HoleFeature]:
        return [f for f in self.features if f.sign == ANTIHOLE]

    @property
    def hole_area(self) -> float:
        return float(sum(f.amplitude for f in self.holes))

    @property
    def antihole_area(self) -> float:
        return float(sum(f.amplitude for f in self.antiholes))

    @property
    def closed(self) -> bool:
        return any(t.dest is None for t in self.transfers)

    def antihole_labels(self) -> list[float]:
        """Distinct ground projections carrying anti-holes, in table order."""
        seen = []
        for f in self.antiholes:
            if f.ground_m not in seen:
                seen.append(f.ground_m)
        return seen


def population_change(transfers: Sequence[Transfer]) -> tuple[np.ndarray, np.ndarray]:
    """Net population change per ground state, split into (open, closed) parts."""
    open_ = np.zeros(N_LEVELS)
    closed = np.zeros(N_LEVELS)
    for t in transfers:
        if t.dest is None:
            closed[t.source] -= t.amount
        else:
            open_[t.source] -= t.amount
            open_[t.dest] += t.amount
    return open_, closed


def render_pattern(table: TransitionTable, transfers: Sequence[Transfer],
                   warnings_: tuple[str, ...] = ()) -> HolePattern:
    open_, closed = population_change(transfers)
    dp = open_ + closed
    totals = np.zeros(N_LEVELS)
    for t in table:
        totals[t.ground_index] += t.rel_strength
    features = []
    for t in table:
        d = dp[t.ground_index]
        if d == 0.0:
            continue
        amp = abs(d) * t.rel_strength / totals[t.ground_index]
        features.append(HoleFeature(t.frequency, HOLE if d < 0 else ANTIHOLE, amp, t.ground_m))
    return HolePattern(tuple(features), tuple(transfers), table, warnings_)


def _transfers_for(table: TransitionTable, index: int, bmat: np.ndarray, depth: float) -> list[Transfer]:
    t = table[index]
    g, e = t.ground_index, t.excited_index
    back = bmat[g, e]
    if back >= 1.0 - 1e-15:
        return [Transfer(g, None, depth)]
    out = []
    for j in range(N_LEVELS):
        if j != g and bmat[j, e] > 0:
            out.append(Transfer(g, j, depth * bmat[j, e] / (1.0 - back)))
    return out


def predict_holes_antiholes(scheme: LevelScheme, table: TransitionTable | None, burn_freq: float,
                            branching: Mapping[int, float] | None = None, *, depth: float = 1.0,
                            capture: float = 3 * 150e6) -> HolePattern:
    """Pattern left by a narrow burn at ``burn_freq`` (Hz from the optical origin).

    The burn addresses the nearest transition in ``table``; if none lies
    within ``capture`` Hz the pattern is empty and carries a warning.
    ``branching`` follows :class:`ersim.dynamics.PumpConfig` (decay change
    m_ground - m_excited -> probability; None uses line strengths).
    """
    if table is None:
        table = transition_table(scheme, include_branching=True)
    if depth < 0:
        raise DomainError("depth must be >= 0")
    dist = np.abs(table.frequencies - burn_freq)
    idx = int(np.argmin(dist))
    if dist[idx] > capture:
        msg = f"burn at {burn_freq:.6g} Hz is not resonant with any transition"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return HolePattern((), (), table, (msg,))
    bmat = branching_matrix(table, branching)
    return render_pattern(table, _transfers_for(table, idx, bmat, depth))


def predict_trench(scheme: LevelScheme, table: TransitionTable | None, lo: float, hi: float,
                   branching: Mapping[int, float] | None = None, *,
                   lineshape: Lineshape = DEFAULT_LINESHAPE, depth: float = 1.0,
                   samples: int = 201) -> HolePattern:
    """Pattern from sweeping the burn over ``[lo, hi]``.

    Each transition is burned in proportion to its strength times the
    integral of its lineshape over the trench; the total burned population is
    ``depth``.
    """
    if table is None:
        table = transition_table(scheme, include_branching=True)
    if not hi > lo:
        raise DomainError("trench needs hi > lo")
    nu = np.linspace(lo, hi, samples)
    kernel = voigt(nu[None, :] - table.frequencies[:, None], lineshape).real
    w = table.strengths * np.trapezoid(kernel, nu, axis=1)
    w = np.where(w > 1e-9 * w.max(), w, 0.0)
    w = w / w.sum()
    bmat = branching_matrix(table, branching)
    transfers = []
    for i in np.flatnonzero(w):
        transfers += _transfers_for(table, int(i), bmat, depth * w[i])
    return render_pattern(table, transfers)


def _pair_rate(t: Transfer, gamma: float, cross_relax: Mapping[int, float]) -> float:
    if t.dest is None:
        return gamma
    dm = t.dest - t.source
    return gamma + float(cross_relax.get(dm, cross_relax.get(-dm, 0.0)))


def simulate_hole_decay(pattern: HolePattern, gamma: float, cross_relax: Mapping[int, float] | None,
                        duration: float, *, times: Sequence[float] | None = None
                        ) -> list[tuple[float, HolePattern]]:
    """Relax each hole/anti-hole pair exponentially.

    A pair separated by Delta m relaxes at ``gamma + cross_relax[Delta m]``;
    a closed hole relaxes at ``gamma``.  Returns ``(time, pattern)`` pairs.
    """
    cross_relax = {int(k): float(v) for k, v in dict(cross_relax or {}).items()}
    if gamma < 0 or any(v < 0 for v in cross_relax.values()):
        raise DomainError("rates must be >= 0")
    if duration < 0:
        raise DomainError("duration must be >= 0")
    ts = np.linspace(0.0, duration, 11) if times is None else np.asarray(times, dtype=float)
    if pattern.table is None and pattern.transfers:
        raise DomainError("pattern lacks its transition table")
    out = []
    for t in ts:
        transfers = [Transfer(x.source, x.dest, x.amount * np.exp(-_pair_rate(x, gamma, cross_relax) * t))
                     for x in pattern.transfers]
        out.append((float(t), render_pattern(pattern.table, transfers) if transfers else pattern))
    return out


def hole_depth(pattern: HolePattern, ground_m: float | None = None) -> float:
    """Summed hole amplitude, optionally for one ground state."""
    return float(sum(f.amplitude for f in pattern.holes
                     if ground_m is None or f.ground_m == ground_m))
