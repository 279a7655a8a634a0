"""CSV readers and writers for every emitted table.

Floats are written with 17 significant digits so files round-trip exactly.
All writes go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Trajectory
from .echo import EchoEnvelope
from .errors import DataFormatError
from .holeburn import HoleFeature, HolePattern
from .levels import N_LEVELS
from .spectrum import SpectrumGrid


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_table(path, header: Sequence[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != list(header):
        raise DataFormatError(f"{path}: expected header {','.join(header)}")
    return [r for r in rows[1:] if r]


def _numeric(path, header) -> np.ndarray:
    rows = read_table(path, header)
    try:
        return np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


SPECTRUM_HEADER = ("frequency_hz", "value")
TRAJECTORY_HEADER = ("time_s",) + tuple(f"p{i}" for i in range(N_LEVELS))
LIFETIME_HEADER = ("field_T", "lifetime_s")
RATE_HEADER = ("temperature_K", "rate_per_s")
HOLE_DECAY_HEADER = ("time_s", "hole_depth")
PATTERN_HEADER = ("frequency_hz", "sign", "amplitude", "ground_m")
ECHO_HEADER = ("time_s", "amplitude")
DECAY_HEADER = ("tau_s", "amplitude")


def write_spectrum(path, grid: SpectrumGrid) -> Path:
    return write_table(path, SPECTRUM_HEADER, zip(grid.frequencies, np.real(grid.values)))


def read_spectrum(path, units: str = "dB/cm") -> SpectrumGrid:
    a = _numeric(path, SPECTRUM_HEADER)
    return SpectrumGrid(a[:, 0], a[:, 1], units)


def write_trajectory(path, traj: Trajectory) -> Path:
    return write_table(path, TRAJECTORY_HEADER,
                       ([t, *p] for t, p in zip(traj.times, traj.populations)))


def read_trajectory(path) -> Trajectory:
    a = _numeric(path, TRAJECTORY_HEADER)
    return Trajectory(a[:, 0], a[:, 1:])


def write_xy(path, header: Sequence[str], x, y) -> Path:
    return write_table(path, header, zip(np.asarray(x, dtype=float), np.asarray(y, dtype=float)))


def read_xy(path, header: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    a = _numeric(path, header)
    return a[:, 0], a[:, 1]


def write_pattern(path, pattern: HolePattern) -> Path:
    return write_table(path, PATTERN_HEADER,
                       ([f.frequency, f.sign, f.amplitude, f.ground_m] for f in pattern.features))


def read_pattern(path) -> list[HoleFeature]:
    out = []
    for r in read_table(path, PATTERN_HEADER):
        try:
            out.append(HoleFeature(float(r[0]), r[1], float(r[2]), float(r[3])))
        except (ValueError, IndexError) as exc:
            raise DataFormatError(f"{path}: {exc}") from None
    return out


def write_echo_trace(path, env: EchoEnvelope) -> Path:
    return write_xy(path, ECHO_HEADER, env.times, env.amplitude)


def read_echo_trace(path) -> EchoEnvelope:
    t, a = read_xy(path, ECHO_HEADER)
    return EchoEnvelope(t, a)
