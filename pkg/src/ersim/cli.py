"""Command-line entry point: one YAML recipe per figure.

Usage::

    ersim spectrum --config configs/spectrum_polarized.yaml --out results/

Every command writes CSV tables plus an SVG plot into the output directory
(``--out``, else ``output.dir`` in the config, else ``$ERSIM_OUT``, else
``./ersim-out``).  Failures print one JSON line with the error category to
stderr and exit 2 (configuration), 3 (numerical) or 4 (I/O).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import io as eio
from .config import COMMANDS, RunConfig, config_from_mapping, load_config
from .dynamics import (PhononModel, PopulationState, PumpConfig, RelaxationParams, evolve_populations,
                       gamma_of_T, hole_lifetime_vs_field, thermal_equilibrium)
from .echo import (EchoDecayModel, RamanEchoSequence, echo_amplitude, envelope_from_linewidth,
                   fit_echo_decay, simulate_raman_echo)
from .errors import ErsimError, InvalidConfigError
from .fit import (fit_eq1, fit_population_fractions, fit_relaxation_timeseries, fit_report,
                  synthetic_rates)
from .holeburn import predict_holes_antiholes, predict_trench, simulate_hole_decay, hole_depth
from .levels import IsotopeComposition, LevelScheme, build_level_scheme, m_to_index, transition_table
from .plot import Figure, save_svg
from .spectrum import (DEFAULT_PEAK_CALIBRATION, AbsorptionModel, Lineshape, SpectrumGrid, am_response,
                       default_grid, pm_response, synthesize_absorption, synthesize_complex)

log = logging.getLogger("ersim")

OUT_ENV = "ERSIM_OUT"
EXIT_CODES = {"config": 2, "numerical": 3, "io": 4}
DEFAULT_GAMMA = 9e-4 * 1.4


class Run:
    """Shared state handed to each command handler."""

    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.scheme: LevelScheme = build_level_scheme(cfg.scheme)
        self.rng = np.random.default_rng(cfg.seed)
        self.written: list[Path] = []

    def path(self, suffix: str) -> Path:
        return self.out / f"{self.cfg.name}{suffix}"

    def keep(self, p: Path) -> Path:
        self.written.append(p)
        log.info("wrote %s", p)
        return p

    def svg(self, fig: Figure, suffix: str = ".svg"):
        return self.keep(save_svg(fig, self.path(suffix)))

    def text(self, body: str, suffix: str):
        return self.keep(eio.atomic_write_text(self.path(suffix), body))


def _float(cfg: RunConfig, key: str, default: float) -> float:
    v = cfg.get(key, default)
    try:
        return float(v)
    except (TypeError, ValueError):
        raise InvalidConfigError(f"{cfg.command}.{key} must be a number") from None


def _axis(spec, default: dict) -> np.ndarray:
    """An explicit list, or a ``{start, stop, num|step, log}`` mapping."""
    if spec is None:
        spec = default
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    if not isinstance(spec, dict):
        raise InvalidConfigError("axis must be a list or a mapping")
    spec = {**default, **spec}
    try:
        start, stop = float(spec["start"]), float(spec["stop"])
        if "step" in spec:
            return default_grid(start, stop, float(spec["step"]))
        num = int(spec.get("num", 50))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfigError(f"bad axis specification: {exc}") from None
    if spec.get("log"):
        return np.geomspace(start, stop, num)
    return np.linspace(start, stop, num)


def _lineshape(p: dict) -> Lineshape:
    return Lineshape.from_total_fwhm(float(p.get("fwhm", 150e6)), float(p.get("gl_ratio", 1.0)))


def _isotopes(p: dict) -> IsotopeComposition | None:
    iso = p.get("isotopes", True)
    if iso is False or iso is None:
        return None
    return IsotopeComposition(**(iso if isinstance(iso, dict) else {}))


def _state(p: dict, scheme: LevelScheme) -> PopulationState:
    kind = p.get("state", "polarized")
    if isinstance(kind, (list, tuple)):
        return PopulationState.from_array(kind, normalize=True)
    if kind == "polarized":
        return PopulationState.polarized(float(p.get("polarized_m", 3.5)), float(p.get("fraction", 0.95)))
    if kind == "uniform":
        return PopulationState.uniform()
    if kind == "thermal":
        return thermal_equilibrium(scheme, float(p.get("temperature", 1.4)))
    raise InvalidConfigError(f"unknown state {kind!r}")


def _branching(p: dict):
    b = p.get("branching")
    return None if b is None else {int(k): float(v) for k, v in dict(b).items()}


def cmd_spectrum(run: Run) -> None:
    p = run.cfg.params
    table = transition_table(run.scheme, include_branching=bool(p.get("include_branching", True)))
    shape = _lineshape(p)
    grid = _axis(p.get("grid"), {"start": -1.6e9, "stop": 1.6e9, "step": 1e6})
    cal = float(p.get("calibration", DEFAULT_PEAK_CALIBRATION))
    iso = _isotopes(p)
    fig = Figure("Absorption spectrum", "detuning (Hz)", "absorption (dB/cm)")
    states = {"": _state(p, run.scheme)}
    if p.get("compare"):
        states["_" + str(p["compare"])] = _state({**p, "state": p["compare"]}, run.scheme)
    for suffix, st in states.items():
        model = AbsorptionModel(table, st, shape, cal, iso)
        spec = synthesize_absorption(model, grid)
        run.keep(eio.write_spectrum(run.path(f"{suffix}.csv"), spec))
        fig.add(spec.frequencies, spec.values, suffix.lstrip("_") or str(p.get("state", "polarized")))
        print(f"peak{suffix or ''} = {float(np.max(spec.values)):.6g} dB/cm")
    run.svg(fig)
    mod = p.get("modulation")
    if mod:
        model = AbsorptionModel(table, states[""], shape, cal, iso)
        complex_spec = synthesize_complex(model, grid)
        fm = _axis(mod.get("frequencies"), {"start": 1e6, "stop": 3e9, "step": 5e6})
        mode = mod.get("mode", "am")
        carrier = float(mod.get("carrier", -2.5e9))
        length = float(mod.get("path_length", 0.6))
        if mode == "am":
            beat = am_response(complex_spec, carrier, fm, length)
        elif mode == "pm":
            beat = pm_response(complex_spec, carrier, fm, length)
        else:
            raise InvalidConfigError(f"unknown modulation mode {mode!r}")
        run.keep(eio.write_spectrum(run.path(f"_{mode}.csv"), beat))
        run.svg(Figure(f"{mode.upper()} beat", "modulation frequency (Hz)", "beat").add(
            beat.frequencies, np.real(beat.values)), f"_{mode}.svg")


def cmd_pump(run: Run) -> None:
    p = run.cfg.params
    gamma = _float(run.cfg, "gamma", DEFAULT_GAMMA)
    rate = p.get("rate")
    rate = float(rate) if rate is not None else gamma * _float(run.cfg, "rate_factor", 1000.0)
    pump = PumpConfig(int(p.get("band", 1)), rate, _branching(p))
    T = p.get("temperature", 1.4)
    T = None if T is None else float(T)
    duration = _float(run.cfg, "duration", 3000.0)
    times = np.linspace(0.0, duration, int(p.get("samples", 101)))
    initial = _state({"state": "thermal" if T is not None else "uniform", "temperature": T, **p}, run.scheme)
    traj = evolve_populations(initial, gamma, run.scheme, T, pump, duration, times=times)
    run.keep(eio.write_trajectory(run.path(".csv"), traj))
    fig = Figure("Spin pumping", "time (s)", "population")
    for i in range(traj.populations.shape[1]):
        fig.add(traj.times, traj.populations[:, i], f"p{i}")
    run.svg(fig)
    target = m_to_index(3.5 if pump.band > 0 else -3.5)
    print(f"final p[{target}] = {traj.populations[-1, target]:.6g}")


def cmd_relax(run: Run) -> None:
    p = run.cfg.params
    params = RelaxationParams(gamma_d=_float(run.cfg, "gamma_d", 9e-4), gamma_r=_float(run.cfg, "gamma_r", 0.0),
                              gamma_or=_float(run.cfg, "gamma_or", 8e-30),
                              f=_float(run.cfg, "f", run.scheme.zeeman_splitting))
    T = _axis(p.get("temperatures"), {"start": 1.4, "stop": 2.6, "num": 13})
    rates = np.atleast_1d(gamma_of_T(params, T))
    run.keep(eio.write_xy(run.path(".csv"), eio.RATE_HEADER, T, rates))
    run.svg(Figure("Spin-lattice relaxation rate", "temperature (K)", "rate (1/s)", ylog=True)
            .add(T, rates, "gamma(T)"))
    print(f"gamma({T[0]:g} K) = {rates[0]:.6g} 1/s")


def cmd_holeburn(run: Run) -> None:
    p = run.cfg.params
    table = transition_table(run.scheme, include_branching=bool(p.get("include_branching", False)))
    branching = _branching(p)
    depth = float(p.get("depth", 1.0))
    if "trench" in p:
        tr = p["trench"]
        pattern = predict_trench(run.scheme, table, float(tr["start"]), float(tr["stop"]), branching,
                                 lineshape=_lineshape(p), depth=depth)
    else:
        if "burn" in p:
            b = p["burn"]
            freq = table.find(float(b["ground_m"]), float(b["excited_m"])).frequency
        else:
            freq = _float(run.cfg, "burn_frequency", table.find(3.5, 3.5).frequency)
        pattern = predict_holes_antiholes(run.scheme, table, freq, branching, depth=depth)
    run.keep(eio.write_pattern(run.path(".csv"), pattern))
    fig = Figure("Holes and anti-holes", "detuning (Hz)", "signed amplitude")
    sgn = [(-1.0 if f.sign == "hole" else 1.0) * f.amplitude for f in pattern.features]
    fig.add([f.frequency for f in pattern.features], sgn, "features", markers=True)
    run.svg(fig)
    decay = p.get("decay")
    if decay:
        cross = {int(k): float(v) for k, v in dict(decay.get("cross_relax", {1: 1.0 / 70})).items()}
        times = np.linspace(0.0, float(decay.get("duration", 300.0)), int(decay.get("samples", 61)))
        series = simulate_hole_decay(pattern, float(decay.get("gamma", DEFAULT_GAMMA)), cross,
                                     float(times[-1]), times=times)
        depths = [hole_depth(pat) for _, pat in series]
        run.keep(eio.write_xy(run.path("_decay.csv"), eio.HOLE_DECAY_HEADER, times, depths))
        run.svg(Figure("Hole decay", "time (s)", "hole depth").add(times, depths), "_decay.svg")
    for f in pattern.features:
        print(f"{f.sign:9s} {f.frequency:.10g} Hz m={f.ground_m:+.1f} amp={f.amplitude:.6g}")


def cmd_lifetime(run: Run) -> None:
    p = dict(run.cfg.params)
    fields = _axis(p.pop("fields", None), {"start": 0.01, "stop": 7.0, "num": 200, "log": True})
    keys = {"temperature", "cross_relax_plateau", "low_field_peak_field", "phonon_coupling",
            "zero_field_cross_rate", "include_spin_lattice"}
    unknown = set(p) - keys
    if unknown:
        raise InvalidConfigError(f"unknown lifetime keys: {sorted(unknown)}")
    model = PhononModel(zeeman_slope=run.scheme.zeeman_slope, **p)
    life = hole_lifetime_vs_field(model, RelaxationParams(f=run.scheme.zeeman_splitting), fields)
    run.keep(eio.write_xy(run.path(".csv"), eio.LIFETIME_HEADER, fields, life))
    run.svg(Figure("Spectral hole lifetime", "field (T)", "lifetime (s)", xlog=True).add(fields, life))
    peaks = np.flatnonzero((life[1:-1] > life[:-2]) & (life[1:-1] > life[2:])) + 1
    for k in peaks:
        print(f"local maximum {life[k]:.6g} s at {fields[k]:.4g} T")
    print(f"lifetime at {fields[-1]:.4g} T: {life[-1]:.6g} s")


def cmd_echo(run: Run) -> None:
    p = run.cfg.params
    model = EchoDecayModel(_float(run.cfg, "t2", 1.3), _float(run.cfg, "mims_x", 1.8))
    tau = _axis(p.get("taus"), {"start": 0.05, "stop": 2.6, "num": 50})
    amp = np.asarray(echo_amplitude(tau, model))
    noise = _float(run.cfg, "noise", 0.0)
    if noise:
        amp = amp * (1.0 + noise * run.rng.standard_normal(amp.shape))
    run.keep(eio.write_xy(run.path("_decay.csv"), eio.DECAY_HEADER, tau, amp))
    fig = Figure("Raman echo decay", "total delay tau (s)", "normalized echo amplitude")
    fig.add(tau, amp, "data", markers=True)
    if p.get("fit", True):
        fit = fit_echo_decay(tau, amp)
        run.text(fit_report(fit.result), "_fit.txt")
        fig.add(tau, fit.amplitude * np.asarray(echo_amplitude(tau, fit.model)), "fit")
        print(f"t2 = {fit.model.t2:.6g} s, x = {fit.model.mims_x:.6g}")
    run.svg(fig, "_decay.svg")
    width = _float(run.cfg, "inhomogeneous_fwhm", 130e3)
    seq = RamanEchoSequence(separation=_float(run.cfg, "separation", 30e-3),
                            window=_float(run.cfg, "window", 20e-6), samples=int(p.get("samples", 801)))
    env = simulate_raman_echo(run.scheme, width, seq, int(p.get("packet_count", 200)),
                              sampling=str(p.get("sampling", "gauss-hermite")), seed=run.cfg.seed,
                              decay=model)
    run.keep(eio.write_echo_trace(run.path("_trace.csv"), env))
    run.svg(Figure("Raman echo envelope", "time after first pulse (s)", "echo amplitude")
            .add(env.times, env.amplitude), "_trace.svg")
    expected = envelope_from_linewidth(width, env.convention) if width > 0 else float("inf")
    print(f"echo at {env.peak_time:.6g} s, envelope FWHM {env.fwhm:.6g} s "
          f"({env.convention.value} convention predicts {expected:.6g} s)")


def _params_table(result) -> str:
    rows = ["parameter,value,low,high,open_low,open_high"]
    for n in result.names:
        iv = result.intervals.get(n)
        lo, hi = (iv.low, iv.high) if iv else (float("nan"), float("nan"))
        ol, oh = (iv.open_low, iv.open_high) if iv else (False, False)
        rows.append(f"{n},{result.params[n]:.17g},{lo:.17g},{hi:.17g},{str(ol).lower()},{str(oh).lower()}")
    return "\n".join(rows) + "\n"


def _fit_eq1(run: Run, p: dict):
    f = _float(run.cfg, "f", run.scheme.zeeman_splitting)
    if "input" in p:
        T, y = eio.read_xy(run.cfg.input_path(p["input"]), eio.RATE_HEADER)
    else:
        syn = dict(p.get("synthetic", {}))
        params = RelaxationParams(float(syn.get("gamma_d", 9e-4)), float(syn.get("gamma_r", 0.0)),
                                  float(syn.get("gamma_or", 8e-30)), f)
        T = _axis(syn.get("temperatures"), {"start": 1.4, "stop": 2.6, "num": 13})
        y = synthetic_rates(params, T, float(syn.get("noise", 0.0)), run.rng)
    res = fit_eq1(T, y, f, t_max=float(p.get("t_max", 2.6)), gamma_r=float(p.get("gamma_r", 0.0)))
    fitted = gamma_of_T(RelaxationParams(res["gamma_d"], float(p.get("gamma_r", 0.0)), res["gamma_or"], f), T)
    fig = Figure("Rate vs temperature", "temperature (K)", "rate (1/s)", ylog=True)
    fig.add(T, y, "data", markers=True).add(T, fitted, "fit")
    return res, fig


def _fit_echo(run: Run, p: dict):
    if "input" in p:
        tau, amp = eio.read_xy(run.cfg.input_path(p["input"]), eio.DECAY_HEADER)
    else:
        syn = dict(p.get("synthetic", {}))
        model = EchoDecayModel(float(syn.get("t2", 1.3)), float(syn.get("mims_x", 1.8)))
        tau = _axis(syn.get("taus"), {"start": 0.05, "stop": 2.6, "num": 50})
        amp = np.asarray(echo_amplitude(tau, model)) * (1 + float(syn.get("noise", 0.0))
                                                         * run.rng.standard_normal(tau.size))
    fit = fit_echo_decay(tau, amp)
    fig = Figure("Echo decay fit", "total delay tau (s)", "amplitude")
    fig.add(tau, amp, "data", markers=True).add(tau, fit.amplitude * np.asarray(echo_amplitude(tau, fit.model)), "fit")
    return fit.result, fig


def _synthetic_spectrum(run: Run, state: PopulationState, p: dict, grid) -> SpectrumGrid:
    table = transition_table(run.scheme, include_branching=True)
    spec = synthesize_absorption(AbsorptionModel(table, state, _lineshape(p)), grid)
    noise = float(p.get("noise", 0.0))
    if noise:
        spec = SpectrumGrid(spec.frequencies, spec.values * (1 + noise * run.rng.standard_normal(len(spec))),
                            spec.units)
    return spec


def _fit_populations(run: Run, p: dict):
    if "input" in p:
        spec = eio.read_spectrum(run.cfg.input_path(p["input"]))
    else:
        syn = dict(p.get("synthetic", {}))
        grid = _axis(syn.get("grid"), {"start": -1.6e9, "stop": 1.6e9, "step": 2e6})
        spec = _synthetic_spectrum(run, _state(syn, run.scheme), {**p, **syn}, grid)
    state, res = fit_population_fractions(spec, run.scheme, _lineshape(p))
    fig = Figure("Fitted ground populations", "ground index", "population")
    fig.add(np.arange(state.p.size), state.p, "fit", markers=True)
    print("populations = " + " ".join(f"{v:.6g}" for v in state.p))
    return res, fig


def _fit_relaxation(run: Run, p: dict):
    T = p.get("temperature", 1.4)
    T = None if T is None else float(T)
    if "inputs" in p:
        items = sorted(((float(i["time"]), i["path"]) for i in p["inputs"]), key=lambda x: x[0])
        times = np.array([t for t, _ in items])
        spectra = [eio.read_spectrum(run.cfg.input_path(path)) for _, path in items]
    else:
        syn = dict(p.get("synthetic", {}))
        times = np.asarray(syn.get("times", [0, 200, 400, 800, 1600, 3200]), dtype=float)
        grid = _axis(syn.get("grid"), {"start": -1.6e9, "stop": 1.6e9, "step": 4e6})
        traj = evolve_populations(_state(syn, run.scheme), float(syn.get("gamma", DEFAULT_GAMMA)),
                                  run.scheme, T, None, float(times[-1]), times=times - times[0],
                                  method="expm")
        spectra = [_synthetic_spectrum(run, st, {**p, **syn}, grid) for st in traj.states()]
    res = fit_relaxation_timeseries(times, spectra, run.scheme, _lineshape(p), T=T)
    fig = Figure("Relaxation series", "detuning (Hz)", "absorption (dB/cm)")
    for t, s in zip(times, spectra):
        fig.add(s.frequencies, s.values, f"t={t:g} s")
    return res, fig


FIT_KINDS: dict[str, Callable] = {"eq1": _fit_eq1, "echo": _fit_echo, "populations": _fit_populations,
                                  "relaxation": _fit_relaxation}


def cmd_fit(run: Run) -> None:
    p = run.cfg.params
    kind = p.get("kind", "eq1")
    if kind not in FIT_KINDS:
        raise InvalidConfigError(f"unknown fit kind {kind!r}; expected one of {', '.join(FIT_KINDS)}")
    res, fig = FIT_KINDS[kind](run, p)
    report = fit_report(res)
    run.text(report, "_report.txt")
    run.text(_params_table(res), "_params.csv")
    run.svg(fig)
    sys.stdout.write(report)


HANDLERS: dict[str, Callable[[Run], None]] = {
    "spectrum": cmd_spectrum, "pump": cmd_pump, "relax": cmd_relax, "holeburn": cmd_holeburn,
    "lifetime": cmd_lifetime, "echo": cmd_echo, "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ersim",
        description="Simulate and fit high-field 167Er hyperfine spectroscopy experiments.",
        epilog=("Echo decays are tabulated against the total delay tau from the first pulse to the "
                f"echo, not the pulse separation.  Output directory: --out, then output.dir, then ${OUT_ENV}."))
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="recipe to run (or set 'command' in the config)")
    ap.add_argument("--config", type=Path, help="YAML recipe")
    ap.add_argument("--out", type=Path, help="output directory")
    ap.add_argument("--seed", type=int, help="seed for stochastic options (overrides the config)")
    ap.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return ap


def _fail(category: str, message: str) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return EXIT_CODES.get(category, 1)


def run(cfg: RunConfig, out_dir: Path) -> list[Path]:
    """Execute one recipe and return the files written."""
    r = Run(cfg, out_dir)
    HANDLERS[cfg.command](r)
    return r.written


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config is not None:
            cfg = load_config(args.config, command=args.command)
        elif args.command:
            cfg = config_from_mapping({}, command=args.command)
        else:
            ap.print_usage(sys.stderr)
            return _fail("config", "no command or config given")
        if args.seed is not None:
            cfg.seed = args.seed
            RunConfig.__post_init__(cfg)
        out = args.out or cfg.out_dir or Path(os.environ.get(OUT_ENV, "ersim-out"))
        written = run(cfg, out)
    except ErsimError as exc:
        if exc.category == "config":
            ap.print_usage(sys.stderr)
        return _fail(exc.category, str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    for p in written:
        log.info("output %s", p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
