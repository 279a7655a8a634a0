"""Desk-scale models of high-field 167Er hyperfine spectroscopy.

Modules: :mod:`levels` (hyperfine ladder and optical transitions),
:mod:`spectrum` (Voigt absorption synthesis, Kramers-Kronig, AM/PM beats),
:mod:`dynamics` (rate equations, spin pumping, relaxation, hole lifetime),
:mod:`holeburn` (hole/anti-hole prediction), :mod:`echo` (Raman echoes),
:mod:`fit` (least squares with RMSD-doubling intervals) and :mod:`cli`.
"""

from .dynamics import (PhononModel, PopulationState, PumpConfig, RelaxationParams, evolve_populations,
                       gamma_of_T, hole_lifetime_vs_field, simulate_spin_pumping, thermal_equilibrium)
from .echo import (EchoDecayModel, EchoEnvelope, EnvelopeConvention, RamanEchoSequence, echo_amplitude,
                   envelope_from_linewidth, fit_echo_decay, linewidth_from_envelope, simulate_raman_echo)
from .errors import (DataFormatError, DomainError, ErsimError, FitError, InsufficientDataError,
                     InvalidConfigError, InvalidStateError, NumericalError, UnidentifiableParameterError,
                     UnsupportedTransitionError)
from .holeburn import HolePattern, predict_holes_antiholes, predict_trench, simulate_hole_decay
from .levels import (IsotopeComposition, LevelScheme, OpticalTransition, StrengthModel, TransitionTable,
                     build_level_scheme, oscillator_strength, transition_table)
from .spectrum import (AbsorptionModel, Lineshape, SpectrumGrid, am_response, dispersion_from_absorption,
                       pm_response, synthesize_absorption, voigt)

__version__ = "0.1.0"
