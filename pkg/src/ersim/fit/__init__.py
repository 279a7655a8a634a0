"""Least-squares engine, RMSD-doubling intervals and experiment fit drivers."""

from .drivers import (BOTTLENECK_TEMPERATURE, eq1_params, fit_eq1, fit_population_fractions,
                      fit_relaxation_timeseries, orbach_for_crossover, synthetic_rates)
from .engine import (FitResult, Interval, fd_jacobian, fit_report, least_squares, rmsd_at,
                     rmsd_doubling_intervals)

__all__ = [
    "BOTTLENECK_TEMPERATURE", "FitResult", "Interval", "eq1_params", "fd_jacobian", "fit_eq1",
    "fit_population_fractions", "fit_relaxation_timeseries", "fit_report", "least_squares",
    "orbach_for_crossover", "rmsd_at", "rmsd_doubling_intervals", "synthetic_rates",
]
