"""Experiment pipelines: superradiance, echo phase shifts, Ramsey decay and S21."""

from .common import DEFAULT_LINESHAPE, ensemble_offsets, parallel_map, wrap_phase
from .oat import CONTRAST_FLOOR, default_phase_grid, oat_rate_scan, run_oat
from .ramsey import (RAMSEY_ATOL, RAMSEY_RTOL, crossing_time, default_tau_grid, ramsey_scan,
                     run_ramsey)
from .sequences import (Evolve, PhaseScan, PulseSequence, Record, Rotate, TimeTrace,
                        run_sequence)
from .spectroscopy import fit_s21, noise_std_for_snr, s21_model, synthetic_s21
from .superradiance import (DEFAULT_EPSILON, NEAR_INVERSION_OFFSET, burst_delay,
                            emission_intensity, run_superradiance)

__all__ = [
    "Rotate", "Evolve", "Record", "PulseSequence", "TimeTrace", "PhaseScan", "run_sequence",
    "run_superradiance", "emission_intensity", "burst_delay", "run_oat", "oat_rate_scan",
    "default_phase_grid", "run_ramsey", "ramsey_scan", "default_tau_grid", "crossing_time", "s21_model",
    "fit_s21", "synthetic_s21", "noise_std_for_snr", "ensemble_offsets", "parallel_map",
    "wrap_phase", "DEFAULT_LINESHAPE", "DEFAULT_EPSILON", "NEAR_INVERSION_OFFSET",
    "CONTRAST_FLOOR", "RAMSEY_RTOL", "RAMSEY_ATOL",
]
