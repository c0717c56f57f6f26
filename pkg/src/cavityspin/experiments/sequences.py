"""Pulse sequences and the records produced by running them."""

from dataclasses import dataclass, field
import math

import numpy as np

from ..dynamics import (DEFAULT_ATOL, DEFAULT_RTOL, EnsembleState, apply_rotation,
                        evolve_ensemble)

__all__ = [
    "Rotate",
    "Evolve",
    "Record",
    "PulseSequence",
    "TimeTrace",
    "PhaseScan",
    "run_sequence",
]


@dataclass(frozen=True)
class Rotate:
    """Instantaneous rotation about the equatorial axis at ``axis_azimuth``."""

    axis_azimuth: float
    angle: float


@dataclass(frozen=True)
class Evolve:
    """Free evolution under the interaction model for ``duration`` seconds."""

    duration: float

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ValueError(f"evolution duration must be finite and >= 0, got {self.duration}")


@dataclass(frozen=True)
class Record:
    """Snapshot of the listed observables at this point of the sequence."""

    observables: tuple = ("s_plus", "s_z", "coherence")
    label: str = ""


@dataclass(frozen=True)
class PulseSequence:
    """Ordered list of :class:`Rotate`, :class:`Evolve` and :class:`Record` steps."""

    steps: tuple

    def __post_init__(self):
        steps = tuple(self.steps)
        for s in steps:
            if not isinstance(s, (Rotate, Evolve, Record)):
                raise TypeError(f"unsupported sequence step {s!r}")
        if not any(isinstance(s, Record) for s in steps):
            raise ValueError("a pulse sequence needs at least one Record step")
        object.__setattr__(self, "steps", steps)

    @property
    def duration(self):
        return sum(s.duration for s in self.steps if isinstance(s, Evolve))

    @classmethod
    def hahn_echo(cls, theta, tau, readout_phase=None):
        """Rotate(x, theta), tau/2, Rotate(x, pi), tau/2, then record.

        With ``readout_phase`` a final pi/2 pulse about that azimuth precedes
        the record.
        """
        steps = [Rotate(0.0, theta), Evolve(tau / 2), Rotate(0.0, math.pi), Evolve(tau / 2)]
        if readout_phase is not None:
            steps.append(Rotate(readout_phase, math.pi / 2))
        steps.append(Record(label="readout"))
        return cls(tuple(steps))

    @classmethod
    def ramsey(cls, tau):
        return cls((Rotate(0.0, math.pi / 2), Evolve(tau), Record(label="readout")))


@dataclass
class TimeTrace:
    """Uniformly described record of an observable versus time.

    Attributes
    ----------
    times : ndarray
        Seconds, strictly increasing.
    values : ndarray
        Observable values.
    observable : str
    unit : str
    columns : dict
        Extra aligned columns ``name -> (values, unit)``.
    metadata : dict
    """

    times: np.ndarray
    values: np.ndarray
    observable: str
    unit: str = "1"
    columns: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.times.size != self.values.size:
            raise ValueError("times and values differ in length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.values))):
            raise ValueError("trace contains non-finite values")

    def __len__(self):
        return self.times.size

    def table(self):
        """Column names, units and a 2-D array for tabular output."""
        names = ["time", self.observable] + list(self.columns)
        units = ["s", self.unit] + [u for _, u in self.columns.values()]
        data = np.column_stack([self.times, self.values]
                               + [np.asarray(v, float) for v, _ in self.columns.values()])
        return names, units, data


@dataclass
class PhaseScan:
    """Readout populations versus final-pulse phase and the extracted phase shift.

    Attributes
    ----------
    phi : ndarray
        Readout-pulse azimuths (rad).
    p_up : ndarray
        Populations ``(1 + s_z) / 2`` after the readout pulse.
    delta_phi : float
        Phase shift in the convention ``+chi_n tau cos(theta)`` for positive
        detuning.
    delta_phi_sigma : float
    raw_phase : float
        Signed azimuth change of the collective spin relative to an ideal echo.
    direct_delta_phi : float
        Same quantity read from the pre-readout collective azimuth.
    contrast : float
    fit : FitResult
    metadata : dict
    """

    phi: np.ndarray
    p_up: np.ndarray
    delta_phi: float
    delta_phi_sigma: float
    raw_phase: float
    direct_delta_phi: float
    contrast: float
    fit: object = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.p_up = np.asarray(self.p_up, dtype=float)
        if self.phi.size < 8:
            raise ValueError("a phase scan needs at least 8 phase points")
        if np.ptp(self.phi) < 2 * math.pi * (1 - 1 / self.phi.size) - 1e-12:
            raise ValueError("phase points must span a full turn")


def run_sequence(model, state, sequence, rel_tol=DEFAULT_RTOL, abs_tol=DEFAULT_ATOL,
                 max_step=np.inf):
    """Apply a pulse sequence to an ensemble.

    Returns
    -------
    final : EnsembleState
    records : list of (label, dict)
        Observables captured at each :class:`Record` step.
    """
    if not isinstance(state, EnsembleState):
        raise TypeError("pulse sequences act on EnsembleState objects")
    records = []
    for step in sequence.steps:
        if isinstance(step, Rotate):
            state = apply_rotation(state, step.axis_azimuth, step.angle)
        elif isinstance(step, Evolve):
            if step.duration > 0:
                traj = evolve_ensemble(model, state, step.duration, rel_tol, abs_tol,
                                       record=("coherence",), max_step=max_step)
                state = traj.final_state
        else:
            mf = state.mean_field()
            obs = {"s_plus": mf.s_plus, "s_z": mf.s_z, "coherence": abs(mf.s_plus)}
            records.append((step.label, {k: obs[k] for k in step.observables}))
    return state, records
