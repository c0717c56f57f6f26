"""Mean-field equations of motion.

Frequencies enter in Hz and are converted to angular rates here.  States are
per-spin normalized, so every collective operator contributes one factor of
``n0`` that is already contained in ``chi_n`` and ``gamma_c``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .state import pairwise_sum

__all__ = [
    "CollectiveModel",
    "DispersiveModel",
    "collective_rhs",
    "dispersive_rhs",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CollectiveModel:
    """Resonant superradiance of a single collective Bloch vector.

    Parameters
    ----------
    gamma_c : float
        Collective emission rate in Hz.
    gamma_sr_single : float
        Single-spin emission rate in Hz (self-decay of ``s_z``).
    self_decay : bool
        Keep the single-spin decay term.
    """

    gamma_c: float
    gamma_sr_single: float = 0.0
    self_decay: bool = True

    @property
    def a(self):
        return 0.5 * math.pi * self.gamma_c

    @property
    def b(self):
        return 0.5 * math.pi * self.gamma_sr_single if self.self_decay else 0.0

    def __call__(self, state):
        return collective_rhs(state, self.gamma_c, self.gamma_sr_single if self.self_decay else 0.0)

    def fun(self, t, y):
        x, yy, z = y
        a = self.a
        return np.array([a * x * z, a * yy * z, -a * (x * x + yy * yy) - self.b * z])

    def jac(self, t, y):
        x, yy, z = y
        a = self.a
        return np.array([
            [a * z, 0.0, a * x],
            [0.0, a * z, a * yy],
            [-2 * a * x, -2 * a * yy, -self.b],
        ])


def collective_rhs(state, gamma_c, gamma_sr_single):
    """Time derivative of the collective Bloch vector under superradiance.

    Returns
    -------
    (complex, float)
        ``(d s_plus / dt, d s_z / dt)`` in 1/s.
    """
    a = 0.5 * math.pi * gamma_c
    b = 0.5 * math.pi * gamma_sr_single
    sp, sz = state.s_plus, state.s_z
    return a * sp * sz, -a * abs(sp) ** 2 - b * sz


@dataclass(frozen=True)
class DispersiveModel:
    """All-to-all exchange plus collective decay for a detuned ensemble.

    Parameters
    ----------
    chi_n, gamma_c, gamma_sr_single, gamma_2 : float
        Rates in Hz.
    self_decay : bool
        Keep the single-spin decay of ``s_z``.
    coupling_cutoff : float or None
        Groups detuned by more than ``coupling_cutoff * max(chi_eff, IQR)``
        are propagated as free precessors and do not feed the collective
        field. ``chi_eff = |c| / 2 pi`` is the magnitude of the complex
        coupling and IQR the interquartile range of the offsets. ``None``
        couples every group.
    """

    chi_n: float
    gamma_c: float = 0.0
    gamma_sr_single: float = 0.0
    gamma_2: float = 0.0
    self_decay: bool = True
    coupling_cutoff: float = 20.0

    @classmethod
    def from_rates(cls, rates, gamma_2=0.0, **kwargs):
        return cls(chi_n=rates.chi_n, gamma_c=rates.gamma_c,
                   gamma_sr_single=rates.gamma_sr_single, gamma_2=gamma_2, **kwargs)

    @property
    def coupling(self):
        """Complex coefficient ``c`` multiplying ``S_hat * s_z`` in 1/s."""
        return complex(0.5 * math.pi * self.gamma_c, -TWO_PI * self.chi_n)

    @property
    def dephasing(self):
        return TWO_PI * self.gamma_2

    @property
    def z_decay(self):
        return 0.5 * math.pi * self.gamma_sr_single if self.self_decay else 0.0

    @property
    def chi_eff(self):
        return abs(self.coupling) / TWO_PI

    def cutoff_hz(self, offsets):
        """Detuning beyond which groups are treated as free precessors."""
        if self.coupling == 0:
            return -1.0
        if self.coupling_cutoff is None:
            return np.inf
        off = np.asarray(offsets, dtype=float)
        q1, q3 = np.percentile(off, [25, 75])
        return self.coupling_cutoff * max(self.chi_eff, q3 - q1)

    def __call__(self, state):
        return _dispersive(state, self.coupling, self.dephasing, self.z_decay)


def _dispersive(state, c, g2, gz):
    f = state.fractions
    s_hat = pairwise_sum(f * state.s_plus)
    omega = TWO_PI * state.offsets.offsets
    u = c * s_hat
    dsp = u * state.s_z + (1j * omega - g2) * state.s_plus
    dsz = -(u * np.conj(state.s_plus)).real - gz * state.s_z
    return dsp, dsz


def dispersive_rhs(state, rates, gamma_2, self_decay=True):
    """Per-group derivative of an :class:`EnsembleState` in the lab frame.

    Parameters
    ----------
    state : EnsembleState
    rates : DerivedRates
    gamma_2 : float
        Homogeneous dephasing rate in Hz.

    Returns
    -------
    (ndarray, ndarray)
        ``d s_plus_j / dt`` (complex) and ``d s_z_j / dt`` (real), 1/s.
    """
    model = DispersiveModel.from_rates(rates, gamma_2=gamma_2, self_decay=self_decay)
    return model(state)
