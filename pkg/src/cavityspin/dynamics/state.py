"""Bloch-vector state containers, global rotations and the collective field."""

from dataclasses import dataclass, replace
import math

import numpy as np

from ..lineshape import OffsetSet

__all__ = [
    "BlochState",
    "EnsembleState",
    "apply_rotation",
    "pairwise_sum",
    "rotation_matrix",
    "NORM_SLACK",
]

NORM_SLACK = 1e-9


def pairwise_sum(x):
    """Sum along the first axis with a fixed binary-tree order.

    The association order depends only on the length of ``x``, so serial
    and threaded callers obtain bit-identical results.
    """
    x = np.asarray(x)
    if x.shape[0] == 0:
        return np.zeros(x.shape[1:], dtype=x.dtype)
    while x.shape[0] > 1:
        if x.shape[0] % 2:
            head, x = x[:1], x[1:]
            x = x[0::2] + x[1::2]
            x = np.concatenate([head, x])
        else:
            x = x[0::2] + x[1::2]
    return x[0]


def rotation_matrix(axis_azimuth, angle):
    """Rotation by ``angle`` about the equatorial axis ``(cos phi, sin phi, 0)``."""
    kx, ky = math.cos(axis_azimuth), math.sin(axis_azimuth)
    c, s = math.cos(angle), math.sin(angle)
    v = 1.0 - c
    return np.array([
        [c + kx * kx * v, kx * ky * v, ky * s],
        [kx * ky * v, c + ky * ky * v, -kx * s],
        [-ky * s, kx * s, c],
    ])


@dataclass(frozen=True)
class BlochState:
    """Normalized collective Bloch vector.

    Attributes
    ----------
    s_plus : complex
        Transverse coherence ``x + i y``.
    s_z : float
        Inversion in ``[-1, 1]``.
    """

    s_plus: complex
    s_z: float

    def __post_init__(self):
        object.__setattr__(self, "s_plus", complex(self.s_plus))
        object.__setattr__(self, "s_z", float(self.s_z))

    @classmethod
    def south_pole(cls):
        return cls(0j, -1.0)

    @classmethod
    def from_angles(cls, theta, phi=math.pi / 2):
        """Coherent state at polar angle ``theta`` measured from the south pole."""
        return cls(math.sin(theta) * complex(math.cos(phi), math.sin(phi)), -math.cos(theta))

    @property
    def vector(self):
        return np.array([self.s_plus.real, self.s_plus.imag, self.s_z])

    @property
    def norm(self):
        return math.sqrt(abs(self.s_plus) ** 2 + self.s_z ** 2)

    @property
    def azimuth(self):
        return math.atan2(self.s_plus.imag, self.s_plus.real)


@dataclass(frozen=True)
class EnsembleState:
    """Per-group Bloch vectors of a dispersive-regime ensemble.

    Attributes
    ----------
    s_plus : ndarray of complex, shape (n,)
    s_z : ndarray of float, shape (n,)
    offsets : OffsetSet
        Frequency offsets in Hz.
    weights : ndarray, shape (n,)
        Spins per group; they sum to ``n0``.
    time : float
        Seconds.
    """

    s_plus: np.ndarray
    s_z: np.ndarray
    offsets: OffsetSet
    weights: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        sp = np.array(self.s_plus, dtype=complex).reshape(-1)
        sz = np.array(self.s_z, dtype=float).reshape(-1)
        off = self.offsets if isinstance(self.offsets, OffsetSet) else OffsetSet(self.offsets)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if not (sp.size == sz.size == len(off) == w.size):
            raise ValueError("groups, offsets and weights must have equal length")
        if np.any(w <= 0):
            raise ValueError("group weights must be positive")
        for a in (sp, sz, w):
            a.setflags(write=False)
        object.__setattr__(self, "s_plus", sp)
        object.__setattr__(self, "s_z", sz)
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def polarized(cls, offsets, n0=1.0, weights=None):
        """All groups at the south pole with equal weights summing to ``n0``."""
        off = offsets if isinstance(offsets, OffsetSet) else OffsetSet(offsets)
        n = len(off)
        if weights is None:
            total = n0 if n0 > 0 else 1.0
            weights = np.full(n, total / n)
        return cls(np.zeros(n, complex), -np.ones(n), off, weights)

    @property
    def n_groups(self):
        return self.s_z.size

    @property
    def n0(self):
        return float(pairwise_sum(self.weights))

    @property
    def fractions(self):
        return self.weights / self.n0

    def collective_field(self):
        """``S_plus = 1/2 sum_j w_j s_plus_j``, evaluated afresh."""
        return 0.5 * pairwise_sum(self.weights * self.s_plus)

    def mean_field(self):
        """Normalized collective state ``2 <J> / n0``."""
        f = self.fractions
        return BlochState(pairwise_sum(f * self.s_plus), pairwise_sum(f * self.s_z))

    def coherence(self):
        """Normalized transverse magnetization ``2 |S_plus| / n0``."""
        return abs(pairwise_sum(self.fractions * self.s_plus))

    def total_sz(self):
        return 0.5 * float(pairwise_sum(self.weights * self.s_z))

    def norms(self):
        return np.sqrt(np.abs(self.s_plus) ** 2 + self.s_z ** 2)

    def with_groups(self, s_plus, s_z, time=None):
        return replace(self, s_plus=s_plus, s_z=s_z,
                       time=self.time if time is None else time)


def apply_rotation(state, axis_azimuth, angle):
    """Rotate every Bloch vector about an equatorial axis.

    Parameters
    ----------
    state : BlochState or EnsembleState
    axis_azimuth : float
        Azimuth of the rotation axis in radians (0 is the x axis).
    angle : float
        Rotation angle in radians (right-handed).
    """
    R = rotation_matrix(axis_azimuth, angle)
    if isinstance(state, BlochState):
        x, y, z = R @ state.vector
        return BlochState(complex(x, y), z)
    if isinstance(state, EnsembleState):
        v = np.stack([state.s_plus.real, state.s_plus.imag, state.s_z])
        x, y, z = R @ v
        return state.with_groups(x + 1j * y, z)
    raise TypeError(f"cannot rotate object of type {type(state).__name__}")
