"""Inhomogeneous lineshapes, offset sampling and free-dephasing envelopes."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.special import ndtr, ndtri

__all__ = [
    "Lineshape",
    "OffsetSet",
    "sample_offsets",
    "free_dephasing_coherence",
    "empirical_fwhm",
    "RANDOM_TRUNCATION",
]

KINDS = ("gaussian", "lorentzian", "pseudo_voigt")
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
# random offsets are confined to +/- this many FWHM
RANDOM_TRUNCATION = 50.0


@dataclass(frozen=True)
class Lineshape:
    """Inhomogeneous frequency distribution.

    Parameters
    ----------
    kind : {'gaussian', 'lorentzian', 'pseudo_voigt'}
    fwhm : float
        Full width at half maximum in Hz.
    lorentzian_fraction : float
        Mixture weight of the Lorentzian component. Ignored (and forced to
        0 or 1) for the pure kinds.
    """

    kind: str
    fwhm: float
    lorentzian_fraction: float = 0.0

    def __post_init__(self):
        kind = str(self.kind).lower().replace("-", "_")
        if kind == "voigt":
            kind = "pseudo_voigt"
        if kind not in KINDS:
            raise ValueError(f"unknown lineshape kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if not (math.isfinite(self.fwhm) and self.fwhm > 0):
            raise ValueError(f"fwhm must be > 0, got {self.fwhm}")
        if kind == "gaussian":
            eta = 0.0
        elif kind == "lorentzian":
            eta = 1.0
        else:
            eta = float(self.lorentzian_fraction)
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"lorentzian_fraction must lie in [0, 1], got {eta}")
        object.__setattr__(self, "lorentzian_fraction", eta)

    @property
    def eta(self):
        return self.lorentzian_fraction

    @property
    def sigma(self):
        """Standard deviation of the Gaussian component."""
        return self.fwhm / FWHM_PER_SIGMA

    @property
    def hwhm(self):
        return 0.5 * self.fwhm

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        s, h = self.sigma, self.hwhm
        gauss = np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2 * math.pi))
        lor = h / (math.pi * (x * x + h * h))
        return (1 - self.eta) * gauss + self.eta * lor

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        lor = 0.5 + np.arctan(x / self.hwhm) / math.pi
        return (1 - self.eta) * ndtr(x / self.sigma) + self.eta * lor

    def gaussian_quantile(self, p):
        return self.sigma * ndtri(np.asarray(p, dtype=float))

    def lorentzian_quantile(self, p):
        return self.hwhm * np.tan(math.pi * (np.asarray(p, dtype=float) - 0.5))

    def to_dict(self):
        return {"kind": self.kind, "fwhm": self.fwhm,
                "lorentzian_fraction": self.lorentzian_fraction}


@dataclass(frozen=True)
class OffsetSet:
    """Immutable set of per-group frequency offsets (Hz)."""

    offsets: np.ndarray
    strategy: str = "quantile"
    seed: object = None
    truncated_mass: float = 0.0
    shape: object = field(default=None, compare=False)

    def __post_init__(self):
        arr = np.array(self.offsets, dtype=float).reshape(-1)
        if arr.size < 1:
            raise ValueError("an offset set needs at least one element")
        if not np.all(np.isfinite(arr)):
            raise ValueError("offsets must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "offsets", arr)

    def __len__(self):
        return self.offsets.size

    def __array__(self, dtype=None, copy=None):
        return self.offsets if dtype is None else self.offsets.astype(dtype)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(int(n)), strategy="quantile")

    def metadata(self):
        return {"strategy": self.strategy, "seed": self.seed, "n": len(self),
                "truncated_mass": self.truncated_mass,
                "lineshape": None if self.shape is None else self.shape.to_dict()}


def _symmetric_quantiles(qfun, n):
    """Midpoint quantiles ``q((j - 1/2) / n)`` made exactly antisymmetric."""
    if n == 0:
        return np.empty(0)
    half = n // 2
    lower = qfun((np.arange(half) + 0.5) / n)
    mid = np.zeros(n % 2)
    return np.concatenate([lower, mid, -lower[::-1]])


def sample_offsets(shape, n, strategy="quantile", seed=None):
    """Draw ``n`` frequency offsets from a lineshape.

    Parameters
    ----------
    shape : Lineshape
    n : int
    strategy : {'quantile', 'random'}
        ``quantile`` places the offsets deterministically at the midpoint
        quantiles of each mixture component; ``random`` draws i.i.d.
        samples truncated at ``RANDOM_TRUNCATION`` FWHM.
    seed : int, optional
        Seed for the random strategy.

    Returns
    -------
    OffsetSet
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one group, got n = {n}")
    strategy = strategy.lower()
    eta = shape.eta
    if strategy == "quantile":
        n_lor = int(math.floor(eta * n + 0.5))
        parts = [_symmetric_quantiles(shape.gaussian_quantile, n - n_lor),
                 _symmetric_quantiles(shape.lorentzian_quantile, n_lor)]
        offsets = np.sort(np.concatenate(parts), kind="stable")
        return OffsetSet(offsets, strategy="quantile", shape=shape)
    if strategy == "random":
        rng = np.random.default_rng(seed)
        which = rng.random(n)
        u = rng.random(n)
        cut = RANDOM_TRUNCATION * shape.fwhm
        # inverse-CDF sampling restricted to [-cut, cut] for each component
        pg = ndtr(cut / shape.sigma)
        pl = 0.5 + math.atan(cut / shape.hwhm) / math.pi
        gauss = shape.gaussian_quantile((1 - pg) + u * (2 * pg - 1))
        lor = shape.lorentzian_quantile((1 - pl) + u * (2 * pl - 1))
        offsets = np.where(which < eta, lor, gauss)
        truncated = (1 - eta) * 2 * (1 - pg) + eta * 2 * (1 - pl)
        return OffsetSet(offsets, strategy="random", seed=seed,
                         truncated_mass=float(truncated), shape=shape)
    raise ValueError(f"unknown sampling strategy {strategy!r}")


def free_dephasing_coherence(shape, t):
    """Coherence of a freely dephasing ensemble (Fourier transform of the lineshape).

    Parameters
    ----------
    shape : Lineshape
    t : float or array_like
        Time in seconds, ``t >= 0``.
    """
    t = np.asarray(t, dtype=float)
    x = math.pi * shape.fwhm * t
    c_gauss = np.exp(-x * x / (4.0 * math.log(2.0)))
    c_lor = np.exp(-x)
    return (1 - shape.eta) * c_gauss + shape.eta * c_lor


def empirical_fwhm(offsets, bandwidth=None, resolution=20):
    """FWHM of a sample estimated from a Gaussian-kernel histogram.

    Parameters
    ----------
    offsets : array_like
    bandwidth : float, optional
        Kernel standard deviation. Defaults to 1% of the interquartile range.
    resolution : int
        Histogram bins per kernel width.
    """
    x = np.asarray(offsets, dtype=float)
    q1, q3 = np.percentile(x, [25, 75])
    iqr = q3 - q1
    if iqr <= 0:
        raise ValueError("sample has zero spread")
    h = 0.01 * iqr if bandwidth is None else float(bandwidth)
    lo, hi = np.percentile(x, [1, 99])
    lo, hi = lo - 10 * h, hi + 10 * h
    dx = h / resolution
    edges = np.arange(lo, hi + dx, dx)
    counts, _ = np.histogram(x, bins=edges)
    dens = gaussian_filter1d(counts.astype(float), sigma=resolution, mode="constant")
    centers = 0.5 * (edges[1:] + edges[:-1])
    k = int(np.argmax(dens))
    half = 0.5 * dens[k]
    right = k + int(np.argmax(dens[k:] < half))
    left = k - int(np.argmax(dens[k::-1] < half))

    def cross(i0, i1):
        y0, y1 = dens[i0], dens[i1]
        return centers[i0] + (half - y0) / (y1 - y0) * (centers[i1] - centers[i0])

    return cross(right - 1, right) - cross(left + 1, left)
