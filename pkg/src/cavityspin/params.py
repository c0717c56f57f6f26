"""Physical parameters and the closed-form rate algebra.

All user-facing frequencies are ordinary frequencies in Hz (omega / 2 pi).
Conversion to angular units happens only inside the dynamics engine.
"""

from dataclasses import asdict, dataclass, field, replace
import math

__all__ = [
    "PhysicalParams",
    "DerivedRates",
    "ParameterError",
    "derive_rates",
    "cavity_rates",
    "single_ion_coupling",
    "n0_from_coupling",
    "MU_B",
    "HBAR",
    "MU_0",
    "DEFAULT_T2",
]

# CODATA 2018
MU_B = 9.2740100783e-24  # J / T
HBAR = 1.054571817e-34  # J s
MU_0 = 1.25663706212e-6  # N / A^2

DEFAULT_T2 = 0.150  # s


class ParameterError(ValueError):
    """Raised when a parameter set violates its invariants."""


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class PhysicalParams:
    """Experimental parameter set, frequencies in Hz.

    Parameters
    ----------
    g : float
        Single-spin coupling.
    kappa : float
        Cavity power decay rate (FWHM).
    delta : float
        Signed cavity-spin detuning.
    gamma_inh : float
        Inhomogeneous linewidth (FWHM).
    gamma_2 : float
        Homogeneous dephasing rate, ``1 / (pi * T2)``.
    n0 : float
        Effective number of polarized spins.
    kappa_out : float, optional
        Output coupling rate; defaults to ``kappa / 2``.
    """

    g: float
    kappa: float
    delta: float = 0.0
    gamma_inh: float = 0.0
    gamma_2: float = 1.0 / (math.pi * DEFAULT_T2)
    n0: float = 1.0
    kappa_out: float = field(default=None)

    def __post_init__(self):
        for name in ("g", "kappa", "delta", "gamma_inh", "gamma_2", "n0"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        if self.kappa_out is None:
            object.__setattr__(self, "kappa_out", self.kappa / 2)
        object.__setattr__(self, "kappa_out", _finite("kappa_out", self.kappa_out))
        if self.kappa <= 0:
            raise ParameterError(f"kappa must be > 0, got {self.kappa}")
        if self.g < 0:
            raise ParameterError(f"g must be >= 0, got {self.g}")
        if self.gamma_inh < 0:
            raise ParameterError(f"gamma_inh must be >= 0, got {self.gamma_inh}")
        if self.gamma_2 < 0:
            raise ParameterError(f"gamma_2 must be >= 0, got {self.gamma_2}")
        if self.n0 < 0:
            raise ParameterError(f"n0 must be >= 0, got {self.n0}")
        if not 0 <= self.kappa_out <= self.kappa:
            raise ParameterError(
                f"kappa_out must lie in [0, kappa] = [0, {self.kappa}], got {self.kappa_out}")

    @classmethod
    def from_collective(cls, g_coll, kappa, delta=0.0, g=None, **kwargs):
        """Build from the collective coupling ``g * sqrt(n0)``.

        When ``g`` is not given the ensemble is represented by ``n0 = 1``
        and ``g = g_coll``; only the product enters the mean-field rates.
        """
        if g is None:
            return cls(g=g_coll, kappa=kappa, delta=delta, n0=1.0, **kwargs)
        return cls(g=g, kappa=kappa, delta=delta, n0=n0_from_coupling(g_coll, g), **kwargs)

    @property
    def g_coll(self):
        return self.g * math.sqrt(self.n0)

    def replace(self, **changes):
        return replace(self, **changes)

    def with_chi_n(self, chi_n):
        """Return a copy whose ``n0`` is rescaled to give the requested ``chi_n``."""
        chi, _ = cavity_rates(self.g, self.kappa, self.delta)
        if chi == 0:
            raise ParameterError("cannot set chi_n when the single-spin exchange rate is zero")
        n0 = chi_n / chi
        if n0 < 0:
            raise ParameterError("requested chi_n has the opposite sign of delta")
        return replace(self, n0=n0)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DerivedRates:
    """Collective rates in Hz derived from :class:`PhysicalParams`."""

    chi: float
    gamma_sr_single: float
    chi_n: float
    gamma_c: float
    gap: float
    g_coll: float

    def to_dict(self):
        return asdict(self)


def cavity_rates(g, kappa, delta):
    """Single-spin exchange and emission rates after eliminating the cavity.

    Returns
    -------
    chi, gamma_sr : float
        ``4 g^2 delta / (4 delta^2 + kappa^2)`` and
        ``4 g^2 kappa / (4 delta^2 + kappa^2)``.
    """
    denom = 4.0 * delta * delta + kappa * kappa
    if denom == 0:
        raise ParameterError("rates undefined for kappa = 0 and delta = 0")
    g2 = 4.0 * g * g
    return g2 * delta / denom, g2 * kappa / denom


def derive_rates(p):
    """Compute the derived collective rates of a parameter set."""
    chi, gsr = cavity_rates(p.g, p.kappa, p.delta)
    g_coll = p.g_coll
    # evaluate the collective rates from g_coll directly so that they stay
    # exact when n0 is huge and g tiny
    chi_n, gamma_c = cavity_rates(g_coll, p.kappa, p.delta)
    return DerivedRates(chi=chi, gamma_sr_single=gsr, chi_n=chi_n,
                        gamma_c=gamma_c, gap=chi_n, g_coll=g_coll)


def single_ion_coupling(g_parallel, v_m, omega_s):
    """Single-ion magnetic-dipole coupling to a cavity mode.

    Parameters
    ----------
    g_parallel : float
        Effective g-factor of the transition.
    v_m : float
        Mode volume in m^3.
    omega_s : float
        Spin transition frequency in Hz.

    Returns
    -------
    float
        Coupling ``g`` in Hz.
    """
    if v_m <= 0:
        raise ParameterError(f"mode volume must be > 0, got {v_m}")
    if omega_s <= 0:
        raise ParameterError(f"transition frequency must be > 0, got {omega_s}")
    if g_parallel < 0:
        raise ParameterError(f"g-factor must be >= 0, got {g_parallel}")
    w = 2.0 * math.pi * omega_s
    b_vac = math.sqrt(MU_0 * HBAR * w / (2.0 * v_m))
    return g_parallel * MU_B / (2.0 * HBAR) * b_vac / (2.0 * math.pi)


def n0_from_coupling(g_coll, g):
    """Effective spin number from collective and single-spin couplings."""
    if g <= 0:
        raise ParameterError(f"single-spin coupling must be > 0, got {g}")
    if g_coll < 0:
        raise ParameterError(f"collective coupling must be >= 0, got {g_coll}")
    return (g_coll / g) ** 2
