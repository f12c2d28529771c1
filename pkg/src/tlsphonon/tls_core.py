"""Tunneling-state model: data types, energetics, and golden-rule lifetimes.

Amorphous solids host defects that tunnel between the two minima of an
asymmetric double-well potential. Each such defect behaves as a two-level
system (TLS) with asymmetry ``delta``, tunneling energy ``delta0``, and
level splitting E = sqrt(delta^2 + delta0^2); an ensemble of them, with the
standard flat distribution in (delta, ln delta0), couples to elastic strain
and absorbs or emits phonons. This module holds the value types shared by
the whole package and the single-TLS quantities: eigenstates, thermal
population inversion, and the one-phonon decay rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .constants import EV, HBAR, KB, TWO_PI
from .numerics import coth

_POLARIZATIONS = ("L", "T")


def _require_positive(**kwargs):
    for name, value in kwargs.items():
        if not (value > 0.0) or not math.isfinite(value):
            raise ValueError(f"{name} must be finite and > 0, got {value!r}")


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaterialParams:
    """Elastic and optical constants of the host glass.

    rho        mass density [kg/m^3]
    v_l, v_t   longitudinal / transverse sound speeds [m/s]
    n_eff      effective refractive index of the optical mode
    g_b_ref    Brillouin gain coefficient [1/(W m)] measured at linewidth
               ``gamma_ref``; peak gain at another linewidth scales as
               g_b_ref * gamma_ref / gamma (fixed electrostrictive coupling)
    a_eff      acoustic mode area [m^2]
    l_fut      length of the fiber under test [m]
    gamma_ref  FWHM [rad/s] at which g_b_ref applies
    """

    rho: float
    v_l: float
    v_t: float
    n_eff: float
    g_b_ref: float
    a_eff: float
    l_fut: float
    gamma_ref: float = TWO_PI * 30e6

    def __post_init__(self):
        _require_positive(
            rho=self.rho, v_l=self.v_l, v_t=self.v_t, n_eff=self.n_eff,
            g_b_ref=self.g_b_ref, a_eff=self.a_eff, l_fut=self.l_fut,
            gamma_ref=self.gamma_ref,
        )
        if not self.v_t < self.v_l:
            raise ValueError(
                f"expected v_t < v_l for these glasses, got v_t={self.v_t}, v_l={self.v_l}"
            )

    def sound_speed(self, polarization: str) -> float:
        if polarization == "L":
            return self.v_l
        if polarization == "T":
            return self.v_t
        raise ValueError(f"unknown polarization {polarization!r}")


@dataclass(frozen=True)
class TLSEnsemble:
    """Spectral density and strain coupling of the tunneling-state ensemble.

    p             TLS spectral density [1/(J m^3)]
    gamma_l/t     deformation potentials for L/T strain [J]; when gamma_t is
                  omitted the usual gamma_t^2 = gamma_l^2 / 2 assumption fills
                  it in
    jc_power_law  (a [W m^-2 K^-b], b) such that J_c(T) = a * T**b, or None
                  when no calibration exists
    gamma_bg      constant background dissipation rate [rad/s]
    """

    p: float
    gamma_l: float
    gamma_t: Optional[float] = None
    jc_power_law: Optional[Tuple[float, float]] = None
    gamma_bg: float = 0.0

    def __post_init__(self):
        _require_positive(p=self.p, gamma_l=self.gamma_l)
        if self.gamma_t is None:
            object.__setattr__(self, "gamma_t", self.gamma_l / math.sqrt(2.0))
        _require_positive(gamma_t=self.gamma_t)
        if self.jc_power_law is not None:
            a, b = self.jc_power_law
            _require_positive(jc_power_law_a=a)
            if not math.isfinite(b):
                raise ValueError("power-law exponent must be finite")
            object.__setattr__(self, "jc_power_law", (float(a), float(b)))
        if self.gamma_bg < 0.0 or not math.isfinite(self.gamma_bg):
            raise ValueError("gamma_bg must be finite and >= 0")

    def deformation_potential(self, polarization: str) -> float:
        if polarization == "L":
            return self.gamma_l
        if polarization == "T":
            return self.gamma_t
        raise ValueError(f"unknown polarization {polarization!r}")

    def j_c_from_power_law(self, temperature: float) -> float:
        if self.jc_power_law is None:
            raise ValueError("ensemble has no J_c power law configured")
        a, b = self.jc_power_law
        return a * temperature ** b


@dataclass(frozen=True)
class TLSState:
    """One tunneling state: asymmetry and tunneling energy, both in J."""

    delta: float
    delta0: float

    def __post_init__(self):
        _require_positive(delta0=self.delta0)
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")

    @property
    def energy(self) -> float:
        return tls_energy(self)


@dataclass(frozen=True)
class PhononMode:
    """A single acoustic mode: angular frequency, polarization, wavevector."""

    omega: float
    polarization: str
    q: float

    def __post_init__(self):
        _require_positive(omega=self.omega, q=self.q)
        if self.polarization not in _POLARIZATIONS:
            raise ValueError(f"polarization must be one of {_POLARIZATIONS}")

    @classmethod
    def in_material(cls, material: MaterialParams, omega: float, polarization: str = "L"):
        """Build the mode with q = omega / v so q * v == omega exactly."""
        v = material.sound_speed(polarization)
        return cls(omega=omega, polarization=polarization, q=omega / v)


@dataclass(frozen=True)
class DriveState:
    """Thermo-acoustic operating point: bath temperature, acoustic intensity,
    and angular frequency of the driving sound field."""

    temperature: float
    intensity: float
    drive_omega: float

    def __post_init__(self):
        _require_positive(temperature=self.temperature, drive_omega=self.drive_omega)
        if self.intensity < 0.0 or not math.isfinite(self.intensity):
            raise ValueError("intensity must be finite and >= 0")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def tls_energy(state: TLSState) -> float:
    """Level splitting E = sqrt(delta^2 + delta0^2) [J]."""
    return math.hypot(state.delta, state.delta0)


def tls_eigenvectors(state: TLSState) -> Tuple[np.ndarray, np.ndarray]:
    """Energy eigenstates of the bare double well in the left/right basis.

    Returns (excited, ground), each a length-2 unit vector of real
    amplitudes ordered (c_L, c_R). The ground state localizes in the lower
    well as |delta| >> delta0; at delta = 0 both states are equal-weight
    superpositions.
    """
    delta, delta0 = state.delta, state.delta0
    if delta0 <= 0.0:
        raise ValueError("delta0 = 0 leaves the well basis degenerate")
    e = tls_energy(state)
    # e + |delta| is the well-conditioned combination; e - |delta| can lose
    # all precision when delta0 << |delta|.
    big = math.sqrt((e + abs(delta)) / (2.0 * e))
    small = delta0 / math.sqrt(2.0 * e * (e + abs(delta)))
    if delta >= 0.0:
        excited = np.array([small, big])
        ground = np.array([big, -small])
    else:
        excited = np.array([big, small])
        ground = np.array([small, -big])
    return excited, ground


def equilibrium_inversion(energy: float, temperature: float) -> float:
    """Thermal population inversion P_e - P_g = -tanh(E / 2 k_B T).

    Approaches -1 as T -> 0 (all TLSs condensed to the ground state) and 0
    as T -> infinity. math.tanh saturates without overflow, so arbitrarily
    large E / k_B T is safe.
    """
    _require_positive(temperature=temperature)
    return -math.tanh(energy / (2.0 * KB * temperature))


def _rate_prefactor(material: MaterialParams, ensemble: TLSEnsemble) -> float:
    """sum_eta gamma_eta^2 / v_eta^5, divided by 2 pi rho hbar^4."""
    s = (ensemble.gamma_l ** 2 / material.v_l ** 5
         + ensemble.gamma_t ** 2 / material.v_t ** 5)
    return s / (TWO_PI * material.rho * HBAR ** 4)


def golden_rule_rate(
    state: TLSState,
    material: MaterialParams,
    ensemble: TLSEnsemble,
    temperature: float,
) -> float:
    """One-phonon decay rate 1/tau of the excited TLS state [1/s].

    1/tau = sum_eta (gamma_eta^2 / v_eta^5) * E delta0^2 / (2 pi rho hbar^4)
            * coth(E / 2 k_B T)

    Proportional to delta0^2 at fixed splitting (a symmetric well relaxes
    fastest) and strictly increasing in temperature through the stimulated
    coth factor.
    """
    _require_positive(temperature=temperature)
    e = tls_energy(state)
    return (_rate_prefactor(material, ensemble) * e * state.delta0 ** 2
            * coth(e / (2.0 * KB * temperature)))


def tls_transition_rates(
    state: TLSState,
    material: MaterialParams,
    ensemble: TLSEnsemble,
    temperature: float,
) -> Tuple[float, float]:
    """(upward, downward) golden-rule rates between the TLS levels [1/s].

    The upward rate carries the thermal occupation n(E), the downward rate
    n(E) + 1; their sum is golden_rule_rate and their ratio obeys detailed
    balance exp(-E / k_B T).
    """
    _require_positive(temperature=temperature)
    e = tls_energy(state)
    base = _rate_prefactor(material, ensemble) * e * state.delta0 ** 2
    x = e / (KB * temperature)
    if x > 700.0:
        n = 0.0
    else:
        n = 1.0 / math.expm1(x)
    return base * n, base * (n + 1.0)


def min_lifetime(
    energy: float,
    material: MaterialParams,
    ensemble: TLSEnsemble,
    temperature: float,
) -> float:
    """Shortest TLS lifetime at splitting E, reached for delta0 -> E [s]."""
    _require_positive(energy=energy)
    state = TLSState(delta=0.0, delta0=energy)
    return 1.0 / golden_rule_rate(state, material, ensemble, temperature)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def _ge_doped_silica() -> Tuple[MaterialParams, TLSEnsemble]:
    material = MaterialParams(
        rho=2666.0,
        v_l=4760.0,
        v_t=3092.0,          # core shear speed interpolated silica/germania
        n_eff=1.4950,        # reproduces the measured 9.188 GHz mode at 1548.963 nm
        g_b_ref=0.6,
        a_eff=1.6e-12,
        l_fut=0.022,
        gamma_ref=TWO_PI * 30e6,
    )
    gamma_l = 0.5 * EV
    ensemble = TLSEnsemble(
        p=1.6e7 / gamma_l ** 2,  # keeps the measured product P gamma_L^2 exact
        gamma_l=gamma_l,
        jc_power_law=(0.9, 2.6),
        gamma_bg=TWO_PI * 650e3,
    )
    return material, ensemble


def _vitreous_silica() -> Tuple[MaterialParams, TLSEnsemble]:
    # Fiber-geometry fields (gain, mode area, length) are nominal carry-overs;
    # override them when modelling anything but the reference fiber.
    material = MaterialParams(
        rho=2202.0,
        v_l=5944.0,
        v_t=3764.0,
        n_eff=1.444,
        g_b_ref=0.6,
        a_eff=1.6e-12,
        l_fut=0.022,
        gamma_ref=TWO_PI * 30e6,
    )
    gamma_l = 0.86 * EV
    ensemble = TLSEnsemble(
        p=1.3e7 / gamma_l ** 2,
        gamma_l=gamma_l,
        jc_power_law=None,
        gamma_bg=0.0,
    )
    return material, ensemble


_PRESETS = {
    "ge-doped-silica-44wt": _ge_doped_silica,
    "vitreous-silica": _vitreous_silica,
}


def preset_names() -> Tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def get_preset(name: str) -> Tuple[MaterialParams, TLSEnsemble]:
    """Material and ensemble constants for a named glass."""
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {preset_names()}") from None
    return factory()
