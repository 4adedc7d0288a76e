"""Signal model of the IRS-assisted, AN-aided MIMO wiretap channel.

Rates are evaluated with natural logarithms internally and reported in
bit/s/Hz.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .numerics import LN2, logdet_pd_fast


@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts, stream count, IRS size, power budget (W) and noise powers (W)."""

    n_t: int
    n_i: int
    n_e: int
    d: int
    m: int
    p_t: float
    sigma2_i: float
    sigma2_e: float

    def __post_init__(self):
        for name in ("n_t", "n_i", "n_e", "d", "m"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise InvalidInputError(f"{name} must be a positive integer, got {val}")
        if self.d > min(self.n_t, self.n_i):
            raise InvalidInputError(f"d={self.d} exceeds min(n_t, n_i)={min(self.n_t, self.n_i)}")
        for name in ("p_t", "sigma2_i", "sigma2_e"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise InvalidInputError(f"{name} must be positive and finite, got {val}")


@dataclass(frozen=True)
class ChannelSet:
    """BS-IRS `g` (M x N_T), BS-IR `h_bi`, BS-Eve `h_be`, IRS-IR `h_ri`, IRS-Eve `h_re`."""

    g: np.ndarray
    h_bi: np.ndarray
    h_be: np.ndarray
    h_ri: np.ndarray
    h_re: np.ndarray

    def validate(self, cfg):
        expected = {
            "g": (cfg.m, cfg.n_t),
            "h_bi": (cfg.n_i, cfg.n_t),
            "h_be": (cfg.n_e, cfg.n_t),
            "h_ri": (cfg.n_i, cfg.m),
            "h_re": (cfg.n_e, cfg.m),
        }
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise InvalidInputError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} has non-finite entries")
        return self

    def without_irs(self):
        """Copy with both reflected links zeroed."""
        return ChannelSet(self.g, self.h_bi, self.h_be,
                          np.zeros_like(self.h_ri), np.zeros_like(self.h_re))


@dataclass(frozen=True)
class PhaseProfile:
    """IRS phases theta (radians) and a common reflection amplitude eta."""

    phases: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        theta = np.mod(np.asarray(self.phases, dtype=float).ravel(), 2 * np.pi)
        if not np.all(np.isfinite(theta)):
            raise InvalidInputError("phases must be finite")
        if not (0.0 < self.amplitude <= 1.0):
            raise InvalidInputError(f"amplitude must lie in (0, 1], got {self.amplitude}")
        object.__setattr__(self, "phases", theta)

    @property
    def unit(self):
        """Unit-modulus vector exp(j*theta)."""
        return np.exp(1j * self.phases)

    @property
    def coefficients(self):
        """Reflection coefficients eta*exp(j*theta)."""
        return self.amplitude * self.unit

    @classmethod
    def from_unit(cls, phi, amplitude=1.0):
        return cls(np.angle(phi), amplitude)


@dataclass(frozen=True)
class TransmitDesign:
    """Precoder V (N_T x d), AN factor V_E (N_T x N_T, Z = V_E V_E^H) and phase profile."""

    v: np.ndarray
    v_e: np.ndarray
    phase: PhaseProfile = field(default=None)

    def power(self):
        return float(np.real(np.vdot(self.v, self.v) + np.vdot(self.v_e, self.v_e)))

    def validate(self, cfg, rtol=1e-9, check_power=True):
        if self.v.shape != (cfg.n_t, cfg.d):
            raise InvalidInputError(f"v has shape {self.v.shape}, expected {(cfg.n_t, cfg.d)}")
        if self.v_e.shape != (cfg.n_t, cfg.n_t):
            raise InvalidInputError(f"v_e has shape {self.v_e.shape}, expected {(cfg.n_t, cfg.n_t)}")
        if self.phase is None or self.phase.phases.shape != (cfg.m,):
            raise InvalidInputError(f"phase profile must have {cfg.m} entries")
        if check_power and self.power() > cfg.p_t * (1 + rtol):
            raise InvalidInputError(f"design uses {self.power():.6g} W > budget {cfg.p_t:.6g} W")
        return self

    def with_phase(self, phase):
        return TransmitDesign(self.v, self.v_e, phase)


def cascade(h_b, h_r, coeffs, g):
    """h_b + h_r diag(coeffs) g."""
    return h_b + (h_r * coeffs) @ g


def effective_channels(cfg, ch, phase):
    """Effective BS-IR and BS-Eve channels for the given phase profile."""
    ch.validate(cfg)
    if phase.phases.shape != (cfg.m,):
        raise InvalidInputError(f"phase profile must have {cfg.m} entries")
    c = phase.coefficients
    return cascade(ch.h_bi, ch.h_ri, c, ch.g), cascade(ch.h_be, ch.h_re, c, ch.g)


def link_rate_nats(h, v, v_e, sigma2):
    """log|I + H V V^H H^H J^-1| with J = H V_E V_E^H H^H + sigma2 I, in nats."""
    hv = h @ v
    hz = h @ v_e
    j = hz @ hz.conj().T + sigma2 * np.eye(h.shape[0])
    return logdet_pd_fast(j + hv @ hv.conj().T) - logdet_pd_fast(j)


def rates_nats(cfg, h_i, h_e, design):
    """(R_I, R_E) in nats for given effective channels."""
    r_i = link_rate_nats(h_i, design.v, design.v_e, cfg.sigma2_i)
    r_e = link_rate_nats(h_e, design.v, design.v_e, cfg.sigma2_e)
    return r_i, r_e


def secrecy_rate_unclamped(cfg, ch, design):
    """R_I - R_E in bit/s/Hz, without the clamp at zero."""
    design.validate(cfg, check_power=False)
    h_i, h_e = effective_channels(cfg, ch, design.phase)
    r_i, r_e = rates_nats(cfg, h_i, h_e, design)
    return (r_i - r_e) / LN2


def secrecy_rate(cfg, ch, design):
    """Secrecy rate [R_I - R_E]^+ in bit/s/Hz."""
    return max(0.0, secrecy_rate_unclamped(cfg, ch, design))
