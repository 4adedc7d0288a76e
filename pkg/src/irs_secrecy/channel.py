"""Scenario geometry and channel generation.

BS at the origin, IRS at (d_br, 0), IR at (d_bi, -d_v) and Eve at (d_be, -d_v).
Direct BS links are Rayleigh; every IRS link is Rician with a ULA line-of-sight
component.
"""

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import ChannelSet


@dataclass(frozen=True)
class Scenario:
    d_br: float = 50.0
    d_v: float = 2.0
    d_bi: float = 48.0
    d_be: float = 44.0
    pl0_db: float = -30.0
    alpha_br: float = 2.2
    alpha_bi: float = 3.5
    alpha_be: float = 3.5
    alpha_ri: float = 2.5
    alpha_re: float = 2.5
    rician_beta: float = 3.0
    element_spacing_ratio: float = 0.5
    amplitude: float = 1.0
    min_distance: float = 0.5

    def __post_init__(self):
        for name in ("d_br", "d_bi", "d_be"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.d_v < 0:
            raise InvalidInputError("d_v must be non-negative")
        for name in ("alpha_br", "alpha_bi", "alpha_be", "alpha_ri", "alpha_re"):
            if getattr(self, name) < 2:
                raise InvalidInputError(f"{name} must be at least 2")
        if self.rician_beta < 0:
            raise InvalidInputError("rician_beta must be non-negative")
        if not (0 < self.amplitude <= 1):
            raise InvalidInputError("amplitude must lie in (0, 1]")
        if not self.min_distance > 0:
            raise InvalidInputError("min_distance must be positive")


@dataclass(frozen=True)
class RngStream:
    """Deterministic generator factory keyed by (seed, realization, link label)."""

    seed: int
    realization: int = 0

    def generator(self, label):
        ss = np.random.SeedSequence([int(self.seed), int(self.realization), zlib.crc32(label.encode())])
        return np.random.default_rng(ss)


def dbm_to_watts(p_dbm):
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def path_loss_linear(pl0_db, alpha, d_m):
    """Linear power gain 10^((PL0 - 10 alpha log10 d) / 10), d in metres."""
    if not d_m > 0:
        raise InvalidInputError(f"distance must be positive, got {d_m}")
    return 10.0 ** ((pl0_db - 10.0 * alpha * np.log10(d_m)) / 10.0)


def steering_vector(n, angle, spacing_ratio=0.5):
    """ULA response exp(j 2 pi s k sin(angle)), k = 0..n-1."""
    if n < 1:
        raise InvalidInputError("array size must be at least 1")
    k = np.arange(n)
    return np.exp(1j * 2 * np.pi * spacing_ratio * k * np.sin(angle))


def _cn(rng, n_r, n_t):
    return (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / np.sqrt(2)


def rician_channel(rng, n_r, n_t, beta, angles, path_loss, spacing_ratio=0.5):
    """sqrt(path_loss) * (sqrt(beta/(1+beta)) a_r a_t^H + sqrt(1/(1+beta)) H_nlos).

    `angles` is (departure angle at the transmitter, arrival angle at the receiver).
    """
    if beta < 0:
        raise InvalidInputError("Rician factor must be non-negative")
    nlos = _cn(rng, n_r, n_t)
    aod, aoa = angles
    los = np.outer(steering_vector(n_r, aoa, spacing_ratio),
                   steering_vector(n_t, aod, spacing_ratio).conj())
    h = np.sqrt(beta / (1 + beta)) * los + np.sqrt(1 / (1 + beta)) * nlos
    return np.sqrt(path_loss) * h


def rayleigh_channel(rng, n_r, n_t, path_loss):
    return np.sqrt(path_loss) * _cn(rng, n_r, n_t)


def link_geometry(tx, rx, min_distance=0.5):
    """(distance, departure angle, arrival angle) between two points in the plane."""
    dx, dy = rx[0] - tx[0], rx[1] - tx[1]
    dist = max(float(np.hypot(dx, dy)), min_distance)
    if dx != 0:
        phi_t = float(np.arctan(dy / dx))
    else:
        phi_t = float(np.sign(dy) * np.pi / 2)
    return dist, phi_t, np.pi - phi_t


def positions(scn):
    return {
        "bs": (0.0, 0.0),
        "irs": (scn.d_br, 0.0),
        "ir": (scn.d_bi, -scn.d_v),
        "eve": (scn.d_be, -scn.d_v),
    }


def _irs_link(scn, rng, label, tx, rx, n_r, n_t, alpha):
    dist, aod, aoa = link_geometry(tx, rx, scn.min_distance)
    pl = path_loss_linear(scn.pl0_db, alpha, dist)
    return rician_channel(rng.generator(label), n_r, n_t, scn.rician_beta, (aod, aoa), pl,
                          scn.element_spacing_ratio)


def _direct_link(scn, rng, label, tx, rx, n_r, n_t, alpha):
    dist, _, _ = link_geometry(tx, rx, scn.min_distance)
    return rayleigh_channel(rng.generator(label), n_r, n_t, path_loss_linear(scn.pl0_db, alpha, dist))


def build_scenario(scn, cfg, rng):
    """Draw the five channel matrices of one realization."""
    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng))
    pos = positions(scn)
    g = _irs_link(scn, rng, "g", pos["bs"], pos["irs"], cfg.m, cfg.n_t, scn.alpha_br)
    h_ri = _irs_link(scn, rng, "h_ri", pos["irs"], pos["ir"], cfg.n_i, cfg.m, scn.alpha_ri)
    h_re = _irs_link(scn, rng, "h_re", pos["irs"], pos["eve"], cfg.n_e, cfg.m, scn.alpha_re)
    h_bi = _direct_link(scn, rng, "h_bi", pos["bs"], pos["ir"], cfg.n_i, cfg.n_t, scn.alpha_bi)
    h_be = _direct_link(scn, rng, "h_be", pos["bs"], pos["eve"], cfg.n_e, cfg.n_t, scn.alpha_be)
    return ChannelSet(g, h_bi, h_be, h_ri, h_re).validate(cfg)


def build_multicast_scenario(scn, cfg, rng, d_bi_list, sigma2_i=None):
    """Shared links plus one direct/reflected pair per IR placed at (d_bi_l, -d_v)."""
    from .multicast import MulticastChannelSet

    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng))
    base = build_scenario(scn, cfg, rng)
    h_bi, h_ri = [], []
    for l, x in enumerate(d_bi_list):
        ir = (float(x), -scn.d_v)
        h_ri.append(_irs_link(scn, rng, f"h_ri_{l}", (scn.d_br, 0.0), ir, cfg.n_i, cfg.m, scn.alpha_ri))
        h_bi.append(_direct_link(scn, rng, f"h_bi_{l}", (0.0, 0.0), ir, cfg.n_i, cfg.n_t, scn.alpha_bi))
    if sigma2_i is None:
        sigma2_i = [cfg.sigma2_i] * len(d_bi_list)
    return MulticastChannelSet(base.g, h_bi, h_ri, base.h_be, base.h_re, list(sigma2_i))
