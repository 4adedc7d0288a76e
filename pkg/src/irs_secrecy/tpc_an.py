"""Closed-form precoder/AN update for fixed phases and auxiliaries.

Both blocks minimize Tr(X^H H X) - 2Re Tr(X^H B) under a shared power budget.
For a multiplier lam the minimizer is X = (H + lam I)^+ B, and the consumed
power P(lam) is evaluated in the eigenbasis of H so that one decomposition
serves the whole root search.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidInputError, NumericalError
from .model import effective_channels
from .numerics import PINV_RTOL
from .reformulation import coefficients_from_channels, linear_terms

LAMBDA_LO = 1e-14
TAIL_RTOL = 1e-14


@dataclass(frozen=True)
class _Block:
    sigma: np.ndarray     # eigenvalues of H, descending, clamped at 0
    basis: np.ndarray     # eigenvectors
    coords: np.ndarray    # basis^H B
    z: np.ndarray         # squared row norms of coords
    rank: int


@dataclass(frozen=True)
class DualState:
    """Eigen data of both blocks plus the multiplier found for them."""

    lam: float
    p_of_lambda: float
    sigma_v: np.ndarray
    sigma_ve: np.ndarray
    z_v_diag: np.ndarray
    z_ve_diag: np.ndarray
    r_v: int
    r_ve: int
    lambda_ub: float


@dataclass(frozen=True)
class EigenData:
    blocks: tuple

    @property
    def total_z(self):
        return float(sum(b.z.sum() for b in self.blocks))


def _block(h, b):
    w, p = np.linalg.eigh(0.5 * (h + h.conj().T))
    w, p = w[::-1], p[:, ::-1]
    top = max(w[0], 0.0)
    rank = int(np.sum(w > PINV_RTOL * top)) if top > 0 else 0
    w = np.where(np.arange(w.size) < rank, np.maximum(w, 0.0), 0.0)
    coords = p.conj().T @ b
    z = np.sum(np.abs(coords) ** 2, axis=1)
    # B lies in the range of H in exact arithmetic; drop round-off in the null space.
    total = z.sum()
    if rank < z.size and z[rank:].sum() <= TAIL_RTOL * total:
        coords[rank:] = 0.0
        z[rank:] = 0.0
    return _Block(w, p, coords, z, rank)


def eigen_data(h_v, h_ve, b_v, b_ve):
    """Precompute eigen data for P(lam) from the two quadratic blocks."""
    return EigenData((_block(h_v, b_v), _block(h_ve, b_ve)))


def eval_p_lambda(data, lam):
    """Power P(lam) consumed by the blocks' minimizers; +inf at lam=0 if unbounded."""
    if not np.isfinite(lam) or lam < 0:
        raise InvalidInputError(f"lam must be non-negative, got {lam}")
    total = 0.0
    for blk in data.blocks:
        r = blk.rank
        total += float(np.sum(blk.z[:r] / (blk.sigma[:r] + lam) ** 2))
        tail = float(blk.z[r:].sum())
        if tail > 0.0:
            if lam == 0.0:
                return np.inf
            total += tail / lam ** 2
    return total


def lambda_upper_bound(data, p_t):
    return float(np.sqrt(data.total_z / p_t))


def solve_multiplier(data, p_t):
    """Smallest lam >= 0 with P(lam) <= p_t, matched to p_t to round-off when active."""
    if not np.isfinite(p_t) or p_t <= 0:
        raise InvalidInputError(f"power budget must be positive, got {p_t}")
    p0 = eval_p_lambda(data, 0.0)
    if p0 <= p_t:
        return 0.0
    ub = lambda_upper_bound(data, p_t)
    if eval_p_lambda(data, ub) > p_t * (1 + 1e-12):
        raise NumericalError("power upper bound does not bracket the multiplier")
    lo = 0.0 if np.isfinite(p0) else LAMBDA_LO
    while lo > 0.0 and eval_p_lambda(data, lo) <= p_t:
        lo *= 1e-3
        if lo < 1e-300:
            return LAMBDA_LO
    f = lambda lam: eval_p_lambda(data, lam) - p_t
    lam = brentq(f, lo, ub, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    # step to the feasible side of the root
    step = max(4 * np.finfo(float).eps * lam, 1e-300)
    while f(lam) > 0.0:
        lam += step
        step *= 2.0
    return float(min(lam, ub))


def _minimizer(blk, lam):
    r = blk.rank
    scale = np.zeros(blk.sigma.size)
    scale[:r] = 1.0 / (blk.sigma[:r] + lam)
    if lam > 0.0:
        scale[r:] = 1.0 / lam
    return blk.basis @ (scale[:, None] * blk.coords)


def solve_power_constrained_qp(h_v, h_ve, b_v, b_ve, p_t):
    """Minimize the two-block quadratic under ||V||^2 + ||V_E||^2 <= p_t.

    Returns (V, V_E, DualState).
    """
    data = eigen_data(h_v, h_ve, b_v, b_ve)
    lam = solve_multiplier(data, p_t)
    bv, bve = data.blocks
    v, v_e = _minimizer(bv, lam), _minimizer(bve, lam)
    state = DualState(
        lam=lam,
        p_of_lambda=eval_p_lambda(data, lam),
        sigma_v=bv.sigma, sigma_ve=bve.sigma,
        z_v_diag=bv.z, z_ve_diag=bve.z,
        r_v=bv.rank, r_ve=bve.rank,
        lambda_ub=lambda_upper_bound(data, p_t),
    )
    return v, v_e, state


def tpc_an_from_channels(cfg, h_i, h_e, aux):
    q = coefficients_from_channels(cfg, h_i, h_e, aux, check=False)
    b_v, b_ve = linear_terms(h_i, h_e, aux)
    return solve_power_constrained_qp(q.h_v, q.h_ve, b_v, b_ve, cfg.p_t)


def solve_tpc_an(cfg, ch, phase, aux):
    """Optimal (V, V_E, lam) for fixed phases and auxiliaries."""
    h_i, h_e = effective_channels(cfg, ch, phase)
    v, v_e, state = tpc_an_from_channels(cfg, h_i, h_e, aux)
    return v, v_e, state.lam
