"""MMSE reformulation of the secrecy rate.

The rate terms f1, f2, f3 and their weighted-MSE counterparts h1, h2, h3 are in
nats: the equalities between them hold for the natural logarithm only.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import effective_channels
from .numerics import LN2, inv_pd, logdet_pd_fast, min_eig_ratio, solve_pd, symmetrize

PSD_CHECK_TOL = 1e-8


@dataclass(frozen=True)
class AuxiliarySet:
    """Decoders and weights: U_I (N_I x d), W_I (d x d), U_E (N_E x N_T), W_E (N_T x N_T), W_X (N_E x N_E)."""

    u_i: np.ndarray
    w_i: np.ndarray
    u_e: np.ndarray
    w_e: np.ndarray
    w_x: np.ndarray

    @classmethod
    def zeros(cls, cfg):
        return cls(
            np.zeros((cfg.n_i, cfg.d), complex),
            np.zeros((cfg.d, cfg.d), complex),
            np.zeros((cfg.n_e, cfg.n_t), complex),
            np.zeros((cfg.n_t, cfg.n_t), complex),
            np.zeros((cfg.n_e, cfg.n_e), complex),
        )


@dataclass(frozen=True)
class QuadraticCoefficients:
    h_v: np.ndarray
    h_ve: np.ndarray


def _gram(a):
    return a @ a.conj().T


def mmse_receiver(h, v, v_e, sigma2):
    """Optimal decoder U = (H V_X H^H + sigma2 I)^-1 H V and weight W = E^-1."""
    hv = h @ v
    cov = _gram(hv) + _gram(h @ v_e) + sigma2 * np.eye(h.shape[0])
    u = solve_pd(cov, hv)
    e = symmetrize(np.eye(v.shape[1]) - hv.conj().T @ u)
    return u, _safe_inv(e, "MSE matrix")


def eve_receiver(h_e, v_e, sigma2_e):
    """Decoder for the AN stream at Eve and its weight."""
    hz = h_e @ v_e
    cov = _gram(hz) + sigma2_e * np.eye(h_e.shape[0])
    u = solve_pd(cov, hz)
    e = symmetrize(np.eye(v_e.shape[1]) - hz.conj().T @ u)
    return u, _safe_inv(e, "AN MSE matrix")


def _safe_inv(e, what):
    try:
        return inv_pd(e)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive definite") from exc


def e_x_matrix(h_e, v, v_e, sigma2_e):
    return np.eye(h_e.shape[0]) + (_gram(h_e @ v) + _gram(h_e @ v_e)) / sigma2_e


def aux_from_channels(cfg, h_i, h_e, v, v_e):
    u_i, w_i = mmse_receiver(h_i, v, v_e, cfg.sigma2_i)
    u_e, w_e = eve_receiver(h_e, v_e, cfg.sigma2_e)
    w_x = _safe_inv(e_x_matrix(h_e, v, v_e, cfg.sigma2_e), "E_X")
    return AuxiliarySet(u_i, w_i, u_e, w_e, w_x)


def update_auxiliaries(cfg, ch, design):
    """Closed-form maximizers of the three weighted-MSE terms for a fixed design."""
    design.validate(cfg, check_power=False)
    h_i, h_e = effective_channels(cfg, ch, design.phase)
    return aux_from_channels(cfg, h_i, h_e, design.v, design.v_e)


def mse_matrices(cfg, h_i, h_e, v, v_e, aux):
    """(E_I, E_E, E_X) for arbitrary decoders."""
    r = aux.u_i.conj().T @ h_i @ v - np.eye(v.shape[1])
    uz = aux.u_i.conj().T @ h_i @ v_e
    e_i = _gram(r) + _gram(uz) + cfg.sigma2_i * aux.u_i.conj().T @ aux.u_i
    r_e = aux.u_e.conj().T @ h_e @ v_e - np.eye(v_e.shape[1])
    e_e = _gram(r_e) + cfg.sigma2_e * aux.u_e.conj().T @ aux.u_e
    return symmetrize(e_i), symmetrize(e_e), e_x_matrix(h_e, v, v_e, cfg.sigma2_e)


def _h_term(w, e):
    return logdet_pd_fast(w) - float(np.real(np.trace(w @ e))) + w.shape[0]


def mse_terms(cfg, h_i, h_e, v, v_e, aux):
    """(h1, h2, h3) in nats."""
    e_i, e_e, e_x = mse_matrices(cfg, h_i, h_e, v, v_e, aux)
    return _h_term(aux.w_i, e_i), _h_term(aux.w_e, e_e), _h_term(aux.w_x, e_x)


def rate_terms(cfg, h_i, h_e, v, v_e):
    """(f1, f2, f3) in nats; their sum is R_I - R_E."""
    hv, hz = h_i @ v, h_i @ v_e
    j_i = _gram(hz) + cfg.sigma2_i * np.eye(h_i.shape[0])
    f1 = logdet_pd_fast(j_i + _gram(hv)) - logdet_pd_fast(j_i)
    f2 = logdet_pd_fast(np.eye(h_e.shape[0]) + _gram(h_e @ v_e) / cfg.sigma2_e)
    f3 = -logdet_pd_fast(e_x_matrix(h_e, v, v_e, cfg.sigma2_e))
    return f1, f2, f3


def lower_bound_objective(cfg, ch, design, aux):
    """h1 + h2 + h3 converted to bit/s/Hz.

    Equals the unclamped secrecy rate when `aux` is the output of
    `update_auxiliaries` for the same design, and is below it otherwise.
    """
    h_i, h_e = effective_channels(cfg, ch, design.phase)
    return sum(mse_terms(cfg, h_i, h_e, design.v, design.v_e, aux)) / LN2


def coefficients_from_channels(cfg, h_i, h_e, aux, check=True):
    a = h_i.conj().T @ aux.u_i
    b = h_e.conj().T @ aux.u_e
    h_v = a @ aux.w_i @ a.conj().T + h_e.conj().T @ aux.w_x @ h_e / cfg.sigma2_e
    h_ve = h_v + b @ aux.w_e @ b.conj().T
    h_v, h_ve = symmetrize(h_v), symmetrize(h_ve)
    if check:
        for name, mat in (("H_V", h_v), ("H_VE", h_ve)):
            if min_eig_ratio(mat) < -PSD_CHECK_TOL:
                raise NumericalError(f"{name} is not positive semidefinite")
    return QuadraticCoefficients(h_v, h_ve)


def linear_terms(h_i, h_e, aux):
    """Linear coefficients B_V = H_I^H U_I W_I and B_VE = H_E^H U_E W_E."""
    return h_i.conj().T @ aux.u_i @ aux.w_i, h_e.conj().T @ aux.u_e @ aux.w_e


def quadratic_coefficients(cfg, ch, phase, aux):
    """H_V and H_VE of the transmit subproblem."""
    h_i, h_e = effective_channels(cfg, ch, phase)
    return coefficients_from_channels(cfg, h_i, h_e, aux)


def qp_value(h_v, h_ve, b_v, b_ve, v, v_e):
    """Tr(V^H H_V V) - 2Re Tr(V^H B_V) + Tr(V_E^H H_VE V_E) - 2Re Tr(V_E^H B_VE)."""
    val = np.vdot(v, h_v @ v) - 2 * np.vdot(v, b_v).real
    val += np.vdot(v_e, h_ve @ v_e) - 2 * np.vdot(v_e, b_ve).real
    return float(np.real(val))


def subproblem_objective_channels(cfg, h_i, h_e, v, v_e, aux):
    q = coefficients_from_channels(cfg, h_i, h_e, aux, check=False)
    b_v, b_ve = linear_terms(h_i, h_e, aux)
    return qp_value(q.h_v, q.h_ve, b_v, b_ve, v, v_e)


def subproblem_objective(cfg, ch, design, aux):
    """Quadratic objective S of the transmit subproblem.

    With the constant C_g of `constant_cg`, h1 + h2 + h3 = C_g - S.
    """
    h_i, h_e = effective_channels(cfg, ch, design.phase)
    return subproblem_objective_channels(cfg, h_i, h_e, design.v, design.v_e, aux)


def constant_cg(cfg, aux):
    """Design-independent part of h1 + h2 + h3, in nats."""
    c0 = (logdet_pd_fast(aux.w_i) + logdet_pd_fast(aux.w_e) + logdet_pd_fast(aux.w_x)
          + cfg.d + cfg.n_t + cfg.n_e)
    c1 = np.trace(aux.w_i) + cfg.sigma2_i * np.trace(aux.w_i @ aux.u_i.conj().T @ aux.u_i)
    c2 = np.trace(aux.w_e) + cfg.sigma2_e * np.trace(aux.w_e @ aux.u_e.conj().T @ aux.u_e)
    c3 = np.trace(aux.w_x)
    return float(c0 - np.real(c1 + c2 + c3))
