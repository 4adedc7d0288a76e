"""Phase subproblem for fixed transmit design and auxiliaries.

For unit-modulus phi the transmit objective is a quadratic
f(phi) = phi^H Xi phi + 2 Re(phi^T d) plus a constant C_t. The reflection
amplitude is folded into G so the variable stays on the unit circle.
MM maximizes a linear minorizer of -f over the unit circle in closed form.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .numerics import symmetrize

UNIT_TOL = 1e-9


@dataclass(frozen=True)
class PhaseQuadratic:
    """f(phi) = phi^H xi phi + 2 Re(phi^T d_vec); the full objective adds c_t."""

    xi: np.ndarray
    d_vec: np.ndarray
    c_t: float

    def __add__(self, other):
        return PhaseQuadratic(self.xi + other.xi, self.d_vec + other.d_vec, self.c_t + other.c_t)

    def scaled(self, w):
        return PhaseQuadratic(w * self.xi, w * self.d_vec, w * self.c_t)

    def value(self, phi):
        """f(phi), without the constant."""
        return float(np.real(np.vdot(phi, self.xi @ phi)) + 2 * np.real(phi @ self.d_vec))

    def total(self, phi):
        """f(phi) + c_t."""
        return self.value(phi) + self.c_t

    @property
    def lam_max(self):
        if self.xi.shape[0] == 0:
            return 0.0
        return float(np.linalg.eigvalsh(self.xi)[-1])


def _quad_terms(h_b, h_r, g, a, m):
    """Phase expansion of Tr(H A H^H M) for H = h_b + h_r diag(phi) g.

    Returns (xi, d, c) with Tr(H A H^H M) = phi^H xi phi + 2Re(phi^T d) + c.
    """
    b = h_r.conj().T @ m @ h_r
    c = g @ a @ g.conj().T
    xi = b * c.T
    d = np.einsum("ij,ji->i", g @ a @ h_b.conj().T @ m, h_r)
    const = np.real(np.trace(h_b @ a @ h_b.conj().T @ m))
    return xi, d, float(const)


def _lin_terms(h_b, h_r, g, k):
    """Phase expansion of -2 Re Tr(H K): returns (d, c) with value 2Re(phi^T d) + c."""
    d = -np.einsum("ij,ji->i", g @ k, h_r)
    const = -2.0 * np.real(np.trace(h_b @ k))
    return d, float(const)


def ir_quadratic(h_bi, h_ri, g_eff, v, v_e, u_i, w_i):
    """Legitimate-receiver part of the transmit objective as a phase quadratic."""
    v_x = v @ v.conj().T + v_e @ v_e.conj().T
    m_i = u_i @ w_i @ u_i.conj().T
    xi, d1, c1 = _quad_terms(h_bi, h_ri, g_eff, v_x, m_i)
    d2, c2 = _lin_terms(h_bi, h_ri, g_eff, v @ w_i @ u_i.conj().T)
    return PhaseQuadratic(symmetrize(xi), d1 + d2, c1 + c2)


def eve_quadratic(h_be, h_re, g_eff, v, v_e, u_e, w_e, w_x, sigma2_e):
    """Eavesdropper part of the transmit objective as a phase quadratic."""
    z = v_e @ v_e.conj().T
    v_x = v @ v.conj().T + z
    m_e = u_e @ w_e @ u_e.conj().T
    xi1, d1, c1 = _quad_terms(h_be, h_re, g_eff, v_x, w_x / sigma2_e)
    xi2, d2, c2 = _quad_terms(h_be, h_re, g_eff, z, m_e)
    d3, c3 = _lin_terms(h_be, h_re, g_eff, v_e @ w_e @ u_e.conj().T)
    return PhaseQuadratic(symmetrize(xi1 + xi2), d1 + d2 + d3, c1 + c2 + c3)


def build_phase_quadratic(cfg, ch, design, aux):
    """Assemble (Xi, d, C_t) so that the transmit objective equals f(phi) + C_t at unit-modulus phi."""
    ch.validate(cfg)
    g_eff = design.phase.amplitude * ch.g
    q_i = ir_quadratic(ch.h_bi, ch.h_ri, g_eff, design.v, design.v_e, aux.u_i, aux.w_i)
    q_e = eve_quadratic(ch.h_be, ch.h_re, g_eff, design.v, design.v_e,
                        aux.u_e, aux.w_e, aux.w_x, cfg.sigma2_e)
    return q_i + q_e


def _check_unit(phi):
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim != 1 or np.max(np.abs(np.abs(phi) - 1.0), initial=0.0) > UNIT_TOL:
        raise InvalidInputError("phase vector must be unit-modulus")
    return phi


def surrogate_vector(q, phi_t, lam_max=None):
    """q_t = (lam_max I - Xi) phi_t - conj(d) and C_q = 2 M lam_max - phi_t^H Xi phi_t.

    For every unit-modulus phi, -f(phi) >= 2Re(phi^H q_t) - C_q, with equality at phi_t.
    """
    lam = q.lam_max if lam_max is None else lam_max
    xphi = q.xi @ phi_t
    vec = lam * phi_t - xphi - np.conj(q.d_vec)
    c_q = 2 * phi_t.size * lam - float(np.real(np.vdot(phi_t, xphi)))
    return vec, c_q


def _mm_update(vec, phi_t):
    mag = np.abs(vec)
    out = phi_t.copy()
    nz = mag > 0.0
    out[nz] = vec[nz] / mag[nz]
    return out


def mm_phase_step(q, phi_t, lam_max=None):
    """One MM step from the unit-modulus point phi_t."""
    phi_t = _check_unit(phi_t)
    vec, _ = surrogate_vector(q, phi_t, lam_max)
    return _mm_update(vec, phi_t)


def optimize_phases(q, phi0, tol=1e-8, max_iter=500):
    """Run MM from phi0 until the relative change of f drops below tol.

    Returns (phi, trace) where trace starts with f(phi0).
    """
    phi = _check_unit(phi0)
    lam = q.lam_max
    f = q.value(phi)
    trace = [f]
    for _ in range(max_iter):
        vec, _ = surrogate_vector(q, phi, lam)
        nxt = _mm_update(vec, phi)
        f_new = q.value(nxt)
        if f_new > f:  # round-off only; keep the better point
            break
        phi, delta, f = nxt, f - f_new, f_new
        trace.append(f)
        if delta <= tol * max(abs(f), 1e-300):
            break
    return phi, np.asarray(trace)
