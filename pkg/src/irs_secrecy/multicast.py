"""Multicast extension: L legitimate receivers share one confidential message.

The secrecy rate is min_l (R_{I,l} - R_E). For fixed auxiliaries the transmit
step is a convex min-max QCQP and the phase step a min-max unit-modulus
problem. The QCQP is solved by dual decomposition over the branch weights,
each inner problem being the closed-form power-constrained QP of `tpc_an`.
The phase step uses penalty CCP on linear minorizers of each branch.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .bcd_driver import SolverOptions, SolverReport, initialize
from .errors import InvalidInputError, NumericalError
from .model import PhaseProfile, TransmitDesign, cascade, link_rate_nats
from .numerics import LN2, logdet_pd_fast, symmetrize
from .phase_mm import eve_quadratic, ir_quadratic, surrogate_vector
from .reformulation import e_x_matrix, eve_receiver, mmse_receiver, mse_matrices, AuxiliarySet
from .tpc_an import solve_power_constrained_qp


@dataclass(frozen=True)
class MulticastChannelSet:
    """Shared g, h_be, h_re plus per-receiver direct/reflected channels and noise powers."""

    g: np.ndarray
    h_bi: list
    h_ri: list
    h_be: np.ndarray
    h_re: np.ndarray
    sigma2_i: list

    @property
    def n_ir(self):
        return len(self.h_bi)

    def validate(self, cfg):
        if self.n_ir < 1 or len(self.h_ri) != self.n_ir or len(self.sigma2_i) != self.n_ir:
            raise InvalidInputError("per-receiver lists must be non-empty and of equal length")
        shapes = [(self.g, (cfg.m, cfg.n_t)), (self.h_be, (cfg.n_e, cfg.n_t)),
                  (self.h_re, (cfg.n_e, cfg.m))]
        shapes += [(h, (cfg.n_i, cfg.n_t)) for h in self.h_bi]
        shapes += [(h, (cfg.n_i, cfg.m)) for h in self.h_ri]
        for arr, shape in shapes:
            if np.shape(arr) != shape:
                raise InvalidInputError(f"channel has shape {np.shape(arr)}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError("channel has non-finite entries")
        if any(not s > 0 for s in self.sigma2_i):
            raise InvalidInputError("noise powers must be positive")
        return self

    def single(self, l, cfg):
        """Single-receiver view of receiver l (ChannelSet, SystemConfig)."""
        from dataclasses import replace
        from .model import ChannelSet

        ch = ChannelSet(self.g, self.h_bi[l], self.h_be, self.h_ri[l], self.h_re)
        return ch, replace(cfg, sigma2_i=float(self.sigma2_i[l]))

    @classmethod
    def from_single(cls, ch, cfg, copies=1):
        return cls(ch.g, [ch.h_bi] * copies, [ch.h_ri] * copies, ch.h_be, ch.h_re,
                   [cfg.sigma2_i] * copies)


@dataclass(frozen=True)
class MulticastAux:
    u_i: list
    w_i: list
    u_e: np.ndarray
    w_e: np.ndarray
    w_x: np.ndarray

    def branch(self, l):
        return AuxiliarySet(self.u_i[l], self.w_i[l], self.u_e, self.w_e, self.w_x)


@dataclass
class CcpState:
    """Relaxed phases, slacks, penalty weight and epigraph value of one CCP subproblem."""

    phi: np.ndarray
    b: np.ndarray
    lam: float
    z: float
    objective: float = float("nan")
    stalled: bool = False


def _channels(mch, coeffs):
    h_i = [cascade(hb, hr, coeffs, mch.g) for hb, hr in zip(mch.h_bi, mch.h_ri)]
    return h_i, cascade(mch.h_be, mch.h_re, coeffs, mch.g)


def branch_rates_bits(cfg, mch, design):
    """Unclamped R_{I,l} - R_E for every receiver, in bit/s/Hz."""
    h_i, h_e = _channels(mch, design.phase.coefficients)
    r_e = link_rate_nats(h_e, design.v, design.v_e, cfg.sigma2_e)
    return np.array([(link_rate_nats(h, design.v, design.v_e, s) - r_e) / LN2
                     for h, s in zip(h_i, mch.sigma2_i)])


def multicast_sr(cfg, mch, design):
    """min_l (R_{I,l} - R_E) clamped at zero, in bit/s/Hz."""
    mch.validate(cfg)
    return max(0.0, float(branch_rates_bits(cfg, mch, design).min()))


def _aux_from_channels(cfg, mch, h_i, h_e, v, v_e):
    u_i, w_i = [], []
    for h, s in zip(h_i, mch.sigma2_i):
        u, w = mmse_receiver(h, v, v_e, s)
        u_i.append(u)
        w_i.append(w)
    u_e, w_e = eve_receiver(h_e, v_e, cfg.sigma2_e)
    w_x = symmetrize(np.linalg.inv(e_x_matrix(h_e, v, v_e, cfg.sigma2_e)))
    return MulticastAux(u_i, w_i, u_e, w_e, w_x)


def multicast_aux_update(cfg, mch, design):
    """Per-receiver MMSE decoders/weights plus the shared eavesdropper ones."""
    mch.validate(cfg)
    h_i, h_e = _channels(mch, design.phase.coefficients)
    return _aux_from_channels(cfg, mch, h_i, h_e, design.v, design.v_e)


def _h(w, e):
    return logdet_pd_fast(w) - float(np.real(np.trace(w @ e))) + w.shape[0]


def branch_lower_bounds(cfg, mch, design, aux):
    """h_{1,l} + h2 + h3 for each receiver, in nats."""
    h_i, h_e = _channels(mch, design.phase.coefficients)
    out = []
    for l, (h, s) in enumerate(zip(h_i, mch.sigma2_i)):
        e_i, e_e, e_x = mse_matrices(_with_sigma(cfg, s), h, h_e, design.v, design.v_e, aux.branch(l))
        out.append(_h(aux.w_i[l], e_i) + _h(aux.w_e, e_e) + _h(aux.w_x, e_x))
    return np.array(out)


def _with_sigma(cfg, s):
    from dataclasses import replace
    return cfg if s == cfg.sigma2_i else replace(cfg, sigma2_i=float(s))


def f_ms(cfg, mch, design, aux):
    """Lower bound min_l h_{1,l} + h2 + h3 on the multicast secrecy rate, in bit/s/Hz."""
    return float(branch_lower_bounds(cfg, mch, design, aux).min()) / LN2


# ----------------------------------------------------------------------------
# transmit step


@dataclass(frozen=True)
class _BranchQP:
    """Per-branch value Tr(V^H H_V V) - 2Re Tr(V^H B_V) + (same for V_E) - const."""

    a: list            # IR quadratic terms H^H U W U^H H, one per branch
    b: list            # IR linear terms H^H U W, one per branch
    e_x: np.ndarray    # shared sigma_E^-2 H_E^H W_X H_E
    e_e: np.ndarray    # shared H_E^H U_E W_E U_E^H H_E
    b_e: np.ndarray    # shared H_E^H U_E W_E
    const: np.ndarray  # C_{g,l}

    def values(self, v, v_e):
        shared = (np.vdot(v, self.e_x @ v) + np.vdot(v_e, (self.e_x + self.e_e) @ v_e)
                  - 2 * np.vdot(v_e, self.b_e)).real
        vx = v @ v.conj().T + v_e @ v_e.conj().T
        out = []
        for a, b in zip(self.a, self.b):
            out.append(np.real(np.sum(a * vx.T)) - 2 * np.vdot(v, b).real)
        return np.array(out) + shared - self.const

    def objective(self, v, v_e):
        return float(self.values(v, v_e).max())

    def weighted(self, mu):
        a = sum(m * x for m, x in zip(mu, self.a))
        b = sum(m * x for m, x in zip(mu, self.b))
        h_v = symmetrize(a + self.e_x)
        return h_v, symmetrize(h_v + self.e_e), b, self.b_e

    def gradients(self, l, v, v_e):
        h_v = self.a[l] + self.e_x
        h_ve = h_v + self.e_e
        return 2 * (h_v @ v - self.b[l]), 2 * (h_ve @ v_e - self.b_e)


def _branch_constants(cfg, mch, aux):
    shared = (logdet_pd_fast(aux.w_e) + logdet_pd_fast(aux.w_x) + cfg.n_t + cfg.n_e
              - np.real(np.trace(aux.w_e)) - cfg.sigma2_e * np.real(np.trace(aux.w_e @ aux.u_e.conj().T @ aux.u_e))
              - np.real(np.trace(aux.w_x)))
    out = []
    for u, w, s in zip(aux.u_i, aux.w_i, mch.sigma2_i):
        out.append(logdet_pd_fast(w) + cfg.d - np.real(np.trace(w)) - s * np.real(np.trace(w @ u.conj().T @ u)))
    return np.array(out) + shared


def _branch_qp(cfg, mch, h_i, h_e, aux):
    a, b = [], []
    for h, u, w in zip(h_i, aux.u_i, aux.w_i):
        hu = h.conj().T @ u
        a.append(hu @ w @ hu.conj().T)
        b.append(hu @ w)
    he_u = h_e.conj().T @ aux.u_e
    return _BranchQP(a, b,
                     h_e.conj().T @ aux.w_x @ h_e / cfg.sigma2_e,
                     he_u @ aux.w_e @ he_u.conj().T,
                     he_u @ aux.w_e,
                     _branch_constants(cfg, mch, aux))


def _project_power(v, v_e, p_t):
    p = np.vdot(v, v).real + np.vdot(v_e, v_e).real
    if p <= p_t:
        return v, v_e
    s = np.sqrt(p_t / p)
    return v * s, v_e * s


def _solve_dual(qp, p_t, iters):
    """Maximize the dual over simplex weights; return the best primal point seen."""
    n = len(qp.a)
    best = [np.inf, None, None]

    def inner(mu):
        v, v_e, _ = solve_power_constrained_qp(*qp.weighted(mu), p_t)
        vals = qp.values(v, v_e)
        if vals.max() < best[0]:
            best[:] = [vals.max(), v, v_e]
        return float(np.dot(mu, vals)), vals

    if n == 1:
        inner(np.ones(1))
    elif n == 2:
        res = minimize_scalar(lambda t: -inner(np.array([t, 1 - t]))[0], bounds=(0.0, 1.0),
                              method="bounded", options={"xatol": 1e-12, "maxiter": max(iters, 60)})
        for t in (0.0, 1.0, res.x):
            inner(np.array([t, 1 - t]))
    else:
        mu = np.full(n, 1.0 / n)
        _, vals = inner(mu)
        scale = max(np.ptp(vals), 1e-12)
        for k in range(1, iters + 1):
            step = 1.0 / (scale * np.sqrt(k))
            # the dual gradient is the vector of branch values
            mu = mu * np.exp(step * (vals - vals.max()))
            mu /= mu.sum()
            _, vals = inner(mu)
    return best[1], best[2]


def _solve_subgradient(qp, p_t, v0, v_e0, iters):
    v, v_e = _project_power(v0, v_e0, p_t)
    vals = qp.values(v, v_e)
    best = [vals.max(), v, v_e]
    l = int(np.argmax(vals))
    g_v, g_e = qp.gradients(l, v, v_e)
    gnorm = np.sqrt(np.linalg.norm(g_v) ** 2 + np.linalg.norm(g_e) ** 2)
    if gnorm == 0:
        return v, v_e
    alpha0 = 0.1 * np.sqrt(p_t) / gnorm
    rising, prev = 0, vals.max()
    for k in range(1, iters + 1):
        step = alpha0 / np.sqrt(k)
        v, v_e = _project_power(v - step * g_v, v_e - step * g_e, p_t)
        vals = qp.values(v, v_e)
        cur = vals.max()
        if cur < best[0]:
            best = [cur, v, v_e]
        rising = rising + 1 if cur > prev else 0
        if rising >= 50:
            raise NumericalError("subgradient iterations diverged")
        prev = cur
        l = int(np.argmax(vals))
        g_v, g_e = qp.gradients(l, v, v_e)
    return best[1], best[2]


def solve_multicast_qcqp(cfg, mch, aux, p_t=None, iters=2000, phase=None, start=None,
                         method="dual"):
    """Minimize max_l (S_l(V, V_E) - C_l) under the power budget.

    Parameters
    ----------
    phase : PhaseProfile
        Phases defining the effective channels (all zero if omitted).
    start : (V, V_E), optional
        Incoming point; the result is never worse than it.
    method : {"dual", "subgradient"}

    Returns
    -------
    (V, V_E)
    """
    p_t = cfg.p_t if p_t is None else p_t
    phase = phase or PhaseProfile(np.zeros(cfg.m))
    h_i, h_e = _channels(mch, phase.coefficients)
    qp = _branch_qp(cfg, mch, h_i, h_e, aux)
    if method == "dual":
        v, v_e = _solve_dual(qp, p_t, iters)
    elif method == "subgradient":
        if start is None:
            start = (np.zeros((cfg.n_t, cfg.d), complex), np.zeros((cfg.n_t, cfg.n_t), complex))
        v, v_e = _solve_subgradient(qp, p_t, start[0], start[1], iters)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    if start is not None and qp.objective(*start) < qp.objective(v, v_e):
        v, v_e = start
    return v, v_e


# ----------------------------------------------------------------------------
# phase step


def branch_phase_quadratics(cfg, mch, design, aux):
    """Per-branch phase quadratics Q_l with Q_l.total(phi) - C_l = S_l - C_l at unit-modulus phi."""
    g_eff = design.phase.amplitude * mch.g
    q_e = eve_quadratic(mch.h_be, mch.h_re, g_eff, design.v, design.v_e,
                        aux.u_e, aux.w_e, aux.w_x, cfg.sigma2_e)
    consts = _branch_constants(cfg, mch, aux)
    out = []
    for l in range(mch.n_ir):
        q = ir_quadratic(mch.h_bi[l], mch.h_ri[l], g_eff, design.v, design.v_e, aux.u_i[l], aux.w_i[l]) + q_e
        out.append((q, float(consts[l])))
    return out


def _coordinate_max(qv, a, lam):
    """Per-coordinate maximizer of 2Re(conj(x) q) - lam*(max(0, 1+|a|^2-2Re(conj(a)x)) + max(0, |x|^2-1)).

    In the frame x = (a/|a|)(u + jv) the objective is concave and piecewise
    quadratic; its maximum is one of the stationary points of the pieces or a
    maximizer along the kinks (the line u = u0 and the unit circle).
    """
    r = np.abs(a)
    ok = r > 1e-12
    frame = np.where(ok, a / np.where(ok, r, 1.0), 1.0)
    qp = np.conj(frame) * qv
    al, be = qp.real, qp.imag
    u0 = np.where(ok, (1 + r ** 2) / (2 * np.where(ok, r, 1.0)), 0.0)
    s = np.sqrt(np.maximum(0.0, 1 - u0 ** 2))
    n1 = np.hypot(al + lam * r, be)
    n2 = np.hypot(al, be)
    n1s, n2s = np.where(n1 > 0, n1, 1.0), np.where(n2 > 0, n2, 1.0)
    u = np.stack([(al + lam * r) / lam, al / lam,
                  np.where(n1 > 0, (al + lam * r) / n1s, 1.0), np.where(n2 > 0, al / n2s, 1.0),
                  u0, u0, u0])
    v = np.stack([be / lam, be / lam,
                  np.where(n1 > 0, be / n1s, 0.0), np.where(n2 > 0, be / n2s, 0.0),
                  be / lam, s, -s])
    val = 2 * (u * al + v * be) - lam * (np.maximum(0, 1 + r ** 2 - 2 * r * u)
                                         + np.maximum(0, u ** 2 + v ** 2 - 1))
    k = np.argmax(val, axis=0)
    idx = np.arange(qv.size)
    return frame * (u[k, idx] + 1j * v[k, idx]), val[k, idx]


def _penalty_terms(phi, phi_t):
    lower = np.maximum(0.0, 1 + np.abs(phi_t) ** 2 - 2 * np.real(np.conj(phi_t) * phi))
    upper = np.maximum(0.0, np.abs(phi) ** 2 - 1)
    return np.concatenate([lower, upper])


def _ccp_primal(phi, qs, ks, phi_t, lam):
    z = min(2 * np.real(np.vdot(phi, q)) - k for q, k in zip(qs, ks))
    b = _penalty_terms(phi, phi_t)
    return z - lam * b.sum(), z, b


def _epigraph_cuts(branches, phi_t):
    qs, ks = [], []
    for q, c in branches:
        vec, c_q = surrogate_vector(q, phi_t)
        qs.append(vec)
        ks.append(c_q + q.c_t - c)
    return qs, np.array(ks)


def ccp_phase_step(branches, phi_t, lam_ccp, iters=200, phi_lin=None):
    """Solve one convexified penalty subproblem.

    Parameters
    ----------
    branches : list of (PhaseQuadratic, float)
        Branch quadratic Q_l and constant C_l; the objective to minimize over
        phases is max_l Q_l.total(phi) - C_l.
    phi_t : complex vector
        Unit-modulus point where the branch minorizers are built.
    lam_ccp : float
        Penalty weight on the slack vector.
    phi_lin : complex vector, optional
        Point where the lower-modulus constraints are linearized (phi_t if omitted).

    Returns
    -------
    CcpState
    """
    phi_t = np.asarray(phi_t, dtype=complex)
    qs, ks = _epigraph_cuts(branches, phi_t)
    if phi_lin is not None:
        phi_t = np.asarray(phi_lin, dtype=complex)
    n = len(qs)
    best = [-np.inf, None, None, None]

    def inner(nu):
        qv = sum(w * q for w, q in zip(nu, qs))
        phi, _ = _coordinate_max(qv, phi_t, lam_ccp)
        val, z, b = _ccp_primal(phi, qs, ks, phi_t, lam_ccp)
        if val > best[0]:
            best[:] = [val, phi, z, b]
        branch = np.array([2 * np.real(np.vdot(phi, q)) for q in qs]) - ks
        pen = lam_ccp * _penalty_terms(phi, phi_t).sum()
        return float(np.dot(nu, branch) - pen), branch

    stalled = False
    if n == 1:
        inner(np.ones(1))
    elif n == 2:
        res = minimize_scalar(lambda t: inner(np.array([t, 1 - t]))[0], bounds=(0.0, 1.0),
                              method="bounded", options={"xatol": 1e-12, "maxiter": max(iters, 60)})
        for t in (0.0, 1.0, res.x):
            inner(np.array([t, 1 - t]))
        stalled = not res.success
    else:
        nu = np.full(n, 1.0 / n)
        dual, branch = inner(nu)
        scale = max(np.ptp(branch), 1e-12)
        for k in range(1, iters + 1):
            nu = nu * np.exp(-(branch - branch.min()) / (scale * np.sqrt(k)))
            nu /= nu.sum()
            dual, branch = inner(nu)
        stalled = best[0] < dual - 1e-6 * max(1.0, abs(dual))
    return CcpState(phi=best[1], b=best[3], lam=lam_ccp, z=float(best[2]),
                    objective=float(best[0]), stalled=stalled)


def _phase_objective(branches, phi):
    """max_l Q_l.total(phi) - C_l, i.e. -f_ms in nats."""
    return max(q.total(phi) - c for q, c in branches)


def ccp_phase_solve(branches, phi0, max_steps=60, lam0=1.0, growth=1.5, lam_cap=1e4, tol=1e-7,
                    modulus_tol=1e-3):
    """Penalty CCP from the unit-modulus point phi0.

    The branch minorizers stay anchored at phi0, where they are valid; only
    the modulus constraints are relinearized. lam0 and lam_cap are relative
    to the largest entry of the minorizer vectors.

    Returns (phi_relaxed, info) where info holds the penalty and slack history.
    """
    phi0 = np.asarray(phi0, dtype=complex)
    phi = phi0
    scale = max(max(np.max(np.abs(surrogate_vector(q, phi)[0])) for q, _ in branches), 1e-300)
    lam = lam0 * scale
    cap = lam_cap * scale
    b_hist, z_prev, stalled = [], None, False
    for _ in range(max_steps):
        st = ccp_phase_step(branches, phi0, lam, phi_lin=phi)
        stalled = stalled or st.stalled
        phi = st.phi
        b_hist.append(float(st.b.sum()))
        violation = float(np.max(np.abs(np.abs(phi) - 1.0)))
        if z_prev is not None and abs(st.z - z_prev) <= tol * max(1.0, abs(z_prev)) \
                and violation <= modulus_tol:
            break
        z_prev = st.z
        lam = min(lam * growth, cap)
    if stalled:
        warnings.warn("CCP inner dual search stalled; using best feasible point", RuntimeWarning)
    return phi, {"slack_history": b_hist, "final_lambda": lam / scale,
                 "violation": float(np.max(np.abs(np.abs(phi) - 1.0)))}


def multicast_phase_update(branches, phi0, ccp_steps=60, max_rounds=500, tol=1e-8):
    """Repeat minorize / penalty-CCP / snap from phi0 while max_l Q_l - C_l keeps falling.

    A snapped point is kept only if it does not raise the objective, so the
    result is never worse than phi0. Returns (phi, largest pre-snap violation).
    """
    phi = np.asarray(phi0, dtype=complex)
    f = _phase_objective(branches, phi)
    worst = 0.0
    for _ in range(max_rounds):
        phi_rel, info = ccp_phase_solve(branches, phi, max_steps=ccp_steps)
        worst = max(worst, info["violation"])
        cand = np.exp(1j * np.angle(phi_rel))
        f_new = _phase_objective(branches, cand)
        if f_new > f:
            break
        phi, delta, f = cand, f - f_new, f_new
        if delta <= tol * max(abs(f), 1e-300):
            break
    return phi, worst


# ----------------------------------------------------------------------------
# driver


def bcd_qcqp_ccp_solve(cfg, mch, opts=None, initial=None, amplitude=1.0, qcqp_method="dual",
                       qcqp_iters=2000, ccp_steps=60):
    """Alternate per-receiver auxiliaries, the min-max QCQP and penalty-CCP phases.

    The report's `objective_trace` holds the lower bound f_ms after every
    outer iteration (after the auxiliary refresh it equals the unclamped
    multicast rate); `sr_trace` holds the clamped multicast secrecy rate.
    """
    opts = opts or SolverOptions()
    mch.validate(cfg)
    design = initial if initial is not None else initialize(cfg, None, opts.seed, amplitude,
                                                            opts.random_init)
    design.validate(cfg, rtol=1e-6)
    start = time.perf_counter()
    obj = float(branch_rates_bits(cfg, mch, design).min())
    lb_trace = [obj]
    sr_trace = [max(0.0, obj)]
    violations = []
    termination = "max-iterations"
    it = 0
    for it in range(1, opts.max_outer + 1):
        try:
            aux = multicast_aux_update(cfg, mch, design)
            v, v_e = solve_multicast_qcqp(cfg, mch, aux, cfg.p_t, qcqp_iters, design.phase,
                                          start=(design.v, design.v_e), method=qcqp_method)
            design = TransmitDesign(v, v_e, design.phase)
            branches = branch_phase_quadratics(cfg, mch, design, aux)
            phi, viol = multicast_phase_update(branches, design.phase.unit, ccp_steps,
                                               opts.mm_max_iter, opts.mm_tol)
            violations.append(viol)
            design = design.with_phase(PhaseProfile(np.angle(phi), design.phase.amplitude))
            lb_trace.append(f_ms(cfg, mch, design, aux))
            new_obj = float(branch_rates_bits(cfg, mch, design).min())
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            raise NumericalError(f"multicast BCD failed at outer iteration {it}: {exc}") from exc
        sr_trace.append(max(0.0, new_obj))
        change = abs(new_obj - obj) / max(abs(obj), 1e-300)
        obj = new_obj
        if change < opts.tol:
            termination = "tolerance"
            break
    report = SolverReport(
        sr_trace=sr_trace,
        converged_sr=sr_trace[-1],
        iterations=it,
        termination=termination,
        power_used=design.power(),
        timing=time.perf_counter() - start,
        objective_trace=lb_trace,
        extras={"max_unit_violation": max(violations) if violations else 0.0,
                "unit_violation_trace": violations},
    )
    return design, report
