"""Block coordinate ascent on the secrecy rate: auxiliaries, then precoder/AN, then phases."""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalError
from .model import PhaseProfile, TransmitDesign, cascade, rates_nats
from .numerics import LN2
from .phase_mm import build_phase_quadratic, optimize_phases
from .reformulation import aux_from_channels, constant_cg
from .tpc_an import tpc_an_from_channels


@dataclass(frozen=True)
class SolverOptions:
    max_outer: int = 200
    tol: float = 1e-6
    mm_tol: float = 1e-8
    mm_max_iter: int = 500
    seed: int = 0
    random_init: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if self.max_outer < 1 or self.mm_max_iter < 1:
            raise InvalidInputError("iteration caps must be at least 1")
        if not self.mm_tol > 0:
            raise InvalidInputError("mm_tol must be positive")


@dataclass
class SolverReport:
    sr_trace: list
    converged_sr: float
    iterations: int
    termination: str
    power_used: float
    timing: float
    c_g: float = float("nan")
    objective_trace: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["sr_trace"] = [float(x) for x in self.sr_trace]
        out["objective_trace"] = [float(x) for x in self.objective_trace]
        return out


def initialize(cfg, ch, seed, amplitude=1.0, random_init=False):
    """Feasible starting point with the budget split evenly between V and V_E.

    Phases are uniform on [0, 2pi). V and V_E are scaled identity blocks unless
    `random_init` asks for Gaussian directions.
    """
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, cfg.m)
    if random_init:
        v = rng.standard_normal((cfg.n_t, cfg.d)) + 1j * rng.standard_normal((cfg.n_t, cfg.d))
        v_e = rng.standard_normal((cfg.n_t, cfg.n_t)) + 1j * rng.standard_normal((cfg.n_t, cfg.n_t))
    else:
        v = np.eye(cfg.n_t, cfg.d, dtype=complex)
        v_e = np.eye(cfg.n_t, dtype=complex)
    v *= np.sqrt(cfg.p_t / 2) / np.linalg.norm(v)
    v_e *= np.sqrt(cfg.p_t / 2) / np.linalg.norm(v_e)
    return TransmitDesign(v, v_e, PhaseProfile(theta, amplitude))


def _channels(ch, phase):
    c = phase.coefficients
    return cascade(ch.h_bi, ch.h_ri, c, ch.g), cascade(ch.h_be, ch.h_re, c, ch.g)


def _step(name, it, fn, *args):
    try:
        return fn(*args)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise NumericalError(f"{name} failed at outer iteration {it}: {exc}") from exc


def _rel_change(new, old):
    return abs(new - old) / max(abs(old), 1e-300)


def bcd_solve(cfg, ch, opts=None, initial=None, amplitude=1.0, optimize_phase=True):
    """Alternate auxiliary, precoder/AN and phase updates until the secrecy rate settles.

    Parameters
    ----------
    initial : TransmitDesign, optional
        Starting design; defaults to `initialize(cfg, ch, opts.seed, amplitude)`.
    optimize_phase : bool
        False keeps the phases of the starting design fixed.

    Returns
    -------
    (TransmitDesign, SolverReport)
    """
    opts = opts or SolverOptions()
    ch.validate(cfg)
    design = initial if initial is not None else initialize(
        cfg, ch, opts.seed, amplitude, opts.random_init)
    design.validate(cfg, rtol=1e-6)
    start = time.perf_counter()

    h_i, h_e = _channels(ch, design.phase)
    r_i, r_e = rates_nats(cfg, h_i, h_e, design)
    obj = (r_i - r_e) / LN2
    objective_trace = [obj]
    sr_trace = [max(0.0, obj)]
    termination = "max-iterations"
    c_g = float("nan")
    v, v_e, phase = design.v, design.v_e, design.phase
    it = 0
    for it in range(1, opts.max_outer + 1):
        aux = _step("auxiliary update", it, aux_from_channels, cfg, h_i, h_e, v, v_e)
        c_g = constant_cg(cfg, aux)
        v, v_e, _ = _step("precoder/AN update", it, tpc_an_from_channels, cfg, h_i, h_e, aux)
        if optimize_phase:
            cur = TransmitDesign(v, v_e, phase)
            q = _step("phase quadratic", it, build_phase_quadratic, cfg, ch, cur, aux)
            phi, _ = _step("MM phase update", it, optimize_phases, q, phase.unit,
                           opts.mm_tol, opts.mm_max_iter)
            phase = PhaseProfile(np.angle(phi), phase.amplitude)
            h_i, h_e = _channels(ch, phase)
        r_i, r_e = _step("rate evaluation", it, rates_nats, cfg, h_i, h_e,
                         TransmitDesign(v, v_e, phase))
        new_obj = (r_i - r_e) / LN2
        old_sr, new_sr = sr_trace[-1], max(0.0, new_obj)
        if old_sr > 0 and new_sr > 0:
            change = _rel_change(new_sr, old_sr)
        else:
            change = _rel_change(new_obj, objective_trace[-1])
        objective_trace.append(new_obj)
        sr_trace.append(new_sr)
        if change < opts.tol:
            termination = "tolerance"
            break

    out = TransmitDesign(v, v_e, phase)
    report = SolverReport(
        sr_trace=sr_trace,
        converged_sr=sr_trace[-1],
        iterations=it,
        termination=termination,
        power_used=out.power(),
        timing=time.perf_counter() - start,
        c_g=c_g,
        objective_trace=objective_trace,
    )
    return out, report
