"""Monte-Carlo sweeps over the simulation scenario, baseline schemes and CSV output."""

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy.optimize import minimize_scalar

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .bcd_driver import SolverOptions, SolverReport, bcd_solve, initialize
from .channel import RngStream, Scenario, build_scenario, dbm_to_watts
from .errors import InvalidInputError, NumericalError, UnsupportedConfigurationError
from .model import PhaseProfile, SystemConfig, TransmitDesign

SCHEMES = ("bcd_mm", "rand_phase", "no_irs", "grid_oracle")
VARIABLES = ("power_dbm", "m_elements", "d_bi", "alpha_irs", "d_streams", "amplitude", "phase_bits")
CSV_COLUMNS = ("sweep_variable", "value", "scheme", "mean_sr_bps_hz", "stderr", "mean_iters",
               "mean_ms", "n_ok", "n_failed")

DEFAULT_SYSTEM = {
    "n_t": 4, "n_i": 2, "n_e": 2, "d": 2, "m": 8,
    "p_t_dbm": 15.0, "sigma2_i_dbm": -75.0, "sigma2_e_dbm": -75.0,
}


# ----------------------------------------------------------------------------
# configuration


def system_config(params):
    """SystemConfig from a dict; power keys may be given in dBm with a `_dbm` suffix."""
    p = dict(DEFAULT_SYSTEM)
    for key in ("p_t", "sigma2_i", "sigma2_e"):
        if key in params:
            p.pop(key + "_dbm", None)
    p.update(params)
    out = {}
    names = {f.name for f in fields(SystemConfig)}
    for key, val in p.items():
        if key.endswith("_dbm") and key[:-4] in names:
            out[key[:-4]] = dbm_to_watts(float(val))
        elif key in names:
            out[key] = val
        else:
            raise InvalidInputError(f"unknown system key {key!r}")
    return SystemConfig(**out)


def _build(cls, params, what):
    names = {f.name for f in fields(cls)}
    unknown = set(params) - names
    if unknown:
        raise InvalidInputError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from exc


def scenario_from(params):
    return _build(Scenario, params or {}, "scenario")


def solver_options_from(params):
    return _build(SolverOptions, params or {}, "solver")


def load_config(path):
    """Parse a TOML or JSON file into a dict."""
    path = str(path)
    try:
        if path.endswith(".json"):
            with open(path) as fh:
                return json.load(fh)
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc


@dataclass
class SweepSpec:
    variable: str
    values: list
    realizations: int = 50
    schemes: tuple = ("bcd_mm", "rand_phase", "no_irs")
    system: dict = field(default_factory=dict)
    scenario: Scenario = field(default_factory=Scenario)
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise InvalidInputError(f"unknown sweep variable {self.variable!r}")
        if len(self.values) == 0:
            raise InvalidInputError("sweep values must be non-empty")
        if self.realizations < 1:
            raise InvalidInputError("realizations must be at least 1")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise InvalidInputError(f"unknown schemes {sorted(bad)}")
        self.schemes = tuple(self.schemes)
        system_config(self.system)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        sweep = dict(data.pop("sweep", {}))
        system = data.pop("system", {})
        scenario = scenario_from(data.pop("scenario", {}))
        solver = solver_options_from(data.pop("solver", {}))
        if data:
            raise InvalidInputError(f"unknown top-level keys: {sorted(data)}")
        allowed = {"variable", "values", "realizations", "schemes", "seed", "workers"}
        if set(sweep) - allowed:
            raise InvalidInputError(f"unknown sweep keys: {sorted(set(sweep) - allowed)}")
        if "variable" not in sweep or "values" not in sweep:
            raise InvalidInputError("sweep needs `variable` and `values`")
        return cls(system=system, scenario=scenario, solver=solver, **sweep)


# ----------------------------------------------------------------------------
# schemes


def quantize_phases(phases, bits):
    """Snap each phase to the nearest of 2^bits uniform levels; exact ties go to the lower level."""
    if int(bits) != bits or bits < 1:
        raise InvalidInputError("bits must be a positive integer")
    n = 2 ** int(bits)
    step = 2 * np.pi / n
    x = np.mod(np.asarray(phases, dtype=float), 2 * np.pi) / step
    k = np.floor(x)
    k = np.where(x - k > 0.5, k + 1, k)
    return np.mod(k, n) * step


def _fixed_phase(cfg, ch, opts, design):
    return bcd_solve(cfg, ch, opts, initial=design, optimize_phase=False)


def grid_oracle(cfg, ch, opts=None, amplitude=1.0, step_deg=1.0, refine=True, cold_step_deg=10.0):
    """Exhaustive phase grid with a fixed-phase precoder/AN solve at each point (M <= 2).

    The fixed-phase solve only finds a stationary precoder, so the grid is
    walked in order with each point starting from its neighbour's solution,
    and every point on the coarser `cold_step_deg` grid is also solved from
    the initial precoder; the better of the two is kept. With `refine`, a
    bounded scalar search (M = 1) or a finer local grid (M = 2) polishes the
    best point.
    """
    if cfg.m > 2:
        raise UnsupportedConfigurationError("grid_oracle supports M <= 2 only")
    opts = opts or SolverOptions()
    base = initialize(cfg, ch, opts.seed, amplitude)
    axis = np.deg2rad(np.arange(0.0, 360.0, step_deg))
    grids = np.meshgrid(*([axis] * cfg.m), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    best_sr, best, best_rep = -np.inf, None, None
    prev = base
    total_iters = 0
    start = time.perf_counter()

    def solve_at(theta, warm):
        d0 = TransmitDesign(warm.v, warm.v_e, PhaseProfile(theta, amplitude))
        return _fixed_phase(cfg, ch, opts, d0)

    ratio = cold_step_deg / step_deg
    for idx, theta in zip(np.ndindex(grids[0].shape), points):
        design, rep = solve_at(theta, prev)
        total_iters += rep.iterations
        if all(i % ratio == 0 for i in idx):
            d_cold, r_cold = solve_at(theta, base)
            total_iters += r_cold.iterations
            if r_cold.converged_sr > rep.converged_sr:
                design, rep = d_cold, r_cold
        prev = design
        if rep.converged_sr > best_sr:
            best_sr, best, best_rep = rep.converged_sr, design, rep
    if refine:
        h = np.deg2rad(step_deg)
        cold = base
        if cfg.m == 1:
            cache = {}

            def neg(t):
                design, rep = solve_at(np.array([t]), best)
                cache[t] = (design, rep)
                return -rep.converged_sr

            t0 = best.phase.phases[0]
            minimize_scalar(neg, bounds=(t0 - h, t0 + h), method="bounded",
                            options={"xatol": 1e-7})
            candidates = list(cache.values())
            candidates.append(solve_at(best.phase.phases, cold))
        else:
            fine = np.linspace(-h, h, 11)
            candidates = [solve_at(best.phase.phases + np.array([a, b]), best)
                          for a in fine for b in fine]
        for design, rep in candidates:
            total_iters += rep.iterations
            if rep.converged_sr > best_sr:
                best_sr, best, best_rep = rep.converged_sr, design, rep
    report = SolverReport(
        sr_trace=list(best_rep.sr_trace), converged_sr=best_sr, iterations=total_iters,
        termination=best_rep.termination, power_used=best.power(),
        timing=time.perf_counter() - start, c_g=best_rep.c_g,
        objective_trace=list(best_rep.objective_trace),
        extras={"grid_points": int(points.shape[0])},
    )
    return best, report


def run_scheme(scheme, cfg, ch, opts=None, amplitude=1.0, initial=None):
    """Solve one instance with the named scheme; returns (design, SolverReport)."""
    opts = opts or SolverOptions()
    if scheme == "bcd_mm":
        return bcd_solve(cfg, ch, opts, initial=initial, amplitude=amplitude)
    if scheme == "rand_phase":
        return bcd_solve(cfg, ch, opts, initial=initial, amplitude=amplitude, optimize_phase=False)
    if scheme == "no_irs":
        return bcd_solve(cfg, ch.without_irs(), opts, initial=initial, amplitude=amplitude,
                         optimize_phase=False)
    if scheme == "grid_oracle":
        return grid_oracle(cfg, ch, opts, amplitude)
    raise InvalidInputError(f"unknown scheme {scheme!r}")


def solve_discrete(cfg, ch, design, bits, opts=None):
    """Quantize the phases of `design` and re-solve V, V_E with those phases fixed."""
    opts = opts or SolverOptions()
    q = PhaseProfile(quantize_phases(design.phase.phases, bits), design.phase.amplitude)
    return bcd_solve(cfg, ch, opts, initial=design.with_phase(q), optimize_phase=False)


# ----------------------------------------------------------------------------
# sweeps


def apply_variable(variable, value, system, scenario):
    """Return (SystemConfig, Scenario, phase_bits) for one sweep point."""
    system = dict(system)
    bits = None
    if variable == "power_dbm":
        system.pop("p_t", None)
        system["p_t_dbm"] = float(value)
    elif variable == "m_elements":
        system["m"] = int(value)
    elif variable == "d_streams":
        system["d"] = int(value)
    elif variable == "d_bi":
        scenario = replace(scenario, d_bi=float(value))
    elif variable == "alpha_irs":
        scenario = replace(scenario, alpha_br=float(value), alpha_ri=float(value),
                           alpha_re=float(value))
    elif variable == "amplitude":
        scenario = replace(scenario, amplitude=float(value))
    elif variable == "phase_bits":
        bits = int(value)
    else:
        raise InvalidInputError(f"unknown sweep variable {variable!r}")
    return system_config(system), scenario, bits


def init_seed(seed, realization):
    return int(np.random.SeedSequence([int(seed), int(realization), 1]).generate_state(1)[0])


def channel_digest(ch):
    h = hashlib.sha256()
    for name in ("g", "h_bi", "h_be", "h_ri", "h_re"):
        h.update(np.ascontiguousarray(getattr(ch, name)).tobytes())
    return h.hexdigest()


def _run_item(spec, value, realization):
    """All schemes for one (value, realization); returns {scheme: record}."""
    cfg, scn, bits = apply_variable(spec.variable, value, spec.system, spec.scenario)
    ch = build_scenario(scn, cfg, RngStream(spec.seed, realization))
    opts = replace(spec.solver, seed=init_seed(spec.seed, realization))
    out = {}
    for scheme in spec.schemes:
        try:
            t0 = time.perf_counter()
            design, rep = run_scheme(scheme, cfg, ch, opts, scn.amplitude)
            iters = rep.iterations
            if bits and bits > 0 and scheme != "no_irs":
                design, rep2 = solve_discrete(cfg, ch, design, bits, opts)
                iters += rep2.iterations
                rep = rep2
            out[scheme] = {"sr": rep.converged_sr, "iters": iters,
                           "ms": 1e3 * (time.perf_counter() - t0), "ok": True,
                           "digest": channel_digest(ch)}
        except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
            out[scheme] = {"ok": False, "error": str(exc), "digest": channel_digest(ch)}
    return out


def _run_chunk(args):
    spec, items = args
    return [(v_idx, r, _run_item(spec, spec.values[v_idx], r)) for v_idx, r in items]


@dataclass
class SweepResult:
    rows: list
    records: dict

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            for row in self.rows:
                w.writerow(row)

    def lookup(self, value, scheme):
        for row in self.rows:
            if row["scheme"] == scheme and row["value"] == value:
                return row
        raise KeyError((value, scheme))

    def paired(self, value_index, scheme):
        """Per-realization SR at one sweep point (None where the solve failed)."""
        keys = sorted(k for k in self.records if k[0] == value_index)
        return [self.records[k][scheme]["sr"] if self.records[k][scheme]["ok"] else None
                for k in keys]


def _aggregate(spec, records):
    rows = []
    for v_idx, value in enumerate(spec.values):
        for scheme in spec.schemes:
            recs = [records[(v_idx, r)][scheme] for r in range(spec.realizations)]
            ok = [x for x in recs if x["ok"]]
            sr = np.array([x["sr"] for x in ok])
            n = len(ok)
            rows.append({
                "sweep_variable": spec.variable,
                "value": value,
                "scheme": scheme,
                "mean_sr_bps_hz": float(sr.mean()) if n else float("nan"),
                "stderr": float(sr.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
                "mean_iters": float(np.mean([x["iters"] for x in ok])) if n else float("nan"),
                "mean_ms": float(np.mean([x["ms"] for x in ok])) if n else float("nan"),
                "n_ok": n,
                "n_failed": len(recs) - n,
            })
    return rows


def run_sweep(spec, out_csv=None):
    """Run every (value, realization, scheme) combination and aggregate.

    Channels depend only on (seed, realization), so all schemes and all sweep
    values see paired draws.
    """
    items = [(v, r) for v in range(len(spec.values)) for r in range(spec.realizations)]
    if spec.workers > 1:
        chunks = [items[i::spec.workers] for i in range(spec.workers)]
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            parts = list(pool.map(_run_chunk, [(spec, c) for c in chunks]))
        done = [x for part in parts for x in part]
    else:
        done = _run_chunk((spec, items))
    records = {(v, r): rec for v, r, rec in done}
    result = SweepResult(_aggregate(spec, records), records)
    if out_csv is not None:
        result.write_csv(out_csv)
    return result


def instance_from_config(data, realization=0):
    """(cfg, scenario, channels, options) for the `solve`/`convergence` commands."""
    data = dict(data)
    cfg = system_config(data.pop("system", {}))
    scn = scenario_from(data.pop("scenario", {}))
    opts = solver_options_from(data.pop("solver", {}))
    seed = int(data.pop("seed", 0))
    realization = int(data.pop("realization", realization))
    data.pop("sweep", None)
    data.pop("schemes", None)
    if data:
        raise InvalidInputError(f"unknown top-level keys: {sorted(data)}")
    ch = build_scenario(scn, cfg, RngStream(seed, realization))
    return cfg, scn, ch, opts


def report_json(report, scheme, cfg, design):
    out = report.to_dict()
    out["scheme"] = scheme
    out["p_t_watts"] = cfg.p_t
    out["phases"] = [float(x) for x in design.phase.phases]
    return json.dumps(out, indent=2)
