import csv
import json
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from irs_secrecy import cli, experiments
from irs_secrecy.bcd_driver import SolverOptions, initialize
from irs_secrecy.channel import RngStream, Scenario, build_scenario, dbm_to_watts
from irs_secrecy.errors import InvalidInputError, NumericalError, UnsupportedConfigurationError
from irs_secrecy.experiments import (CSV_COLUMNS, SweepSpec, apply_variable, channel_digest,
                                     grid_oracle, load_config, quantize_phases, run_scheme,
                                     run_sweep, solve_discrete, system_config)
from irs_secrecy.model import PhaseProfile, SystemConfig


def small_instance(realization, m=4):
    cfg = system_config({"m": m})
    return cfg, build_scenario(Scenario(), cfg, RngStream(7, realization))


def test_quantize_examples():
    assert_allclose(quantize_phases([0.4 * np.pi], 1), [0.0])
    assert_allclose(quantize_phases([0.6 * np.pi], 1), [np.pi])
    # exact tie between 0 and pi/2 at b=2 goes to the lower level
    assert_allclose(quantize_phases([np.pi / 4], 2), [0.0])
    assert_allclose(quantize_phases([-0.1], 3), [0.0], atol=1e-15)
    assert_allclose(quantize_phases([2 * np.pi - 0.1], 1), [0.0])
    with pytest.raises(InvalidInputError):
        quantize_phases([0.1], 0)


def test_quantized_levels_are_on_the_grid():
    rng = np.random.default_rng(0)
    for b in (1, 2, 3, 5):
        th = rng.uniform(-10, 10, 200)
        q = quantize_phases(th, b)
        k = q / (2 * np.pi / 2 ** b)
        assert_allclose(k, np.round(k), atol=1e-9)
        err = np.angle(np.exp(1j * (th - q)))
        assert np.all(np.abs(err) <= np.pi / 2 ** b + 1e-12)


def test_finer_quantization_degrades_less():
    opts = SolverOptions(max_outer=100)
    for r in range(4):
        cfg, ch = small_instance(r)
        design, rep = run_scheme("bcd_mm", cfg, ch, opts)
        _, r2 = solve_discrete(cfg, ch, design, 2, opts)
        _, r10 = solve_discrete(cfg, ch, design, 10, opts)
        assert rep.converged_sr - r10.converged_sr <= rep.converged_sr - r2.converged_sr + 1e-9


def test_rand_phase_dominated_by_bcd_from_same_phases():
    opts = SolverOptions(max_outer=100)
    for r in range(4):
        cfg, ch = small_instance(r)
        fixed, rep_fixed = run_scheme("rand_phase", cfg, ch, opts)
        _, rep_mm = run_scheme("bcd_mm", cfg, ch, opts, initial=fixed)
        assert rep_fixed.converged_sr <= rep_mm.converged_sr + 1e-6
        # both start from the same random phases
        _, rep_cold = run_scheme("bcd_mm", cfg, ch, opts)
        assert rep_cold.sr_trace[0] == rep_fixed.sr_trace[0]


def test_no_irs_ignores_phase_draw():
    cfg, ch = small_instance(1)
    out = []
    for seed in (0, 1, 2):
        _, rep = run_scheme("no_irs", cfg, ch, SolverOptions(seed=seed))
        out.append(rep.converged_sr)
    assert_allclose(out, out[0], rtol=1e-6)


def test_grid_oracle_limited_to_two_elements():
    cfg, ch = small_instance(0, m=3)
    with pytest.raises(UnsupportedConfigurationError):
        grid_oracle(cfg, ch)
    with pytest.raises(UnsupportedConfigurationError):
        run_scheme("grid_oracle", cfg, ch)


def test_grid_oracle_matches_bcd_at_one_element():
    cfg, ch = small_instance(3, m=1)
    _, rep = run_scheme("bcd_mm", cfg, ch)
    _, ref = grid_oracle(cfg, ch, step_deg=2.0)
    assert abs(rep.converged_sr - ref.converged_sr) <= 1e-3


def test_unknown_scheme():
    cfg, ch = small_instance(0)
    with pytest.raises(InvalidInputError):
        run_scheme("exhaustive", cfg, ch)


def test_system_config_parsing():
    cfg = system_config({"p_t_dbm": 30, "m": 16})
    assert cfg.m == 16 and cfg.p_t == pytest.approx(1.0)
    assert cfg.sigma2_i == pytest.approx(dbm_to_watts(-75))
    assert system_config({"p_t": 2.0}).p_t == 2.0
    with pytest.raises(InvalidInputError):
        system_config({"antennas": 4})


def test_apply_variable():
    cfg, scn, bits = apply_variable("alpha_irs", 3.0, {}, Scenario())
    assert scn.alpha_br == scn.alpha_ri == scn.alpha_re == 3.0 and bits is None
    cfg, _, _ = apply_variable("power_dbm", 10, {"p_t": 5.0}, Scenario())
    assert cfg.p_t == pytest.approx(dbm_to_watts(10))
    _, _, bits = apply_variable("phase_bits", 3, {}, Scenario())
    assert bits == 3
    with pytest.raises(InvalidInputError):
        apply_variable("noise", 1, {}, Scenario())


def test_sweep_spec_validation():
    base = {"sweep": {"variable": "m_elements", "values": [2]}}
    spec = SweepSpec.from_dict(base)
    assert spec.realizations == 50
    for bad in ({"sweep": {"variable": "m_elements", "values": []}},
                {"sweep": {"variable": "bogus", "values": [1]}},
                {"sweep": {"variable": "m_elements", "values": [2], "realizations": 0}},
                {"sweep": {"variable": "m_elements", "values": [2], "schemes": ["magic"]}},
                {"sweep": {"values": [2]}},
                dict(base, extra={}),
                dict(base, scenario={"d_xx": 1.0}),
                dict(base, solver={"max_outer": 10, "speed": 1})):
        with pytest.raises(InvalidInputError):
            SweepSpec.from_dict(bad)


def tiny_spec(**kw):
    base = dict(variable="m_elements", values=[2], realizations=1,
                schemes=("bcd_mm", "rand_phase", "no_irs"), solver=SolverOptions(max_outer=30), seed=3)
    base.update(kw)
    return SweepSpec(**base)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_single_point_csv(tmp_path):
    out = tmp_path / "s.csv"
    res = run_sweep(tiny_spec(), out)
    rows = read_rows(out)
    assert [r["scheme"] for r in rows] == ["bcd_mm", "rand_phase", "no_irs"]
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert all(r["n_ok"] == "1" and r["n_failed"] == "0" for r in rows)
    assert all(float(r["mean_sr_bps_hz"]) >= 0 for r in rows)
    assert res.lookup(2, "bcd_mm")["mean_sr_bps_hz"] >= res.lookup(2, "no_irs")["mean_sr_bps_hz"] - 1e-9


def test_sweep_pairs_channels_across_schemes_and_values():
    spec = tiny_spec(variable="power_dbm", values=[5, 10], realizations=2)
    res = run_sweep(spec)
    for r in range(2):
        digests = {rec["digest"] for v in range(2) for rec in res.records[(v, r)].values()}
        assert len(digests) == 1
    assert res.records[(0, 0)]["bcd_mm"]["digest"] != res.records[(0, 1)]["bcd_mm"]["digest"]
    cfg = system_config({})
    assert res.records[(0, 1)]["no_irs"]["digest"] == channel_digest(
        build_scenario(Scenario(), cfg, RngStream(3, 1)))
    assert len(res.paired(1, "bcd_mm")) == 2


def test_sweep_rerun_is_reproducible(tmp_path):
    spec = tiny_spec(variable="power_dbm", values=[5, 15], realizations=2)
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    run_sweep(spec, a)
    run_sweep(spec, b)
    run_sweep(replace(spec, workers=2), c)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "mean_ms"} for r in rows]
    assert strip(read_rows(a)) == strip(read_rows(b)) == strip(read_rows(c))


def test_sweep_counts_failures(monkeypatch):
    real = experiments.run_scheme

    def flaky(scheme, cfg, ch, opts=None, amplitude=1.0, initial=None):
        if scheme == "rand_phase" and opts.seed == experiments.init_seed(3, 1):
            raise NumericalError("forced")
        return real(scheme, cfg, ch, opts, amplitude, initial)

    monkeypatch.setattr(experiments, "run_scheme", flaky)
    res = run_sweep(tiny_spec(realizations=2))
    row = res.lookup(2, "rand_phase")
    assert row["n_ok"] == 1 and row["n_failed"] == 1
    assert res.lookup(2, "bcd_mm")["n_ok"] == 2
    assert res.paired(0, "rand_phase")[1] is None


def test_discrete_phase_sweep():
    res = run_sweep(tiny_spec(variable="phase_bits", values=[0, 1], schemes=("bcd_mm",)))
    cont = res.lookup(0, "bcd_mm")["mean_sr_bps_hz"]
    one_bit = res.lookup(1, "bcd_mm")["mean_sr_bps_hz"]
    assert one_bit <= cont + 1e-9


def test_load_config_formats(tmp_path):
    t = tmp_path / "c.toml"
    t.write_text('[system]\nm = 4\np_t_dbm = 10\n')
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"system": {"m": 4, "p_t_dbm": 10}}))
    assert load_config(t) == load_config(j)
    with pytest.raises(InvalidInputError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[system\n")
    with pytest.raises(InvalidInputError):
        load_config(bad)


def write_toml(path, text):
    path.write_text(text)
    return str(path)


def test_cli_solve(tmp_path, capsys):
    cfg = write_toml(tmp_path / "one.toml", "[system]\nm = 2\n[solver]\nmax_outer = 30\n")
    out = tmp_path / "r.json"
    assert cli.main(["solve", cfg, "--output", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["scheme"] == "bcd_mm" and len(rep["phases"]) == 2
    assert rep["converged_sr"] == rep["sr_trace"][-1]


def test_cli_sweep_and_convergence(tmp_path):
    cfg = write_toml(tmp_path / "sw.toml",
                     '[sweep]\nvariable = "power_dbm"\nvalues = [5.0]\nrealizations = 1\n'
                     'schemes = ["bcd_mm", "no_irs"]\n[system]\nm = 2\n[solver]\nmax_outer = 20\n')
    out = tmp_path / "sw.csv"
    assert cli.main(["sweep", cfg, "-o", str(out)]) == 0
    assert len(read_rows(out)) == 2
    conv = tmp_path / "conv.csv"
    assert cli.main(["convergence", cfg, "-o", str(conv), "--schemes", "bcd_mm"]) == 0
    rows = read_rows(conv)
    assert rows[0]["iteration"] == "0"
    sr = [float(r["sr_bps_hz"]) for r in rows]
    assert np.all(np.diff(sr) >= -1e-8)


def test_cli_exit_codes(tmp_path, monkeypatch):
    bad = write_toml(tmp_path / "bad.toml", "[system]\nn_t = -1\n")
    assert cli.main(["solve", bad]) == 2
    assert cli.main(["solve", str(tmp_path / "nope.toml")]) == 2
    m3 = write_toml(tmp_path / "m3.toml", "[system]\nm = 3\n")
    assert cli.main(["solve", m3, "--scheme", "grid_oracle"]) == 2

    def boom(*a, **k):
        raise NumericalError("eigendecomposition failed")

    monkeypatch.setattr(cli, "run_scheme", boom)
    ok = write_toml(tmp_path / "ok.toml", "[system]\nm = 2\n")
    assert cli.main(["solve", ok]) == 3
