import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from helpers import random_instance
from irs_secrecy.errors import InvalidInputError
from irs_secrecy.model import PhaseProfile, effective_channels
from irs_secrecy.phase_mm import (PhaseQuadratic, build_phase_quadratic, mm_phase_step,
                                  optimize_phases, surrogate_vector)
from irs_secrecy.reformulation import AuxiliarySet, update_auxiliaries
from oracles import cn, g0_direct, grid_min_scalar, random_unit


def random_quadratic(rng, m):
    a = cn(rng, m, m)
    return PhaseQuadratic(a @ a.conj().T, cn(rng, m), 0.0)


def test_zero_aux_gives_zero_quadratic():
    rng = np.random.default_rng(0)
    cfg, ch, design = random_instance(rng)
    q = build_phase_quadratic(cfg, ch, design, AuxiliarySet.zeros(cfg))
    assert np.all(q.xi == 0) and np.all(q.d_vec == 0)


@pytest.mark.parametrize("amplitude", [1.0, 0.4])
def test_quadratic_matches_direct_objective(amplitude):
    rng = np.random.default_rng(1)
    cfg, ch, design = random_instance(rng, amplitude=amplitude)
    aux = update_auxiliaries(cfg, ch, design)
    q = build_phase_quadratic(cfg, ch, design, aux)
    for _ in range(20):
        phi = random_unit(rng, cfg.m)
        ph = PhaseProfile(np.angle(phi), amplitude)
        h_i, h_e = effective_channels(cfg, ch, ph)
        ref = g0_direct(cfg, h_i, h_e, design.v, design.v_e, aux)
        assert abs(q.total(phi) - ref) <= 1e-8 * max(1.0, abs(ref))


def test_single_element_quadratic_is_nonnegative_scalar():
    rng = np.random.default_rng(2)
    cfg, ch, design = random_instance(rng, m=1)
    aux = update_auxiliaries(cfg, ch, design)
    q = build_phase_quadratic(cfg, ch, design, aux)
    assert q.xi.shape == (1, 1) and q.xi[0, 0].imag == 0 and q.xi[0, 0].real >= 0


def test_trace_orderings_agree():
    rng = np.random.default_rng(3)
    m = 5
    b, c = cn(rng, m, m), cn(rng, m, m)
    b, c = b @ b.conj().T, c @ c.conj().T
    phi = np.diag(random_unit(rng, m))
    t1 = np.trace(phi.conj().T @ b @ phi @ c)
    t2 = np.trace(phi @ c @ phi.conj().T @ b)
    assert abs(t1 - t2) <= 1e-10 * abs(t1)


def test_linear_only_step():
    q = PhaseQuadratic(np.zeros((2, 2), complex), np.array([1.0, 1j]), 0.0)
    nxt = mm_phase_step(q, np.ones(2, complex))
    assert_allclose(nxt, [-1.0, 1j], atol=1e-15)
    assert_allclose(q.value(nxt), -4.0)


def test_fixed_point_is_kept():
    rng = np.random.default_rng(4)
    q = random_quadratic(rng, 6)
    phi, _ = optimize_phases(q, random_unit(rng, 6), tol=1e-15, max_iter=5000)
    nxt = mm_phase_step(q, phi)
    assert np.max(np.abs(nxt - phi)) <= 1e-6


def test_non_unit_input_rejected():
    q = PhaseQuadratic(np.eye(2, dtype=complex), np.zeros(2, complex), 0.0)
    with pytest.raises(InvalidInputError):
        mm_phase_step(q, np.array([1.0, 0.5]))


def test_single_element_matches_grid():
    rng = np.random.default_rng(5)
    for _ in range(10):
        q = PhaseQuadratic(np.array([[abs(rng.normal())]], complex), cn(rng, 1), 0.0)
        phi, _ = optimize_phases(q, random_unit(rng, 1))
        ref, _ = grid_min_scalar(q.xi[0, 0], q.d_vec[0])
        assert q.value(phi) <= ref + 1e-5


def test_optimize_examples():
    q = PhaseQuadratic(np.zeros((3, 3), complex), np.array([1.0, -2j, 0.5 + 0.5j]), 0.0)
    phi, trace = optimize_phases(q, np.ones(3, complex))
    assert len(trace) <= 3
    assert_allclose(q.value(phi), -2 * np.sum(np.abs(q.d_vec)))
    q = PhaseQuadratic(np.eye(4, dtype=complex), np.zeros(4, complex), 0.0)
    phi0 = random_unit(np.random.default_rng(6), 4)
    phi, trace = optimize_phases(q, phi0)
    assert_allclose(phi, phi0)
    assert_allclose(trace[0], 4.0)


def test_random_run_monotone_and_unit():
    rng = np.random.default_rng(7)
    cfg, ch, design = random_instance(rng, m=8)
    aux = update_auxiliaries(cfg, ch, design)
    q = build_phase_quadratic(cfg, ch, design, aux)
    phi, trace = optimize_phases(q, design.phase.unit)
    assert np.all(np.diff(trace) <= 0)
    assert np.max(np.abs(np.abs(phi) - 1)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 12))
def test_minorization(seed, m):
    rng = np.random.default_rng(seed)
    q = random_quadratic(rng, m)
    phi_t = random_unit(rng, m)
    vec, c_q = surrogate_vector(q, phi_t)
    assert abs(2 * np.real(np.vdot(phi_t, vec)) - c_q + q.value(phi_t)) <= 1e-9 * max(1, abs(c_q))
    for _ in range(10):
        phi = random_unit(rng, m)
        assert 2 * np.real(np.vdot(phi, vec)) - c_q <= -q.value(phi) + 1e-9 * max(1, abs(c_q))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.sampled_from([1, 2, 8]))
def test_xi_hermitian_psd_and_real_objective(seed, m):
    rng = np.random.default_rng(seed)
    cfg, ch, design = random_instance(rng, m=m)
    aux = update_auxiliaries(cfg, ch, design)
    q = build_phase_quadratic(cfg, ch, design, aux)
    w = np.linalg.eigvalsh(q.xi)
    assert w[0] >= -1e-9 * max(1.0, abs(w[-1]))
    phi = random_unit(rng, m)
    assert abs(np.imag(np.vdot(phi, q.xi @ phi))) <= 1e-10 * max(1.0, abs(w[-1]) * m)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_step_never_increases(seed):
    rng = np.random.default_rng(seed)
    q = random_quadratic(rng, 8)
    phi = random_unit(rng, 8)
    for _ in range(20):
        nxt = mm_phase_step(q, phi)
        assert q.value(nxt) <= q.value(phi) + 1e-10 * max(1.0, abs(q.value(phi)))
        phi = nxt
