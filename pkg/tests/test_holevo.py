import math

import numpy as np
import pytest

from polbounds import fockoracle
from polbounds.errors import BadArity, DegeneratePole
from polbounds.holevo import (XSet, assemble_x, build_basis,
                              hcrb_stokes_grid, holevo_cost,
                              reparametrized_z, trace_norm_antisym, z_matrix)
from polbounds.polcore import (ModalParams, Scenario, modal_from_stokes,
                               sphere_grid, stokes_from_modal,
                               stokes_on_sphere)
from polbounds.qfisher import qcrb_cost

from conftest import random_interior_states, random_interior_states_s0

AVG = Scenario()
AVG_POW = Scenario(power_known=True)
KNOWN = Scenario(phase_known=True)
KNOWN_POW = Scenario(power_known=True, phase_known=True)


# ---------------------------------------------------------------------------
# span basis


def test_phase_sum_coefficient_on_first_derivative():
    basis = build_basis(ModalParams(1.0, 1.0, 0.4), AVG)
    assert basis.deriv_coeffs["phi_plus"][1] == pytest.approx(0.5j)


def test_basis_gram_identity_fock_oracle():
    for scenario in (AVG, AVG_POW):
        for p in random_interior_states(21, 6, amp_range=(0.4, 1.3)):
            vecs = fockoracle.span_basis_vectors(p, scenario)
            gram = vecs.conj() @ vecs.T
            assert gram == pytest.approx(np.eye(3), abs=1e-10)


def test_basis_expansion_matches_fock_oracle():
    # the stored coefficients must reproduce the actual phase derivatives
    for scenario in (AVG, AVG_POW):
        for p in random_interior_states(22, 4, amp_range=(0.4, 1.3)):
            basis = build_basis(p, scenario)
            vecs = fockoracle.span_basis_vectors(p, scenario)
            for which in ("phi_minus", "phi_plus"):
                truth = fockoracle.phase_derivative_vector(p, which)
                recon = basis.deriv_coeffs[which] @ vecs
                assert recon == pytest.approx(truth, abs=1e-9)


def test_constrained_gamma_zero_is_regular():
    s0 = 2.0
    p = ModalParams(math.sqrt(s0 / 2), math.sqrt(s0 / 2), 0.3)
    basis = build_basis(p, AVG_POW)
    assert basis.gamma == pytest.approx(0.0)
    vecs = fockoracle.span_basis_vectors(p, AVG_POW)
    gram = vecs.conj() @ vecs.T
    assert gram == pytest.approx(np.eye(3), abs=1e-10)


def test_build_basis_pole_raises():
    with pytest.raises(DegeneratePole):
        build_basis(ModalParams(1.0, 1e-8, 0.0), AVG)
    with pytest.raises(DegeneratePole):
        build_basis(ModalParams(1.0, 1e-4, 0.0), AVG_POW)


# ---------------------------------------------------------------------------
# X sets and constraints


def test_x_amplitude_matrix_phase_unknown():
    x = assemble_x(ModalParams(1.0, 1.0, 0.2), AVG)
    expected = np.array([[0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert x.matrices[0] == pytest.approx(expected)


def test_x_phase_matrix_entries():
    x = assemble_x(ModalParams(1.0, 2.0, -0.5), AVG)
    assert x.matrices[2][0, 1] == pytest.approx(-0.5j)
    assert x.matrices[2][0, 2] == pytest.approx(0.25j)


def test_x_constrained_free_imaginary_entry():
    p = ModalParams(1.0, 1.0, 0.1)
    x = assemble_x(p, KNOWN_POW, (0.0, -0.3, 0.0, 0.0))
    assert x.matrices[0][0, 2] == pytest.approx(-0.3j)


def test_assemble_x_bad_arity():
    p = ModalParams(1.0, 0.8, 0.1)
    with pytest.raises(BadArity):
        assemble_x(p, AVG, (0.1,))
    with pytest.raises(BadArity):
        assemble_x(p, KNOWN, (0.1, 0.2))
    with pytest.raises(BadArity):
        assemble_x(p, KNOWN_POW, (0.1, 0.2))


def _constraint_residuals(x_set):
    """Residuals of the unbiasedness (and nuisance) constraints."""
    basis = build_basis(x_set.params, x_set.scenario)
    est = [k for k in basis.deriv_coeffs if k != "phi_plus"]
    res = []
    for k, mat in enumerate(x_set.matrices):
        res.append(abs(mat[0, 0]))
        for j, name in enumerate(est):
            d = basis.deriv_coeffs[name]
            val = 2.0 * np.real(mat[0] @ d)
            res.append(abs(val - (1.0 if j == k else 0.0)))
        if not x_set.scenario.phase_known:
            d = basis.deriv_coeffs["phi_plus"]
            res.append(abs(2.0 * np.real(mat[0] @ d)))
    return max(res)


def test_constraint_residuals_random():
    rng = np.random.default_rng(23)
    states = random_interior_states(24, 50)
    for p in states:
        for scenario in (AVG, KNOWN):
            free = () if not scenario.phase_known else tuple(rng.uniform(-1, 1, 3))
            assert _constraint_residuals(assemble_x(p, scenario, free)) < 1e-10
    for s0 in (0.7, 2.0):
        for p in random_interior_states_s0(25, 25, s0):
            assert _constraint_residuals(assemble_x(p, AVG_POW)) < 1e-10
            free = tuple(rng.uniform(-1, 1, 4))
            assert _constraint_residuals(
                assemble_x(p, KNOWN_POW, free)) < 1e-10


# ---------------------------------------------------------------------------
# Z matrix and trace norm


def test_z_matrix_balanced_point():
    z = z_matrix(assemble_x(ModalParams(1.0, 1.0, 0.9), AVG))
    expected = 0.25 * np.array([[1.0, 0.0, 1j],
                                [0.0, 1.0, -1j],
                                [-1j, 1j, 2.0]])
    assert z == pytest.approx(expected)


def test_z_matrix_zero_x_and_brute_force():
    p = ModalParams(0.9, 1.4, -0.7)
    x = assemble_x(p, KNOWN, (0.2, -0.4, 0.6))
    z = z_matrix(x)
    # brute force <psi|X_j X_k|psi> with full matrix products, state = e0
    e0 = np.zeros(3)
    e0[0] = 1.0
    brute = np.array([[e0 @ (a @ (b @ e0)) for b in x.matrices]
                      for a in x.matrices])
    assert z == pytest.approx(brute, abs=1e-14)

    zero = z_matrix(XSet((np.zeros((3, 3), complex),) * 3, (), KNOWN, p))
    assert zero == pytest.approx(np.zeros((3, 3)))


def test_z_matrix_psd_random():
    rng = np.random.default_rng(26)
    for p in random_interior_states(27, 100):
        free = tuple(rng.uniform(-2, 2, 3))
        z = z_matrix(assemble_x(p, KNOWN, free))
        assert np.linalg.eigvalsh(z).min() >= -1e-10
    for p in random_interior_states_s0(28, 100, 1.5):
        free = tuple(rng.uniform(-2, 2, 4))
        z = z_matrix(assemble_x(p, KNOWN_POW, free))
        assert np.linalg.eigvalsh(z).min() >= -1e-10


def test_trace_norm_antisym():
    assert trace_norm_antisym(np.zeros((3, 3))) == 0.0
    a = 1.7
    assert trace_norm_antisym(np.array([[0.0, a], [-a, 0.0]])) == \
        pytest.approx(2 * abs(a))
    with pytest.raises(ValueError):
        trace_norm_antisym(np.eye(2))


def test_trace_norm_of_reparametrized_imag_equal_coords():
    s0 = 3.0
    s = stokes_on_sphere(math.acos(1 / math.sqrt(3)), math.pi / 4, s0)
    p = modal_from_stokes(s)
    v = reparametrized_z(p, AVG)
    # oracle: explicit singular values of the antisymmetric imaginary part
    sv = np.linalg.svd(v.imag, compute_uv=False)
    assert sv == pytest.approx([s0, s0, 0.0], abs=1e-9)
    assert trace_norm_antisym(v.imag) == pytest.approx(2 * s0, rel=1e-12)


# ---------------------------------------------------------------------------
# reparametrized Z


def test_reparametrized_z_pattern_phase_unknown():
    for p in random_interior_states(29, 20):
        s = stokes_from_modal(p)
        v = reparametrized_z(p, AVG)
        expected = np.array([
            [s.s0, -1j * s.s3, 1j * s.s2],
            [1j * s.s3, s.s0, -1j * s.s1],
            [-1j * s.s2, 1j * s.s1, s.s0],
        ])
        assert v == pytest.approx(expected, abs=1e-9)
        assert np.trace(v).real == pytest.approx(3 * s.s0, rel=1e-12)


def test_z_diagonal_modal_costs():
    p = ModalParams(0.8, 1.1, 0.3)
    z = z_matrix(assemble_x(p, AVG))
    want = [0.25, 0.25, 0.25 * (1 / p.a_h ** 2 + 1 / p.a_v ** 2)]
    assert np.diag(z).real == pytest.approx(want)


# ---------------------------------------------------------------------------
# minimized costs


def test_cost_phase_unknown_general_is_5s0():
    for p in random_interior_states(30, 100):
        res = holevo_cost(p, AVG)
        assert res.cost_stokes == pytest.approx(5 * p.s0, rel=1e-9)


def test_cost_phase_unknown_constrained_is_4s0():
    for s0 in (0.5, 1.0, 3.0):
        for p in random_interior_states_s0(31, 30, s0):
            res = holevo_cost(p, AVG_POW)
            assert res.cost_stokes == pytest.approx(4 * s0, rel=1e-9)


def test_cost_phase_known_equator_is_5s0():
    p = ModalParams(1.2, 1.2, -0.8)
    res = holevo_cost(p, KNOWN)
    assert res.cost_stokes == pytest.approx(5 * p.s0, rel=1e-6)


def test_cost_phase_known_pole_approach_is_linear():
    # the bound approaches its pole value 2 S0 linearly: 2 S0 + 4 a_h a_v
    for av in (1e-2, 1e-3):
        p = ModalParams(1.0, av, 0.3)
        res = holevo_cost(p, KNOWN)
        excess = res.cost_stokes - 2 * p.s0
        assert excess == pytest.approx(4 * p.a_h * p.a_v, rel=2e-2)


def test_cost_phase_known_range_and_ordering():
    for p in random_interior_states(32, 25):
        s0 = p.s0
        c = holevo_cost(p, KNOWN).cost_stokes
        assert 2 * s0 - 1e-9 <= c <= 5 * s0 + 1e-9
        q = qcrb_cost(p, KNOWN)
        assert q - 1e-9 <= c <= 2 * q + 1e-9


def test_cost_phase_known_constrained_range():
    s0 = 2.0
    # le 4 S0 everywhere; ranges match the power-known improvement
    for p in random_interior_states_s0(33, 25, s0):
        c = holevo_cost(p, KNOWN_POW).cost_stokes
        assert s0 - 1e-9 <= c <= 4 * s0 + 1e-9
        q = qcrb_cost(p, KNOWN_POW)
        assert q - 1e-9 <= c <= 2 * q + 1e-9
    # near-equator: approaches 4 S0; near-pole: approaches S0
    p_eq = ModalParams(math.sqrt(s0 / 2), math.sqrt(s0 / 2), 0.4)
    assert holevo_cost(p_eq, KNOWN_POW).cost_stokes == \
        pytest.approx(4 * s0, rel=1e-6)
    ah = math.sqrt(0.999 * s0)
    p_pole = ModalParams(ah, math.sqrt(s0 - ah * ah), 0.4)
    assert holevo_cost(p_pole, KNOWN_POW).cost_stokes == \
        pytest.approx(s0, rel=5e-3)


def test_azimuthal_symmetry_phase_known():
    theta = 1.0
    costs = [hcrb_stokes_grid([stokes_on_sphere(theta, f, 2.0)], KNOWN)[0]
             for f in (0.0, 0.7, 2.0, -2.5)]
    assert max(costs) - min(costs) <= 1e-6 * max(costs)


def test_grid_matches_scalar_path():
    pts = sphere_grid(3, 4, 1.3)
    for scenario in (KNOWN, KNOWN_POW, AVG, AVG_POW):
        grid = hcrb_stokes_grid(pts, scenario)
        for val, pt in zip(grid, pts):
            res = holevo_cost(modal_from_stokes(pt), scenario)
            assert val == pytest.approx(res.cost_stokes, rel=1e-8)


def test_holevo_cost_pole_refusal():
    with pytest.raises(DegeneratePole):
        holevo_cost(ModalParams(1.0, 1e-7, 0.0), AVG)


def test_result_fields():
    p = ModalParams(1.0, 0.7, 0.2)
    res = holevo_cost(p, AVG)
    assert res.optimal_free_params == ()
    assert res.z_matrix.shape == (3, 3)
    assert res.cost_modal > 0
    res_k = holevo_cost(p, KNOWN)
    assert len(res_k.optimal_free_params) == 3
    res_kp = holevo_cost(ModalParams(1.0, 0.7, 0.2), KNOWN_POW)
    assert len(res_kp.optimal_free_params) == 4
