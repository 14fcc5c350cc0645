import math

import numpy as np
import pytest

from polbounds.errors import DegeneratePole, InvalidStokes
from polbounds.polcore import (ModalParams, Scenario, StokesVector, jacobian,
                               modal_from_stokes, sphere_grid,
                               stokes_from_modal, wrap_phase)

from conftest import random_interior_states

GENERAL = Scenario()
CONSTRAINED = Scenario(power_known=True)


def test_stokes_from_modal_pole():
    s = stokes_from_modal(ModalParams(1.0, 0.0, 0.7, 0.0))
    assert s.as_array() == pytest.approx([1.0, 1.0, 0.0, 0.0])


def test_stokes_from_modal_diagonal():
    s = stokes_from_modal(ModalParams(1.0, 1.0, 0.0, 0.0))
    assert s.as_array() == pytest.approx([2.0, 0.0, 2.0, 0.0])


def test_stokes_from_modal_circular():
    s = stokes_from_modal(ModalParams(1.0, 1.0, math.pi / 2, 0.0))
    assert s.as_array() == pytest.approx([2.0, 0.0, 0.0, 2.0], abs=1e-15)


def test_modal_from_stokes_examples():
    p = modal_from_stokes(StokesVector(2.0, 0.0, 2.0, 0.0))
    assert (p.a_h, p.a_v, p.phi_minus) == pytest.approx((1.0, 1.0, 0.0))
    assert not p.phase_degenerate

    p = modal_from_stokes(StokesVector(2.0, 0.0, 0.0, 2.0))
    assert (p.a_h, p.a_v, p.phi_minus) == pytest.approx((1.0, 1.0, math.pi / 2))


def test_modal_from_stokes_pole_flagged():
    p = modal_from_stokes(StokesVector(1.0, 1.0, 0.0, 0.0))
    assert (p.a_h, p.a_v, p.phi_minus) == pytest.approx((1.0, 0.0, 0.0))
    assert p.phase_degenerate


def test_invalid_stokes_rejected():
    with pytest.raises(InvalidStokes):
        StokesVector(1.0, 1.0, 1.0, 0.0).validate()
    with pytest.raises(InvalidStokes):
        StokesVector(-1.0, 0.0, 0.0, 1.0).validate()


def test_full_polarization_invariant_random():
    for p in random_interior_states(11, 1000):
        s = stokes_from_modal(p)
        lhs = s.s0 ** 2
        rhs = s.s1 ** 2 + s.s2 ** 2 + s.s3 ** 2
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, lhs)


def test_round_trip_modal_stokes_modal():
    for p in random_interior_states(12, 300, amp_range=(2e-3, 2.0)):
        if min(p.a_h, p.a_v) <= 1e-3:
            continue
        q = modal_from_stokes(stokes_from_modal(p))
        assert q.a_h == pytest.approx(p.a_h, rel=1e-9)
        assert q.a_v == pytest.approx(p.a_v, rel=1e-9)
        assert q.phi_minus == pytest.approx(p.phi_minus, rel=1e-9, abs=1e-9)


def test_phi_plus_never_enters():
    for delta in (0.3, -2.0, 11.0):
        a = stokes_from_modal(ModalParams(0.8, 1.3, 0.4, 0.0)).as_array()
        b = stokes_from_modal(ModalParams(0.8, 1.3, 0.4, delta)).as_array()
        assert np.array_equal(a, b)


def _fd_jacobian(p, scenario, step=1e-6):
    """Central finite differences of the modal -> Stokes map."""
    if scenario.power_known:
        s0 = p.s0

        def f(x):
            ah, phi = x
            return stokes_from_modal(
                ModalParams(ah, math.sqrt(s0 - ah * ah), phi)).as_array()[1:]

        x0 = np.array([p.a_h, p.phi_minus])
    else:
        def f(x):
            return stokes_from_modal(ModalParams(*x)).as_array()[1:]

        x0 = np.array([p.a_h, p.a_v, p.phi_minus])
    cols = []
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = step
        cols.append((f(x0 + e) - f(x0 - e)) / (2 * step))
    return np.column_stack(cols)


# expected value frozen from the finite-difference oracle at (1, 1, 0)
def test_jacobian_general_example():
    j = jacobian(ModalParams(1.0, 1.0, 0.0), GENERAL)
    expected = 2.0 * np.array([[1.0, -1.0, 0.0],
                               [1.0, 1.0, 0.0],
                               [0.0, 0.0, 1.0]])
    assert j == pytest.approx(expected)
    fd = _fd_jacobian(ModalParams(1.0, 1.0, 0.0), GENERAL)
    assert j == pytest.approx(fd, abs=1e-6)


def test_jacobian_constrained_balanced_column():
    s0 = 2.0
    p = ModalParams(math.sqrt(s0 / 2), math.sqrt(s0 / 2), 0.0)
    j = jacobian(p, CONSTRAINED)
    # S0 - 2 a_h^2 = 0 kills the S2/S3 amplitude sensitivity
    assert j[:, 0] == pytest.approx([2.0 * math.sqrt(2.0 * s0), 0.0, 0.0])


@pytest.mark.parametrize("scenario", [GENERAL, CONSTRAINED])
def test_jacobian_matches_finite_differences(scenario):
    for p in random_interior_states(13, 100):
        assert jacobian(p, scenario) == pytest.approx(
            _fd_jacobian(p, scenario), abs=1e-5)


def test_jacobian_constrained_pole_raises():
    with pytest.raises(DegeneratePole):
        jacobian(ModalParams(1.0, 0.0, 0.0), CONSTRAINED)


def test_sphere_grid_counts_and_invariant():
    pts = sphere_grid(2, 4, 1.0)
    assert len(pts) == 8
    assert all(pt.s0 == 1.0 for pt in pts)
    for pt in sphere_grid(5, 6, 3.0):
        pt.validate()
    assert len(sphere_grid(64, 128, 3.0)) == 8192


def test_wrap_phase():
    assert wrap_phase(math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(3 * math.pi + 0.1) == pytest.approx(-math.pi + 0.1)
