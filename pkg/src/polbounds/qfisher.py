"""Closed-form quantum Fisher information and the associated precision bound.

The two-mode coherent state is pure when the global phase is known and a
Poisson mixture of fixed-total-photon-number states when it is averaged
away.  In both cases the quantum Fisher information matrix in the modal
parametrization is diagonal:

    phase known,   general:      diag(4, 4, S0)            over (a_h, a_v, phi-)
    phase averaged, general:     diag(4, 4, 4 a_h^2 a_v^2 / S0)
    phase known,   power-known:  diag(8 S0/(S0 - S1), S0)  over (a_h, phi-)
    phase averaged, power-known: diag(8 S0/(S0 - S1), S0 - S1^2/S0)

The matrix inverse bound Tr(J Q^-1 Jt) then reduces to the direction
closed forms 3*S0, 3*S0 - S1^2/S0, 2*S0 and 2*S0 - S1^2/S0 respectively.
The symmetric-logarithmic-derivative operators for the relative phase and
either amplitude do not commute on the state anywhere except the vacuum, so
this bound is not attainable; it is still the natural factor-of-two
reference for the attainable one.  An independent truncated-Fock check of
every entry lives in :mod:`polbounds.fockoracle`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePole, SingularQfi
from .polcore import Scenario, jacobian, stokes_from_modal

SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class QfiMatrix:
    """Quantum Fisher information over the estimated modal parameters."""

    entries: np.ndarray
    param_labels: tuple
    scenario: Scenario


def qfi_matrix(p, scenario):
    """Closed-form quantum Fisher information matrix at ``p``."""
    ah, av = p.a_h, p.a_v
    s0 = p.s0
    if not scenario.power_known:
        phi_block = s0 if scenario.phase_known else 4.0 * ah * ah * av * av / s0
        return QfiMatrix(np.diag([4.0, 4.0, phi_block]),
                         ("a_h", "a_v", "phi_minus"), scenario)
    s1 = ah * ah - av * av
    if s0 - abs(s1) < SINGULAR_TOL * s0:
        raise DegeneratePole(
            "power-known information diverges/degenerates at S1 = +/- S0")
    amp_block = 8.0 * s0 / (s0 - s1)
    phi_block = s0 if scenario.phase_known else s0 - s1 * s1 / s0
    return QfiMatrix(np.diag([amp_block, phi_block]),
                     ("a_h", "phi_minus"), scenario)


def qcrb_cost(p, scenario):
    """Quantum Cramer-Rao bound on the summed Stokes mean-square errors.

    Computed as Tr(J Q^-1 Jt) with J from :func:`polbounds.polcore.jacobian`;
    equal to the direction closed forms (see :func:`qcrb_closed_form`).
    """
    q = qfi_matrix(p, scenario)
    diag = np.diag(q.entries)
    if np.any(diag < SINGULAR_TOL * max(p.s0, 1.0)):
        raise SingularQfi(
            f"information matrix singular on {q.param_labels}: diag={diag}")
    j = jacobian(p, scenario)
    return float(np.trace(j @ np.diag(1.0 / diag) @ j.T))


def qcrb_closed_form(s, scenario):
    """Direction closed form of the bound, valid including the poles."""
    if scenario.phase_known:
        base = 2.0 if scenario.power_known else 3.0
        return base * s.s0 - s.s1 ** 2 / s.s0
    return (2.0 if scenario.power_known else 3.0) * s.s0


def sld_commutator_expectations(p, scenario):
    """State expectations of the two nontrivial SLD commutators.

    Returns (<[L_phi, L_ah]>, <[L_phi, L_av]>); every other pair commutes on
    the state.  For a pure state this is 8i Im<d_phi psi|d_j psi>, giving
    (-4i a_h, +4i a_v) with the phase known and (-8i a_h a_v^2/S0,
    +8i a_v a_h^2/S0) after phase averaging; both checked against explicit
    truncated-space logarithmic derivatives in the fockoracle module.
    Nonzero values mean the quantum Cramer-Rao bound cannot be attained;
    both vanish only at the vacuum, and at the poles the relative phase
    drops out of the model so the remaining amplitude SLDs commute.
    """
    ah, av = p.a_h, p.a_v
    if scenario.phase_known:
        return (-4j * ah, 4j * av)
    s0 = p.s0
    if s0 == 0.0:
        return (0j, 0j)
    return (-8j * ah * av * av / s0, 8j * av * ah * ah / s0)


def qcrb_attainable(p, scenario, tol=1e-12):
    """Whether the quantum bound coincides with the attainable one at ``p``.

    True exactly when the relative phase is unobservable (a pole or the
    vacuum), where the commutator obstructions drop out of the model.
    """
    s = stokes_from_modal(p)
    return s.s0 - abs(s.s1) <= tol * max(s.s0, 1.0)
