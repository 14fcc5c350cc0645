"""Parametrizations of fully polarized two-mode coherent light.

The state is described either by modal parameters (amplitude moduli of the
horizontal/vertical modes plus relative and global phases) or by the Stokes
vector (S0, S1, S2, S3) of classical polarimetry.  For fully polarized light

    S0 = a_h^2 + a_v^2,   S1 = a_h^2 - a_v^2,
    S2 = 2 a_h a_v cos(phi_minus),   S3 = 2 a_h a_v sin(phi_minus),

so S0^2 = S1^2 + S2^2 + S3^2 and the global phase never enters.  This module
provides the conversions both ways and the Jacobians used to restate every
precision bound in Stokes coordinates.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePole, InvalidStokes

POLARIZATION_TOL = 1e-9
POLE_TOL = 1e-12


def wrap_phase(phi):
    """Wrap an angle into (-pi, pi]."""
    w = math.remainder(phi, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@dataclass(frozen=True)
class ModalParams:
    """Modal description (|alpha_H|, |alpha_V|, phi_minus, phi_plus).

    Phases are stored wrapped into (-pi, pi].  ``phase_degenerate`` marks
    parameters recovered at a pole of the Poincare sphere, where phi_minus
    is unobservable and returned as 0 by convention.
    """

    a_h: float
    a_v: float
    phi_minus: float = 0.0
    phi_plus: float = 0.0
    phase_degenerate: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.a_h < 0 or self.a_v < 0:
            raise ValueError(f"amplitude moduli must be nonnegative, got "
                             f"({self.a_h}, {self.a_v})")
        object.__setattr__(self, "phi_minus", wrap_phase(self.phi_minus))
        object.__setattr__(self, "phi_plus", wrap_phase(self.phi_plus))

    @property
    def s0(self):
        return self.a_h ** 2 + self.a_v ** 2


@dataclass(frozen=True)
class StokesVector:
    """Stokes vector of fully polarized light, in photon-number units.

    Construction does not validate; call :meth:`validate` at trust
    boundaries.  Estimators are allowed to return raw vectors that violate
    the full-polarization identity.
    """

    s0: float
    s1: float
    s2: float
    s3: float

    def as_array(self):
        return np.array([self.s0, self.s1, self.s2, self.s3], dtype=float)

    def validate(self, tol=POLARIZATION_TOL):
        """Raise InvalidStokes unless s0 >= 0 and s0^2 = s1^2+s2^2+s3^2."""
        if not np.isfinite(self.as_array()).all():
            raise InvalidStokes(f"non-finite Stokes vector {self}")
        if self.s0 < 0:
            raise InvalidStokes(f"s0 must be nonnegative, got {self.s0}")
        gap = abs(self.s0 ** 2 - (self.s1 ** 2 + self.s2 ** 2 + self.s3 ** 2))
        if gap > tol * max(1.0, self.s0 ** 2):
            raise InvalidStokes(
                f"not fully polarized: |s0^2 - |s|^2| = {gap:.3e} "
                f"exceeds {tol:.1e} * max(1, s0^2)")
        return self


@dataclass(frozen=True)
class Scenario:
    """Which pieces of prior knowledge the receiver holds.

    power_known: total power S0 is fixed a priori, leaving two parameters.
    phase_known: the global phase is prior knowledge instead of a nuisance
    parameter averaged away.
    """

    power_known: bool = False
    phase_known: bool = False

    @property
    def n_params(self):
        return 2 if self.power_known else 3

    @property
    def label(self):
        power = "power-known" if self.power_known else "general"
        phase = "phase-known" if self.phase_known else "phase-averaged"
        return f"{power}/{phase}"


def stokes_from_modal(p):
    """Stokes vector of the modal state; independent of the global phase."""
    s0 = p.a_h ** 2 + p.a_v ** 2
    s1 = p.a_h ** 2 - p.a_v ** 2
    s2 = 2.0 * p.a_h * p.a_v * math.cos(p.phi_minus)
    s3 = 2.0 * p.a_h * p.a_v * math.sin(p.phi_minus)
    return StokesVector(s0, s1, s2, s3)


def modal_from_stokes(s):
    """Invert the modal -> Stokes map (global phase set to 0).

    At a pole (s0 - |s1| below POLE_TOL * s0) the relative phase is
    undefined; it is returned as 0 with ``phase_degenerate=True``.
    """
    s.validate()
    a_h = math.sqrt(max((s.s0 + s.s1) / 2.0, 0.0))
    a_v = math.sqrt(max((s.s0 - s.s1) / 2.0, 0.0))
    if s.s0 - abs(s.s1) < POLE_TOL * s.s0:
        return ModalParams(a_h, a_v, 0.0, 0.0, phase_degenerate=True)
    return ModalParams(a_h, a_v, math.atan2(s.s3, s.s2), 0.0)


def jacobian(p, scenario):
    """Jacobian of the modal -> Stokes map at ``p``.

    Rows are ordered (S1, S2, S3).  Columns are (a_h, a_v, phi_minus) in the
    general scenario and (a_h, phi_minus) with a_v eliminated through the
    fixed total power in the power-known scenario.
    """
    ah, av, phi = p.a_h, p.a_v, p.phi_minus
    c, s = math.cos(phi), math.sin(phi)
    if not scenario.power_known:
        return np.array([
            [2.0 * ah, -2.0 * av, 0.0],
            [2.0 * av * c, 2.0 * ah * c, -2.0 * ah * av * s],
            [2.0 * av * s, 2.0 * ah * s, 2.0 * ah * av * c],
        ])
    if ah <= 0.0 or av <= 0.0:
        raise DegeneratePole(
            "power-constrained Jacobian is degenerate at a pole")
    s0 = ah * ah + av * av
    d = s0 - 2.0 * ah * ah
    return np.array([
        [4.0 * ah, 0.0],
        [2.0 * d * c / av, -2.0 * ah * av * s],
        [2.0 * d * s / av, 2.0 * ah * av * c],
    ])


def grid_angles(n_theta, n_phi):
    """Inclination/azimuth grids used by sphere scans.

    Inclination is measured from the S1 axis and sampled at cell centers so
    the degenerate poles are never hit; azimuth starts at 0.
    """
    if n_theta < 2 or n_phi < 2:
        raise ValueError("grid must be at least 2x2")
    thetas = (np.arange(n_theta) + 0.5) * math.pi / n_theta
    phis = np.arange(n_phi) * 2.0 * math.pi / n_phi
    return thetas, phis


def stokes_on_sphere(theta, phi, s0=1.0):
    """Stokes vector at inclination ``theta`` from S1 and azimuth ``phi``."""
    return StokesVector(
        s0,
        s0 * math.cos(theta),
        s0 * math.sin(theta) * math.cos(phi),
        s0 * math.sin(theta) * math.sin(phi),
    )


def sphere_grid(n_theta, n_phi, s0=1.0):
    """Uniform inclination x azimuth grid on the Poincare sphere.

    Returns ``n_theta * n_phi`` Stokes vectors in theta-major order.
    """
    thetas, phis = grid_angles(n_theta, n_phi)
    return [stokes_on_sphere(t, f, s0) for t in thetas for f in phis]
