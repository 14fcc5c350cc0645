"""Photon-counting receiver models and their classical precision bounds.

Two measurement layouts are modeled, both lossless and built from ideal
photon-number-resolving detectors:

* Stokes receiver: a three-way splitter feeding polarizing beam splitters in
  the H/V, diagonal and circular bases, six detectors total with amplitudes
  alpha_H/sqrt3, alpha_V/sqrt3, (alpha_H +/- alpha_V)/sqrt6 and
  (alpha_H +/- i alpha_V)/sqrt6.
* Tetrahedron receiver: a partially polarizing beam splitter sends
  (x alpha_H, y alpha_V) to a diagonal-basis analyzer and (y alpha_H,
  x alpha_V) through a quarter-wave plate to a circular-basis analyzer,
  four detectors with amplitudes (x aH +/- y aV)/sqrt2 and
  (y aH +/- i x aV)/sqrt2.  Losslessness fixes x^2 + y^2 = 1.

Every detector sees a coherent state, so its photon count is Poisson and
the per-arm Fisher information is (d mean/d theta)^2 / mean.  Where an arm
mean vanishes with a nonvanishing amplitude derivative the Poisson term has
a finite limit: with chi the limiting phase of the dying amplitude, the
effective mean gradient is 2 Re(conj(chi) d amp).  The limiting phase is
taken from the relative-phase derivative of the amplitude (which is nonzero
at every such zero away from the poles); at the poles the first nonzero
amplitude-gradient column is used instead, which reproduces the constant
closed-form H/V arm information.  Agreement with the closed-form Fisher
matrices defines correctness of these conventions.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularArm
from .optim import golden_min_batch
from .polcore import (ModalParams, Scenario, jacobian, modal_from_stokes,
                      stokes_from_modal)

MEAN_TOL = 1e-14
GRAD_TOL = 1e-7
SINGULAR_REL_TOL = 1e-12

STOKES_ARMS = ("H", "V", "+", "-", "R", "L")
TETRA_ARMS = ("+", "-", "R", "L")


@dataclass(frozen=True)
class ReceiverSpec:
    """Receiver topology; ``ppbs_x`` only applies to the tetrahedron kind."""

    kind: str
    ppbs_x: float | None = None

    def __post_init__(self):
        if self.kind not in ("stokes", "tetrahedron"):
            raise ValueError(f"unknown receiver kind {self.kind!r}")
        if self.kind == "tetrahedron":
            if self.ppbs_x is None or not 0.0 < self.ppbs_x < 1.0:
                raise ValueError("tetrahedron receiver needs ppbs_x in (0, 1)")
        elif self.ppbs_x is not None:
            raise ValueError("ppbs_x is meaningless for the stokes receiver")

    @property
    def arm_labels(self):
        return STOKES_ARMS if self.kind == "stokes" else TETRA_ARMS

    @property
    def n_arms(self):
        return len(self.arm_labels)


@dataclass(frozen=True)
class ArmMeans:
    """Per-detector mean photon numbers with their parameter gradients.

    ``amplitudes``/``amp_gradients`` carry the underlying coherent
    amplitudes so vanishing-mean arms can be handled by their finite limit;
    they may be None for synthetic inputs, in which case a vanishing mean
    with a non-negligible mean gradient is genuinely divergent.
    """

    means: np.ndarray
    gradients: np.ndarray
    param_labels: tuple
    scenario: Scenario
    amplitudes: np.ndarray | None = None
    amp_gradients: np.ndarray | None = None
    arm_labels: tuple = ()


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray
    param_labels: tuple
    scenario: Scenario


def _mode_amplitudes(ah, av, phi_minus, phi_plus=0.0):
    a_h = ah * np.exp(0.5j * (phi_plus + phi_minus))
    a_v = av * np.exp(0.5j * (phi_plus - phi_minus))
    return a_h, a_v


def _arm_amplitudes(ah, av, phi, spec):
    """Arm amplitudes and their (ah, av, phi-) gradients at a single point."""
    a_h, a_v = _mode_amplitudes(ah, av, phi)
    e_h = np.exp(0.5j * phi)
    e_v = np.exp(-0.5j * phi)
    dp_h = 0.5j * a_h
    dp_v = -0.5j * a_v
    if spec.kind == "stokes":
        r3, r6 = math.sqrt(3.0), math.sqrt(6.0)
        combos = [(1 / r3, 0), (0, 1 / r3), (1 / r6, 1 / r6),
                  (1 / r6, -1 / r6), (1 / r6, 1j / r6), (1 / r6, -1j / r6)]
    else:
        x = spec.ppbs_x
        y = math.sqrt(1.0 - x * x)
        r2 = math.sqrt(2.0)
        combos = [(x / r2, y / r2), (x / r2, -y / r2),
                  (y / r2, 1j * x / r2), (y / r2, -1j * x / r2)]
    amps = np.stack([u * a_h + v * a_v for u, v in combos], axis=-1)
    g_ah = np.stack([u * e_h for u, _ in combos], axis=-1)
    g_av = np.stack([v * e_v for _, v in combos], axis=-1)
    g_ph = np.stack([u * dp_h + v * dp_v for u, v in combos], axis=-1)
    return amps, np.stack([g_ah, g_av, g_ph], axis=-1)  # (..., arms, 3)


def _constrain_gradients(agrads, ah, av):
    """Chain rule eliminating a_v through the fixed total power."""
    g_c = agrads[..., 0] - (ah / av) * agrads[..., 1]
    return np.stack([g_c, agrads[..., 2]], axis=-1)


def arm_means(p, spec, scenario):
    """Detector means, gradients and amplitude data at modal point ``p``."""
    amps, agrads = _arm_amplitudes(p.a_h, p.a_v, p.phi_minus, spec)
    if scenario.power_known:
        agrads = _constrain_gradients(agrads, p.a_h, p.a_v)
        labels = ("a_h", "phi_minus")
    else:
        labels = ("a_h", "a_v", "phi_minus")
    means = np.abs(amps) ** 2
    grads = 2.0 * np.real(np.conj(amps)[..., None] * agrads)
    return ArmMeans(means, grads, labels, scenario,
                    amplitudes=amps, amp_gradients=agrads,
                    arm_labels=spec.arm_labels)


def _limit_gradient(amp_grad_row):
    """Effective mean gradient of a vanishing arm (see module docstring)."""
    d_phi = amp_grad_row[-1]
    if abs(d_phi) > 1e-12:
        chi = d_phi / abs(d_phi)
    else:
        k = int(np.argmax(np.abs(amp_grad_row)))
        if abs(amp_grad_row[k]) <= 1e-12:
            return np.zeros(len(amp_grad_row))
        chi = amp_grad_row[k] / abs(amp_grad_row[k])
    return 2.0 * np.real(np.conj(chi) * amp_grad_row)


def poisson_fisher(arms):
    """Fisher information of independent Poisson detectors.

    Sums (1/mean) grad x grad over arms.  Vanishing-mean arms contribute
    their finite limit when amplitude data is available, contribute zero
    when both the mean and its gradient vanish, and raise SingularArm when
    the mean vanishes under a non-negligible mean gradient with no
    amplitude data to resolve the limit.
    """
    k = arms.gradients.shape[-1]
    f = np.zeros((k, k))
    for a in range(arms.means.shape[-1]):
        mean = arms.means[a]
        grad = arms.gradients[a]
        if mean > MEAN_TOL:
            f += np.outer(grad, grad) / mean
        elif arms.amp_gradients is not None:
            g = _limit_gradient(arms.amp_gradients[a])
            f += np.outer(g, g)
        elif np.linalg.norm(grad) < GRAD_TOL:
            continue
        else:
            raise SingularArm(
                f"arm {a}: zero mean with gradient norm "
                f"{np.linalg.norm(grad):.2e} and no amplitude data")
    return FisherMatrix(f, arms.param_labels, arms.scenario)


def _cost_from_fisher(f, j):
    evals = np.linalg.eigvalsh(f)
    if evals[0] <= SINGULAR_REL_TOL * max(evals[-1], 1e-300):
        return math.inf
    return float(np.trace(j @ np.linalg.solve(f, j.T)))


def crb_cost(p, spec, scenario):
    """Cramer-Rao bound of the receiver in Stokes coordinates.

    Returns +inf when the Fisher matrix is singular (some parameter is
    unidentifiable by this receiver at this point, e.g. the relative phase
    at a pole).
    """
    f = poisson_fisher(arm_means(p, spec, scenario))
    return _cost_from_fisher(f.entries, jacobian(p, scenario))


def stokes_receiver_bound(s, scenario):
    """Direction closed form of the Stokes-receiver bound.

    General: 11/2 S0 - (9 / 2 S0) h with h the harmonic-type combination
    S1^2 S2^2 S3^2 / (S1^2 S2^2 + S2^2 S3^2 + S3^2 S1^2), which vanishes
    whenever a coordinate does.  Power-known: (9 / 2 S0) times the ratio of
    the pairwise-sum product to the pairwise product sum, +inf at the poles.
    """
    q = np.array([s.s1 ** 2, s.s2 ** 2, s.s3 ** 2])
    pair = q[0] * q[1] + q[1] * q[2] + q[2] * q[0]
    if not scenario.power_known:
        h = 0.0 if pair == 0.0 else q[0] * q[1] * q[2] / pair
        return 5.5 * s.s0 - 4.5 * h / s.s0
    if pair == 0.0:
        return math.inf
    num = (q[0] + q[1]) * (q[1] + q[2]) * (q[2] + q[0])
    return 4.5 / s.s0 * num / pair


def closed_form_stokes_fisher(p, scenario):
    """Appendix-style closed-form Fisher matrix of the Stokes receiver.

    The published power-known displays carry two typos (the H/V-arm entry
    is short one factor of S0 and the phase-phase entries show S0 - 2 a_h^2
    where S0 - a_h^2 belongs); the forms here are the corrected ones, which
    match the generic Poisson pipeline and reproduce the final direction
    closed forms.
    """
    ah, av, phi = p.a_h, p.a_v, p.phi_minus
    c, sn = math.cos(phi), math.sin(phi)
    s0 = ah * ah + av * av
    s2 = 2.0 * ah * av * c
    s3 = 2.0 * ah * av * sn
    if not scenario.power_known:
        f_hv = np.diag([4.0 / 3.0, 4.0 / 3.0, 0.0])

        def arm_pair(cc, ss, sign, den):
            m = np.empty((3, 3))
            m[0, 0] = s0 * ah ** 2 + av ** 2 * (av ** 2 - 3 * ah ** 2) * cc
            m[1, 1] = s0 * av ** 2 + ah ** 2 * (ah ** 2 - 3 * av ** 2) * cc
            m[2, 2] = ah ** 2 * av ** 2 * s0 * ss
            m[0, 1] = m[1, 0] = ah * av * s0 * ss
            m[0, 2] = m[2, 0] = sign * ah * av ** 2 * (ah ** 2 - av ** 2) * sn * c
            m[1, 2] = m[2, 1] = -sign * av * ah ** 2 * (ah ** 2 - av ** 2) * sn * c
            return (4.0 / 3.0) * m / den

        f_pm = arm_pair(c * c, sn * sn, +1.0, s0 ** 2 - s2 ** 2)
        f_rl = arm_pair(sn * sn, c * c, -1.0, s0 ** 2 - s3 ** 2)
        return FisherMatrix(f_hv + f_pm + f_rl,
                            ("a_h", "a_v", "phi_minus"), scenario)

    av2 = s0 - ah * ah
    d = s0 - 2.0 * ah * ah
    f_hv = np.array([[4.0 * s0 / (3.0 * av2), 0.0], [0.0, 0.0]])
    den_pm = s0 ** 2 - s2 ** 2
    f_pm = (4.0 / 3.0) * np.array([
        [s0 * d * d * c * c / (av2 * den_pm), -ah * s0 * d * sn * c / den_pm],
        [-ah * s0 * d * sn * c / den_pm, ah * ah * s0 * av2 * sn * sn / den_pm],
    ])
    den_rl = s0 ** 2 - s3 ** 2
    f_rl = (4.0 / 3.0) * np.array([
        [s0 * d * d * sn * sn / (av2 * den_rl), ah * s0 * d * sn * c / den_rl],
        [ah * s0 * d * sn * c / den_rl, ah * ah * s0 * av2 * c * c / den_rl],
    ])
    return FisherMatrix(f_hv + f_pm + f_rl, ("a_h", "phi_minus"), scenario)


# ---------------------------------------------------------------------------
# Batched evaluation over many states (sphere scans) and the tetrahedron
# transmissivity optimization.


def _fisher_batch(amps, agrads):
    """Fisher matrices for stacked problems, limit-handling vectorized.

    amps: (B, arms) complex; agrads: (B, arms, k) complex.
    """
    means = np.abs(amps) ** 2
    grads = 2.0 * np.real(np.conj(amps)[..., None] * agrads)
    dying = means <= MEAN_TOL
    if dying.any():
        d_phi = agrads[..., -1]
        ref = np.where(np.abs(d_phi) > 1e-12, d_phi, agrads[..., 0])
        absref = np.abs(ref)
        chi = np.where(absref > 1e-12, ref / np.where(absref > 0, absref, 1.0),
                       0.0)
        g_lim = 2.0 * np.real(np.conj(chi)[..., None] * agrads)
        grads = np.where(dying[..., None], g_lim, grads)
    w = np.where(dying, 1.0, 1.0 / np.where(dying, 1.0, means))
    return np.einsum("ba,baj,bak->bjk", w, grads, grads)


def _cost_batch(ah, av, phi, spec_kind, x, scenario):
    """Receiver bounds for stacked modal points; +inf where singular.

    ``x`` is a per-point PPBS transmissivity array (ignored for the stokes
    kind).
    """
    B = ah.size
    a_h, a_v = _mode_amplitudes(ah, av, phi)
    e_h, e_v = np.exp(0.5j * phi), np.exp(-0.5j * phi)
    dp_h, dp_v = 0.5j * a_h, -0.5j * a_v
    if spec_kind == "stokes":
        r3, r6 = math.sqrt(3.0), math.sqrt(6.0)
        u = np.array([1 / r3, 0, 1 / r6, 1 / r6, 1 / r6, 1 / r6])[None, :]
        v = np.array([0, 1 / r3, 1 / r6, -1 / r6, 1j / r6, -1j / r6])[None, :]
        u = np.broadcast_to(u, (B, 6)).astype(complex)
        v = np.broadcast_to(v, (B, 6)).astype(complex)
    else:
        y = np.sqrt(1.0 - x * x)
        r2 = math.sqrt(2.0)
        u = np.stack([x, x, y, y], axis=1) / r2
        v = np.stack([y, -y, 1j * x, -1j * x], axis=1) / r2
    amps = u * a_h[:, None] + v * a_v[:, None]
    g_ah = u * e_h[:, None]
    g_av = v * e_v[:, None]
    g_ph = u * dp_h[:, None] + v * dp_v[:, None]
    agrads = np.stack([g_ah, g_av, g_ph], axis=-1)
    if scenario.power_known:
        g_c = agrads[..., 0] - (ah / av)[:, None] * agrads[..., 1]
        agrads = np.stack([g_c, agrads[..., 2]], axis=-1)
    f = _fisher_batch(amps, agrads)

    jmats = np.empty((B, 3, scenario.n_params))
    for i in range(B):
        jmats[i] = jacobian(ModalParams(ah[i], av[i], phi[i]), scenario)
    evals = np.linalg.eigvalsh(f)
    ok = evals[:, 0] > SINGULAR_REL_TOL * np.maximum(evals[:, -1], 1e-300)
    cost = np.full(B, np.inf)
    if ok.any():
        sol = np.linalg.solve(f[ok], np.transpose(jmats[ok], (0, 2, 1)))
        cost[ok] = np.einsum("bij,bji->b", jmats[ok], sol)
    return cost


def stokes_crb_grid(svecs, scenario):
    """Stokes-receiver bound for a sequence of Stokes vectors."""
    params = [modal_from_stokes(s) for s in svecs]
    ah = np.array([p.a_h for p in params])
    av = np.array([p.a_v for p in params])
    phi = np.array([p.phi_minus for p in params])
    return _cost_batch(ah, av, phi, "stokes", None, scenario)


X_SEARCH_RANGE = (0.01, 0.99)


def tetra_optimize_grid(svecs, scenario, n_coarse=99, xtol=1e-8):
    """Optimal-transmissivity tetrahedron bound for many states at once.

    A coarse sweep over the admissible transmissivity range brackets the
    global basin per point (the landscape has interior singularities where
    a parameter drops out, e.g. x = 1/sqrt2 on the S1 = 0 great circle);
    golden-section then refines each bracket in lockstep.
    """
    params = [modal_from_stokes(s) for s in svecs]
    ah = np.array([p.a_h for p in params])
    av = np.array([p.a_v for p in params])
    phi = np.array([p.phi_minus for p in params])
    B = ah.size
    xs = np.linspace(*X_SEARCH_RANGE, n_coarse)
    costs = np.empty((B, n_coarse))
    for i, x in enumerate(xs):
        costs[:, i] = _cost_batch(ah, av, phi, "tetrahedron",
                                  np.full(B, x), scenario)
    best = np.argmin(np.where(np.isfinite(costs), costs, np.inf), axis=1)
    lo = xs[np.maximum(best - 1, 0)]
    hi = xs[np.minimum(best + 1, n_coarse - 1)]

    def fun(xarr):
        return _cost_batch(ah, av, phi, "tetrahedron", xarr, scenario)

    x_opt, cost = golden_min_batch(fun, lo, hi, xtol=xtol)
    return x_opt, cost


def tetrahedron_optimize(p, scenario):
    """Best PPBS transmissivity and bound for a single state.

    Returns (x_opt, cost); cost may be +inf at measure-zero degenerate
    points where no transmissivity makes all parameters identifiable.
    """
    x, cost = tetra_optimize_grid([stokes_from_modal(p)], scenario)
    return float(x[0]), float(cost[0])
