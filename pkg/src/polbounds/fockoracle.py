"""Brute-force verification backend in a truncated two-mode Fock space.

Everything here exists to check the closed-form modules against direct
numerics: coherent states as explicit amplitude vectors, Stokes observables
as explicit matrices, global-phase averaging as dephasing between
total-photon-number blocks, and quantum Fisher information computed by
solving for the symmetric logarithmic derivatives.

The basis keeps the states |n, m> with n + m <= cutoff, ordered block by
block in the total photon number N = n + m (index N(N+1)/2 + n).  All four
Stokes observables conserve N, so they are exact on this triangular
truncation; the only truncation error is the Poisson tail of the input
state, which the default cutoff rule S0 + 10 sqrt(S0) + 10 keeps below
1e-10 for the desk-scale powers (S0 <= 4) this oracle is meant for.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import CutoffTooSmall, IllConditioned
from .polcore import Scenario
from .qfisher import QfiMatrix

TAIL_TOL = 1e-10
FD_STEP = 1e-5


def default_cutoff(s0):
    """Cutoff keeping the Poisson tail below every test tolerance."""
    return int(math.ceil(s0 + 10.0 * math.sqrt(s0) + 10.0))


def basis_dim(cutoff):
    return (cutoff + 1) * (cutoff + 2) // 2


def block_slice(n_total):
    """Index range of the total-photon-number block ``n_total``."""
    start = n_total * (n_total + 1) // 2
    return slice(start, start + n_total + 1)


def _nm_arrays(cutoff):
    """Per-index photon numbers (n, m) for the whole basis."""
    n = np.concatenate([np.arange(N + 1) for N in range(cutoff + 1)])
    m = np.concatenate([np.full(N + 1, N) - np.arange(N + 1)
                        for N in range(cutoff + 1)])
    return n, m


@dataclass(frozen=True)
class FockState:
    """Pure two-mode state as an amplitude vector over |n, m>."""

    cutoff: int
    amplitudes: np.ndarray
    tail_mass: float = 0.0


@dataclass(frozen=True)
class FockDensity:
    """Density-matrix variant, block diagonal in the total photon number."""

    cutoff: int
    matrix: np.ndarray


@dataclass(frozen=True)
class StokesOperators:
    """Dense truncated matrices of the four Stokes observables."""

    cutoff: int
    matrices: tuple  # (S0, S1, S2, S3)


def _amplitude_vector(a_h, a_v, phi_minus, phi_plus, cutoff):
    """Coherent amplitudes and their analytic parameter derivatives.

    Returns (c, dc_ah, dc_av, dc_phi_minus, dc_phi_plus); derivatives are
    taken at fixed values of the other three parameters, with the power
    convention 0^0 = 1 making them exact at vanishing amplitudes.
    """
    n, m = _nm_arrays(cutoff)
    s0 = a_h * a_h + a_v * a_v
    phi_h = 0.5 * (phi_plus + phi_minus)
    phi_v = 0.5 * (phi_plus - phi_minus)
    fact = 0.5 * (np.vectorize(math.lgamma)(n + 1.0)
                  + np.vectorize(math.lgamma)(m + 1.0))
    pow_h = np.power(a_h, n)
    pow_v = np.power(a_v, m)
    dpow_h = np.where(n > 0, n * np.power(a_h, np.maximum(n - 1, 0)), 0.0)
    dpow_v = np.where(m > 0, m * np.power(a_v, np.maximum(m - 1, 0)), 0.0)
    phase = np.exp(1j * (n * phi_h + m * phi_v))
    base = np.exp(-0.5 * s0 - fact) * phase
    c = base * pow_h * pow_v
    dc_ah = base * (dpow_h - a_h * pow_h) * pow_v
    dc_av = base * pow_h * (dpow_v - a_v * pow_v)
    dc_phm = 0.5j * (n - m) * c
    dc_php = 0.5j * (n + m) * c
    return c, dc_ah, dc_av, dc_phm, dc_php


def coherent_two_mode(p, cutoff=None):
    """Truncated two-mode coherent state at modal parameters ``p``.

    Raises CutoffTooSmall when the Poisson tail beyond the cutoff exceeds
    1e-10 (rule of thumb: cutoff >= S0 + 10 sqrt(S0) + 10).
    """
    s0 = p.s0
    if cutoff is None:
        cutoff = default_cutoff(s0)
    tail = float(stats.poisson.sf(cutoff, s0)) if s0 > 0 else 0.0
    if tail >= TAIL_TOL:
        raise CutoffTooSmall(
            f"cutoff {cutoff} leaves tail mass {tail:.2e} at S0={s0:.3g}")
    c, *_ = _amplitude_vector(p.a_h, p.a_v, p.phi_minus, p.phi_plus, cutoff)
    return FockState(cutoff, c, tail_mass=tail)


def _ladder(cutoff, mode):
    """Truncated annihilation operator for the H (mode=0) or V (mode=1) mode."""
    n, m = _nm_arrays(cutoff)
    dim = basis_dim(cutoff)
    a = np.zeros((dim, dim))
    occ = n if mode == 0 else m
    for idx in range(dim):
        if occ[idx] == 0:
            continue
        nn = n[idx] - (1 if mode == 0 else 0)
        mm = m[idx] - (0 if mode == 0 else 1)
        tot = nn + mm
        a[tot * (tot + 1) // 2 + nn, idx] = math.sqrt(occ[idx])
    return a


def stokes_operators(cutoff):
    """Dense Stokes observables built from truncated ladder operators.

    All four conserve the total photon number, so on this basis they equal
    the exact infinite-dimensional blocks; in particular the su(2)-type
    commutation relations hold on the whole truncated space.  With the
    S3 = i(a^dag b - b^dag a) sign convention (the one whose expectation
    value is +2 a_h a_v sin phi-) the algebra orients as
    [S_j, S_k] = -2i eps_jkl S_l.
    """
    a = _ladder(cutoff, 0)
    b = _ladder(cutoff, 1)
    na = a.T @ a
    nb = b.T @ b
    cross = a.T @ b  # a^dagger b
    s0 = na + nb
    s1 = na - nb
    s2 = cross + cross.T
    s3 = 1j * (cross - cross.T)
    return StokesOperators(cutoff, (s0.astype(complex), s1.astype(complex),
                                    s2, s3))


def expectation(op, state):
    return complex(np.vdot(state.amplitudes, op @ state.amplitudes))


def phase_average(state):
    """Dephase a pure state over the global phase.

    Coherences between different total photon numbers are erased, leaving
    one rank-one block per N with weight given by the Poisson distribution
    of the total power.  Trace is preserved exactly.
    """
    dim = state.amplitudes.size
    rho = np.zeros((dim, dim), complex)
    for big_n in range(state.cutoff + 1):
        sl = block_slice(big_n)
        block = state.amplitudes[sl]
        rho[sl, sl] = np.outer(block, block.conj())
    return FockDensity(state.cutoff, rho)


def _deriv_vectors(p, scenario, cutoff, derivative):
    """State vector and parameter derivatives for the scenario's parameters."""
    ah, av, phm, php = p.a_h, p.a_v, p.phi_minus, p.phi_plus
    if derivative == "analytic":
        c, d_ah, d_av, d_phm, _ = _amplitude_vector(ah, av, phm, php, cutoff)
        if scenario.power_known:
            return c, [d_ah - (ah / av) * d_av, d_phm]
        return c, [d_ah, d_av, d_phm]
    if derivative != "fd":
        raise ValueError(f"unknown derivative mode {derivative!r}")
    h = FD_STEP
    amp = lambda a, b, f: _amplitude_vector(a, b, f, php, cutoff)[0]
    c = amp(ah, av, phm)
    if scenario.power_known:
        s0 = ah * ah + av * av
        con = lambda a, f: amp(a, math.sqrt(s0 - a * a), f)
        return c, [(con(ah + h, phm) - con(ah - h, phm)) / (2 * h),
                   (con(ah, phm + h) - con(ah, phm - h)) / (2 * h)]
    return c, [(amp(ah + h, av, phm) - amp(ah - h, av, phm)) / (2 * h),
               (amp(ah, av + h, phm) - amp(ah, av - h, phm)) / (2 * h),
               (amp(ah, av, phm + h) - amp(ah, av, phm - h)) / (2 * h)]


def numerical_qfi(p, scenario, cutoff=None, derivative="analytic"):
    """Quantum Fisher information from explicit truncated-space numerics.

    Phase known: the state is pure and the logarithmic derivative applied to
    the state is L_j|psi> = 2(|d_j psi> + <d_j psi|psi> |psi>), from which
    Q_jk = Re <L_j psi|L_k psi>.  Phase unknown: the dephased density matrix
    is block diagonal, so the SLD equation d_j rho = (rho L_j + L_j rho)/2
    is solved per block in the eigenbasis of rho, dropping eigenvalue pairs
    below 1e-12 (IllConditioned if such a pair carries weight above 1e-8).
    """
    if cutoff is None:
        cutoff = default_cutoff(p.s0)
    state = coherent_two_mode(p, cutoff)  # validates the tail
    c, derivs = _deriv_vectors(p, scenario, cutoff, derivative)
    k = len(derivs)

    if scenario.phase_known:
        lvecs = []
        for d in derivs:
            overlap = np.vdot(d, c)
            lvecs.append(2.0 * (d + overlap * c))
        q = np.empty((k, k))
        for i in range(k):
            for j in range(k):
                q[i, j] = np.vdot(lvecs[i], lvecs[j]).real
        labels = ("a_h", "phi_minus") if scenario.power_known else \
            ("a_h", "a_v", "phi_minus")
        return QfiMatrix(0.5 * (q + q.T), labels, scenario)

    q = np.zeros((k, k))
    for big_n in range(cutoff + 1):
        sl = block_slice(big_n)
        cb = c[sl]
        rho_b = np.outer(cb, cb.conj())
        evals, evecs = np.linalg.eigh(rho_b)
        drho = [np.outer(d[sl], cb.conj()) + np.outer(cb, d[sl].conj())
                for d in derivs]
        lsld = []
        for dr in drho:
            dr_eig = evecs.conj().T @ dr @ evecs
            den = evals[:, None] + evals[None, :]
            small = den < 1e-12
            if np.any(small & (np.abs(dr_eig) > 1e-8)):
                raise IllConditioned(
                    f"block N={big_n}: SLD numerator on a null eigenpair")
            with np.errstate(divide="ignore", invalid="ignore"):
                l_eig = np.where(small, 0.0, 2.0 * dr_eig / den)
            lsld.append(evecs @ l_eig @ evecs.conj().T)
        for i in range(k):
            for j in range(k):
                q[i, j] += np.trace(drho[i] @ lsld[j]).real
    labels = ("a_h", "phi_minus") if scenario.power_known else \
        ("a_h", "a_v", "phi_minus")
    return QfiMatrix(0.5 * (q + q.T), labels, scenario)


def sld_commutators_numeric(p, cutoff=None, phase_known=True):
    """Numeric state expectations of ([L_phi, L_ah], [L_phi, L_av]).

    Computed in the general three-parameter model; cross-checks the closed
    forms (their magnitudes in the phase-averaged case resolve the sign
    ambiguity left by the derivation).
    """
    if cutoff is None:
        cutoff = default_cutoff(p.s0)
    c, d_ah, d_av, d_phm, _ = _amplitude_vector(
        p.a_h, p.a_v, p.phi_minus, p.phi_plus, cutoff)
    if phase_known:
        lv = {}
        for name, d in (("a_h", d_ah), ("a_v", d_av), ("phi", d_phm)):
            lv[name] = 2.0 * (d + np.vdot(d, c) * c)
        com = lambda x, y: np.vdot(lv[x], lv[y]) - np.vdot(lv[y], lv[x])
        return com("phi", "a_h"), com("phi", "a_v")

    out = []
    for other in (d_ah, d_av):
        total = 0j
        for big_n in range(cutoff + 1):
            sl = block_slice(big_n)
            cb = c[sl]
            rho_b = np.outer(cb, cb.conj())
            evals, evecs = np.linalg.eigh(rho_b)
            ls = []
            for d in (d_phm, other):
                dr = np.outer(d[sl], cb.conj()) + np.outer(cb, d[sl].conj())
                dr_eig = evecs.conj().T @ dr @ evecs
                den = evals[:, None] + evals[None, :]
                with np.errstate(divide="ignore", invalid="ignore"):
                    l_eig = np.where(den < 1e-12, 0.0, 2.0 * dr_eig / den)
                ls.append(evecs @ l_eig @ evecs.conj().T)
            total += np.trace(rho_b @ (ls[0] @ ls[1] - ls[1] @ ls[0]))
        out.append(total)
    return tuple(out)


def span_basis_vectors(p, scenario, cutoff=None):
    """Truncated-space representation of the three span-basis vectors.

    Independent reconstruction used to verify orthonormality of the basis
    and the expansion coefficients of the phase derivatives.
    """
    if cutoff is None:
        cutoff = default_cutoff(p.s0)
    ah, av = p.a_h, p.a_v
    c, d_ah, d_av, _, _ = _amplitude_vector(
        ah, av, p.phi_minus, p.phi_plus, cutoff)
    if not scenario.power_known:
        return np.stack([c, d_ah, d_av])
    s0 = p.s0
    beta = 1.0 - ah * ah / s0
    e1 = math.sqrt(beta) * (d_ah - (ah / av) * d_av)
    e2 = 1j * (ah * d_ah + av * d_av) / math.sqrt(s0)
    return np.stack([c, e1, e2])


def phase_derivative_vector(p, which, cutoff=None):
    """Truncated derivative of the state with respect to phi_minus/phi_plus."""
    if cutoff is None:
        cutoff = default_cutoff(p.s0)
    _, _, _, d_phm, d_php = _amplitude_vector(
        p.a_h, p.a_v, p.phi_minus, p.phi_plus, cutoff)
    return d_phm if which == "phi_minus" else d_php
