"""Monte-Carlo photon counting, estimators and mean-squared-error benchmarks.

Each detector arm of a receiver sees a coherent state, so ``shots``
repetitions aggregate into a single Poisson draw with mean shots * n_bar
(Poisson additivity; exact, not an approximation).  Estimates are formed
either by linear moment inversion of the Stokes-receiver means or by
maximizing the Poisson likelihood in modal coordinates; squared errors are
always reported in Stokes coordinates and multiplied by ``shots`` so the
totals compare directly against the per-copy bounds.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import xlogy

from .errors import AllZeroCounts, NoConverge, WrongReceiver
from .polcore import (ModalParams, Scenario, StokesVector, stokes_from_modal,
                      wrap_phase)
from .receivers import arm_means

MLE_MAX_ITER = 500

# Arm means never depend on the estimation scenario; sampling uses this one.
_GENERAL = Scenario(power_known=False, phase_known=False)


@dataclass(frozen=True)
class CountRecord:
    """Aggregated photon counts from one experiment."""

    counts: tuple
    shots: int
    receiver: object
    seed: int

    def __post_init__(self):
        if len(self.counts) != self.receiver.n_arms:
            raise ValueError(
                f"{len(self.counts)} counts for a {self.receiver.kind} "
                f"receiver with {self.receiver.n_arms} arms")


@dataclass(frozen=True)
class MleResult:
    params: ModalParams
    converged: bool
    grad_norm: float
    n_iter: int


@dataclass(frozen=True)
class MseReport:
    """Empirical estimation error against the truth, shots-normalized."""

    per_parameter_mse: tuple  # (S1, S2, S3), photon-number^2 units
    total: float
    trials: int
    bias: tuple
    stderr: tuple
    excluded: int
    estimator: str
    shots: int
    seed: int


def sample_counts(p, spec, shots, seed):
    """One Poisson draw per arm with mean shots * n_bar; deterministic in seed."""
    if shots < 1:
        raise ValueError("shots must be a positive integer")
    means = arm_means(p, spec, _GENERAL).means * shots
    rng = np.random.default_rng(seed)
    counts = rng.poisson(means)
    return CountRecord(tuple(int(k) for k in counts), shots, spec, seed)


def naive_stokes_estimate(c):
    """Linear moment inversion of Stokes-receiver counts.

    S1_hat = 3 (k_H - k_V)/shots and cyclically for the other two basis
    pairs; S0_hat is the total count rate.  Unbiased but generally not on
    the fully-polarized manifold, so the result is returned as a raw
    (unvalidated) Stokes vector.
    """
    if c.receiver.kind != "stokes":
        raise WrongReceiver(
            f"naive moment inversion needs the stokes receiver, "
            f"got {c.receiver.kind}")
    k = np.asarray(c.counts, dtype=float)
    n = float(c.shots)
    return StokesVector(
        k.sum() / n,
        3.0 * (k[0] - k[1]) / n,
        3.0 * (k[2] - k[3]) / n,
        3.0 * (k[4] - k[5]) / n,
    )


def _tetra_moment_estimate(c):
    """Moment inversion for the tetrahedron receiver (MLE initializer)."""
    k = np.asarray(c.counts, dtype=float)
    n = float(c.shots)
    x = c.receiver.ppbs_x
    y = math.sqrt(1.0 - x * x)
    s0 = k.sum() / n
    s2 = (k[0] - k[1]) / (n * x * y)
    s3 = (k[2] - k[3]) / (n * x * y)
    if abs(x * x - y * y) > 1e-6:
        s1 = (2.0 * (k[0] + k[1]) / n - s0) / (x * x - y * y)
    else:
        s1 = 0.0
    return StokesVector(s0, s1, s2, s3)


def _project_to_modal(s_raw, s0_known=None):
    """Project a raw Stokes estimate onto the fully polarized manifold."""
    vec = np.array([s_raw.s1, s_raw.s2, s_raw.s3])
    s0 = s0_known if s0_known is not None else max(s_raw.s0, 1e-9)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        vec = np.array([0.0, s0, 0.0])  # arbitrary equatorial direction
        norm = s0
    vec = vec * (s0 / norm)
    a_h = math.sqrt(max((s0 + vec[0]) / 2.0, 0.0))
    a_v = math.sqrt(max((s0 - vec[0]) / 2.0, 0.0))
    phi = math.atan2(vec[2], vec[1]) if min(a_h, a_v) > 1e-9 else 0.0
    return a_h, a_v, phi, s0


def _neg_loglik_and_grad(theta, counts, shots, spec, scenario, s0_known):
    if scenario.power_known:
        a_h = min(max(theta[0], 1e-9), math.sqrt(s0_known) * (1 - 1e-12))
        a_v = math.sqrt(max(s0_known - a_h * a_h, 1e-18))
        p = ModalParams(a_h, a_v, theta[1])
    else:
        p = ModalParams(max(theta[0], 0.0), max(theta[1], 0.0), theta[2])
    arms = arm_means(p, spec, scenario)
    mu = arms.means * shots
    grad_mu = arms.gradients * shots
    safe_mu = np.maximum(mu, 1e-300)
    ll = float(np.sum(xlogy(counts, safe_mu) - mu))
    ratio = np.where(mu > 0, counts / safe_mu, 0.0) - 1.0
    grad = grad_mu.T @ ratio
    return -ll, -grad


def mle_estimate(c, scenario, s0_known=None, full_output=False):
    """Maximum-likelihood modal parameters from a count record.

    Maximizes sum_arms (k ln mu - mu) over (a_h, a_v, phi-) or, with the
    total power known a priori (pass ``s0_known``), over (a_h, phi-) with
    a_v eliminated.  Initialized from the moment estimate projected onto
    the fully polarized manifold; converged when the gradient norm drops
    below 1e-8 * shots.  With ``full_output`` the convergence diagnostics
    are returned instead of raising NoConverge.
    """
    counts = np.asarray(c.counts, dtype=float)
    if counts.sum() == 0:
        raise AllZeroCounts("cannot estimate from an all-zero record")
    if scenario.power_known and s0_known is None:
        raise ValueError("power-known estimation needs s0_known")

    raw = naive_stokes_estimate(c) if c.receiver.kind == "stokes" \
        else _tetra_moment_estimate(c)
    a_h, a_v, phi, s0 = _project_to_modal(
        raw, s0_known if scenario.power_known else None)

    if scenario.power_known:
        x0 = np.array([a_h, phi])
        bounds = [(1e-9, math.sqrt(s0_known) * (1 - 1e-12)), (None, None)]
    else:
        x0 = np.array([max(a_h, 1e-6), max(a_v, 1e-6), phi])
        bounds = [(0.0, None), (0.0, None), (None, None)]

    res = optimize.minimize(
        _neg_loglik_and_grad, x0, jac=True,
        args=(counts, c.shots, c.receiver, scenario, s0_known),
        method="L-BFGS-B", bounds=bounds,
        options={"maxiter": MLE_MAX_ITER, "ftol": 1e-14,
                 "gtol": 1e-10 * c.shots})
    grad_norm = float(np.linalg.norm(res.jac))
    converged = grad_norm < 1e-8 * c.shots
    if scenario.power_known:
        a_h = min(max(res.x[0], 0.0), math.sqrt(s0_known))
        a_v = math.sqrt(max(s0_known - a_h * a_h, 0.0))
        params = ModalParams(a_h, a_v, wrap_phase(res.x[1]))
    else:
        params = ModalParams(max(res.x[0], 0.0), max(res.x[1], 0.0),
                             wrap_phase(res.x[2]))
    result = MleResult(params, converged, grad_norm, int(res.nit))
    if full_output:
        return result
    if not converged and res.nit >= MLE_MAX_ITER:
        raise NoConverge(
            f"gradient norm {grad_norm:.2e} after {res.nit} iterations")
    return params


def _trial_seeds(seed, trials):
    """Deterministic splittable per-trial seeds from the master seed."""
    return np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)


def mse_benchmark(p, spec, scenario, trials, shots, estimator, seed):
    """Empirical shots-normalized mean-squared error of an estimator.

    Runs ``trials`` independent sample -> estimate cycles with per-trial
    seeds split deterministically from ``seed``.  Errors are measured in
    Stokes coordinates against the truth and multiplied by ``shots`` so the
    total compares against the per-copy bounds.  Failed trials (all-zero
    counts, or a non-converged likelihood fit) are excluded and counted.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for a meaningful report")
    if estimator not in ("naive", "mle"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator == "naive" and spec.kind != "stokes":
        raise WrongReceiver("the naive estimator requires the stokes receiver")

    truth = stokes_from_modal(p).as_array()[1:]
    s0_known = p.s0 if scenario.power_known else None
    seeds = _trial_seeds(seed, trials)
    errors = []
    excluded = 0
    for ts in seeds:
        rec = sample_counts(p, spec, shots, int(ts))
        try:
            if estimator == "naive":
                est = naive_stokes_estimate(rec)
                vec = np.array([est.s1, est.s2, est.s3])
            else:
                r = mle_estimate(rec, scenario, s0_known=s0_known,
                                 full_output=True)
                if not r.converged:
                    excluded += 1
                    continue
                s_est = stokes_from_modal(r.params)
                vec = np.array([s_est.s1, s_est.s2, s_est.s3])
        except AllZeroCounts:
            excluded += 1
            continue
        errors.append(vec - truth)

    err = np.array(errors)
    n_used = err.shape[0]
    sq = err ** 2 * shots
    mse = sq.mean(axis=0)
    bias = err.mean(axis=0)
    stderr = err.std(axis=0, ddof=1) / math.sqrt(n_used)
    return MseReport(
        per_parameter_mse=tuple(float(v) for v in mse),
        total=float(mse.sum()),
        trials=n_used,
        bias=tuple(float(v) for v in bias),
        stderr=tuple(float(v) for v in stderr),
        excluded=excluded,
        estimator=estimator,
        shots=shots,
        seed=seed,
    )
