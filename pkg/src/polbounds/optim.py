"""Derivative-free minimizers used by the bound engines.

Both routines are deterministic and vectorized over a batch axis so that
sphere scans can run thousands of independent small minimizations as lockstep
numpy operations instead of per-point Python loops.
"""

import numpy as np

# Standard Nelder-Mead coefficients (reflection, expansion, contraction, shrink).
_RHO, _CHI, _GAMMA, _SIGMA = 1.0, 2.0, 0.5, 0.5


def nelder_mead_batch(fun, x0, step=0.5, diam_tol=1e-9, max_iter=1000):
    """Minimize ``fun`` independently for every row of ``x0``.

    ``fun(points, idx)`` maps an (n, m, k) array of points to (n, m) values,
    where ``idx`` (shape (n,)) says which of the B problems each row belongs
    to (per-problem constants must be gathered with it; ``idx=None`` means
    all problems in order).  Problems whose simplex diameter drops below
    ``diam_tol`` leave the active set, so stragglers do not make the whole
    batch pay.

    Returns (x_best, f_best, converged) with shapes (B, k), (B,), (B,).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    B, k = x0.shape
    simplex = np.repeat(x0[:, None, :], k + 1, axis=1)
    for i in range(k):
        simplex[:, i + 1, i] += step
    vals = fun(simplex, None)

    converged = np.zeros(B, dtype=bool)
    act = np.arange(B)
    for _ in range(max_iter):
        s = simplex[act]
        v = vals[act]
        order = np.argsort(v, axis=1)
        v = np.take_along_axis(v, order, axis=1)
        s = np.take_along_axis(s, order[:, :, None], axis=1)
        simplex[act] = s
        vals[act] = v

        diam = np.abs(s - s[:, :1, :]).max(axis=(1, 2))
        done = diam < diam_tol
        if done.any():
            converged[act[done]] = True
            act = act[~done]
            if act.size == 0:
                break
            s, v = s[~done], v[~done]

        best, second_worst, worst = v[:, 0], v[:, -2], v[:, -1]
        centroid = s[:, :-1, :].mean(axis=1)
        xw = s[:, -1, :]

        xr = centroid + _RHO * (centroid - xw)
        xe = centroid + _CHI * (xr - centroid)
        xoc = centroid + _GAMMA * (xr - centroid)
        xic = centroid - _GAMMA * (centroid - xw)
        cand = np.stack([xr, xe, xoc, xic], axis=1)
        fc = fun(cand, act)
        fr, fe, foc, fic = fc[:, 0], fc[:, 1], fc[:, 2], fc[:, 3]

        new_x = xr.copy()
        new_f = fr.copy()
        take_e = (fr < best) & (fe < fr)
        new_x[take_e] = xe[take_e]
        new_f[take_e] = fe[take_e]

        out_c = (fr >= second_worst) & (fr < worst)
        oc_ok = out_c & (foc <= fr)
        new_x[oc_ok], new_f[oc_ok] = xoc[oc_ok], foc[oc_ok]

        in_c = fr >= worst
        ic_ok = in_c & (fic < worst)
        new_x[ic_ok], new_f[ic_ok] = xic[ic_ok], fic[ic_ok]

        shrink = (out_c & ~oc_ok) | (in_c & ~ic_ok)
        accept = ~shrink
        rows = act[accept]
        simplex[rows, -1, :] = new_x[accept]
        vals[rows, -1] = new_f[accept]

        if shrink.any():
            rows = act[shrink]
            moved = (simplex[rows, :1, :]
                     + _SIGMA * (simplex[rows, 1:, :] - simplex[rows, :1, :]))
            simplex[rows, 1:, :] = moved
            vals[rows, 1:] = fun(moved, rows)

    return simplex[:, 0, :], vals[:, 0], converged


def golden_min(fun, lo, hi, xtol=1e-8):
    """Golden-section minimum of a scalar unimodal function on [lo, hi].

    Returns (x, fun(x)).  The caller is responsible for bracketing a single
    local minimum; combine with a coarse scan when the landscape may have
    several basins or interior singularities.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def golden_min_batch(fun, lo, hi, xtol=1e-8):
    """Vectorized golden-section over per-problem brackets.

    ``fun`` maps an (B,) array of abscissae to (B,) values; ``lo``/``hi`` are
    (B,) bracket endpoints.  All problems iterate in lockstep until the
    widest bracket is below ``xtol``.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a = np.asarray(lo, dtype=float).copy()
    b = np.asarray(hi, dtype=float).copy()
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    n_iter = int(np.ceil(np.log(xtol / (b - a).max()) / np.log(invphi))) + 1
    for _ in range(max(n_iter, 1)):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc = fun(c)
        fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)
