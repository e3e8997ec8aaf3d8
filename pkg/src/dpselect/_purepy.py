"""Numpy fallback for the compiled solver core.

Same call signatures and iteration logic as ``dpselect._kernels``; used when
the extension is unavailable or ``DPSELECT_PURE_PYTHON`` is set.
"""

import numpy as np


def pgd_ridge_gram(gram, xty, yty, n_obs, pen, r, beta0, max_iters, rel_tol,
                   inv_lip):
    beta = np.array(beta0, dtype=np.float64)
    hist = np.zeros(5)
    hpos = 0
    hcount = 0

    gb = gram @ beta
    f = (yty - 2.0 * beta @ xty + beta @ gb) / (2.0 * n_obs) + 0.5 * pen @ (beta * beta)

    iters = 0
    for t in range(max_iters):
        iters = t + 1
        beta = beta - inv_lip * ((gb - xty) / n_obs + pen * beta)
        nrm = np.linalg.norm(beta)
        if nrm > r:
            beta *= r / nrm

        gb = gram @ beta
        f = (yty - 2.0 * beta @ xty + beta @ gb) / (2.0 * n_obs) + 0.5 * pen @ (beta * beta)

        if hcount >= 5:
            if abs(hist[hpos] - f) <= rel_tol * (abs(f) + 1e-12):
                break
        hist[hpos] = f
        hpos = (hpos + 1) % 5
        hcount += 1

    return beta, f, iters


def _hinge_obj(x, y, pen, beta):
    margins = 1.0 - y * (x @ beta)
    return float(np.maximum(margins, 0.0).mean() + pen @ (beta * beta))


def subgrad_hinge(x, y, pen, r, beta0, max_iters, rel_tol):
    n = x.shape[0]
    beta = np.array(beta0, dtype=np.float64)
    best = beta.copy()
    best_f = _hinge_obj(x, y, pen, beta)
    hist = np.zeros(5)
    hpos = 0
    hcount = 0

    iters = 0
    for t in range(1, max_iters + 1):
        iters = t
        active = (y * (x @ beta)) < 1.0
        grad = 2.0 * pen * beta
        if active.any():
            grad = grad - (y[active] @ x[active]) / n

        beta = beta - grad / np.sqrt(t)
        nrm = np.linalg.norm(beta)
        if nrm > r:
            beta *= r / nrm

        f = _hinge_obj(x, y, pen, beta)
        if f < best_f:
            best_f = f
            best = beta.copy()

        if hcount >= 5:
            if abs(hist[hpos] - f) <= rel_tol * (abs(f) + 1e-12):
                break
        hist[hpos] = f
        hpos = (hpos + 1) % 5
        hcount += 1

    return best, best_f, iters
