# Hot inner-solver loops. Semantics mirror dpselect._purepy exactly; keep the
# two implementations in sync.

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def pgd_ridge_gram(double[:, ::1] gram, double[::1] xty, double yty,
                   double n_obs, double[::1] pen, double r,
                   double[::1] beta0, int max_iters, double rel_tol,
                   double inv_lip):
    """Projected gradient descent for the ball-constrained weighted ridge
    objective, expressed through the Gram matrix:

        f(b) = (yty - 2 b'xty + b'Gb) / (2 n) + 0.5 * sum_i pen_i b_i^2

    Returns (beta, objective, iterations). The step 1/L is supplied by the
    caller (inv_lip); with a valid L the iteration is monotone.
    """
    cdef int p = gram.shape[0]
    cdef cnp.ndarray[double, ndim=1] beta_arr = np.array(beta0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] gb_arr = np.zeros(p, dtype=np.float64)
    cdef double[::1] beta = beta_arr
    cdef double[::1] gb = gb_arr
    cdef double[5] hist
    cdef int i, j, t, hpos = 0, hcount = 0
    cdef double acc, f, quad, lin, sq, nrm, scale, step_i, prev, penterm

    # objective at the start
    quad = 0.0
    lin = 0.0
    penterm = 0.0
    for i in range(p):
        acc = 0.0
        for j in range(p):
            acc += gram[i, j] * beta[j]
        gb[i] = acc
        quad += beta[i] * acc
        lin += beta[i] * xty[i]
        penterm += pen[i] * beta[i] * beta[i]
    f = (yty - 2.0 * lin + quad) / (2.0 * n_obs) + 0.5 * penterm

    cdef int iters = 0
    for t in range(max_iters):
        iters = t + 1
        # gradient step: b <- b - inv_lip * ((G b - xty)/n + pen*b)
        sq = 0.0
        for i in range(p):
            step_i = beta[i] - inv_lip * ((gb[i] - xty[i]) / n_obs + pen[i] * beta[i])
            beta[i] = step_i
            sq += step_i * step_i
        nrm = sqrt(sq)
        if nrm > r:
            scale = r / nrm
            for i in range(p):
                beta[i] *= scale

        quad = 0.0
        lin = 0.0
        penterm = 0.0
        for i in range(p):
            acc = 0.0
            for j in range(p):
                acc += gram[i, j] * beta[j]
            gb[i] = acc
            quad += beta[i] * acc
            lin += beta[i] * xty[i]
            penterm += pen[i] * beta[i] * beta[i]
        f = (yty - 2.0 * lin + quad) / (2.0 * n_obs) + 0.5 * penterm

        if hcount >= 5:
            prev = hist[hpos]
            if fabs(prev - f) <= rel_tol * (fabs(f) + 1e-12):
                hist[hpos] = f
                break
        hist[hpos] = f
        hpos = (hpos + 1) % 5
        hcount += 1

    return beta_arr, f, iters


def subgrad_hinge(double[:, ::1] x, double[::1] y, double[::1] pen, double r,
                  double[::1] beta0, int max_iters, double rel_tol):
    """Projected subgradient method for the ball-constrained penalized hinge
    objective

        f(b) = (1/n) sum_i max(0, 1 - y_i x_i'b) + sum_i pen_i b_i^2

    with step 1/sqrt(t). Kink terms contribute zero. Returns the best
    iterate encountered: (beta, objective, iterations).
    """
    cdef int n = x.shape[0]
    cdef int p = x.shape[1]
    cdef cnp.ndarray[double, ndim=1] beta_arr = np.array(beta0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] best_arr = np.array(beta0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] grad_arr = np.zeros(p, dtype=np.float64)
    cdef double[::1] beta = beta_arr
    cdef double[::1] best = best_arr
    cdef double[::1] grad = grad_arr
    cdef double[5] hist
    cdef int i, j, t, hpos = 0, hcount = 0
    cdef double margin, f, best_f, sq, nrm, scale, eta, prev, dot

    f = _hinge_obj(x, y, pen, beta)
    best_f = f

    cdef int iters = 0
    for t in range(1, max_iters + 1):
        iters = t
        for i in range(p):
            grad[i] = 2.0 * pen[i] * beta[i]
        for j in range(n):
            dot = 0.0
            for i in range(p):
                dot += x[j, i] * beta[i]
            if y[j] * dot < 1.0:
                for i in range(p):
                    grad[i] -= y[j] * x[j, i] / n

        eta = 1.0 / sqrt(<double>t)
        sq = 0.0
        for i in range(p):
            beta[i] -= eta * grad[i]
            sq += beta[i] * beta[i]
        nrm = sqrt(sq)
        if nrm > r:
            scale = r / nrm
            for i in range(p):
                beta[i] *= scale

        f = _hinge_obj(x, y, pen, beta)
        if f < best_f:
            best_f = f
            for i in range(p):
                best[i] = beta[i]

        if hcount >= 5:
            prev = hist[hpos]
            if fabs(prev - f) <= rel_tol * (fabs(f) + 1e-12):
                hist[hpos] = f
                break
        hist[hpos] = f
        hpos = (hpos + 1) % 5
        hcount += 1

    return best_arr, best_f, iters


cdef double _hinge_obj(double[:, ::1] x, double[::1] y, double[::1] pen,
                       double[::1] beta):
    cdef int n = x.shape[0]
    cdef int p = x.shape[1]
    cdef int i, j
    cdef double total = 0.0, dot, m
    for j in range(n):
        dot = 0.0
        for i in range(p):
            dot += x[j, i] * beta[i]
        m = 1.0 - y[j] * dot
        if m > 0.0:
            total += m
    total /= n
    for i in range(p):
        total += pen[i] * beta[i] * beta[i]
    return total
