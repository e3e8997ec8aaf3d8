"""Dense bounded-variable primal simplex for the master LP relaxations.

Solves   min c'x   s.t.  A x <= b,  lower <= x <= upper

with a full-tableau implementation. Nonbasic variables sit at a finite
bound; slacks start basic, so the caller must supply starting statuses that
make the slack basis feasible (the master relaxations always admit one:
put the epigraph variable at its upper bound). Dantzig pricing with a
permanent switch to Bland's rule after a run of degenerate pivots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
DEGENERATE_LIMIT = 60
MAX_PIVOTS = 20_000

AT_LOWER = 0
AT_UPPER = 1
BASIC = 2


class SimplexError(RuntimeError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    iterations: int


def solve_lp(c, a_ub, b_ub, lower, upper, start_upper=None) -> LPResult:
    """start_upper: boolean mask of structural variables that begin at their
    upper bound (the rest begin at their lower bound)."""
    c = np.asarray(c, dtype=np.float64)
    a = np.asarray(a_ub, dtype=np.float64)
    b = np.asarray(b_ub, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    m, n = a.shape
    if np.any(lower > upper + FEAS_TOL):
        raise SimplexError("crossing variable bounds")

    total = n + m  # structurals then slacks
    tab = np.hstack([a, np.eye(m)])
    cost = np.concatenate([c, np.zeros(m)])
    lo = np.concatenate([lower, np.zeros(m)])
    hi = np.concatenate([upper, np.full(m, np.inf)])

    status = np.full(total, AT_LOWER, dtype=np.int8)
    if start_upper is not None:
        status[:n][np.asarray(start_upper, dtype=bool)] = AT_UPPER
    basis = np.arange(n, n + m)
    status[basis] = BASIC
    rhs = b.astype(np.float64).copy()

    def nonbasic_values():
        vals = np.where(status == AT_UPPER, hi, lo)
        vals[status == BASIC] = 0.0
        return vals

    def basic_values():
        nb = nonbasic_values()
        return rhs - tab @ nb

    xb = basic_values()
    if np.any(xb < lo[basis] - 1e-7) or np.any(xb > hi[basis] + 1e-7):
        raise SimplexError("infeasible starting basis")

    use_bland = False
    degenerate_run = 0
    iters = 0
    while True:
        if iters >= MAX_PIVOTS:
            raise SimplexError("pivot limit exceeded")
        iters += 1

        duals = cost[basis] @ tab
        reduced = cost - duals
        fixed = hi - lo <= FEAS_TOL
        can_enter_up = (status == AT_LOWER) & ~fixed & (reduced < -OPT_TOL)
        can_enter_dn = (status == AT_UPPER) & ~fixed & (reduced > OPT_TOL)
        candidates = np.flatnonzero(can_enter_up | can_enter_dn)
        if candidates.size == 0:
            break
        if use_bland:
            j = int(candidates[0])
        else:
            j = int(candidates[np.argmax(np.abs(reduced[candidates]))])
        direction = 1.0 if status[j] == AT_LOWER else -1.0

        col = tab[:, j]
        xb = basic_values()
        # step limits from basic variables leaving their bounds
        move = direction * col
        limits = np.full(m, np.inf)
        dec = move > FEAS_TOL
        limits[dec] = (xb[dec] - lo[basis][dec]) / move[dec]
        inc = move < -FEAS_TOL
        limits[inc] = (xb[inc] - hi[basis][inc]) / move[inc]
        limits = np.maximum(limits, 0.0)
        span = hi[j] - lo[j]

        if limits.size:
            row = int(np.argmin(limits))
            step = limits[row]
        else:
            row, step = -1, np.inf
        if span < step:
            # entering variable flips to its other bound; basis unchanged
            status[j] = AT_UPPER if direction > 0 else AT_LOWER
            continue
        if not np.isfinite(step):
            raise SimplexError("unbounded pivot direction")
        if use_bland or step <= FEAS_TOL:
            # tie-break / anti-cycling: lowest basic variable index
            tied = np.flatnonzero(limits <= step + FEAS_TOL)
            row = int(tied[np.argmin(basis[tied])])
            step = limits[row]
        if step <= FEAS_TOL:
            degenerate_run += 1
            if degenerate_run >= DEGENERATE_LIMIT:
                use_bland = True
        else:
            degenerate_run = 0

        # pivot: entering j, leaving basis[row]
        leave = basis[row]
        leave_val = xb[row] - step * move[row]
        status[leave] = AT_UPPER if abs(leave_val - hi[leave]) < abs(leave_val - lo[leave]) else AT_LOWER
        pivot = tab[row, j]
        if abs(pivot) < 1e-12:
            raise SimplexError("numerically singular pivot")
        tab[row] /= pivot
        rhs[row] /= pivot
        others = tab[:, j].copy()
        others[row] = 0.0
        tab -= np.outer(others, tab[row])
        rhs -= others * rhs[row]
        basis[row] = j
        status[j] = BASIC

    nb = nonbasic_values()
    x = nb.copy()
    x[basis] = rhs - tab @ nb
    return LPResult(x[:n], float(cost[:n] @ x[:n]), iters)
