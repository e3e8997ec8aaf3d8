"""Constrained convex inner solvers.

pgd_ridge minimizes, over the l2 ball of radius r,

    g(b) = ||y - X b||^2 / (2n) + (lam / 2n) sum_i b_i^2 / zhat_i

by projected gradient descent with step 1/L, L the largest eigenvalue of
(X'X + lam Diag(1/zhat)) / n inflated by 5% so the iteration stays monotone.

subgrad_hinge minimizes, over the same ball,

    f(b) = (1/n) sum_i max(0, 1 - y_i x_i'b) + (lam / n) sum_i b_i^2 / zhat_i

by a projected subgradient method with step 1/sqrt(t), reporting the best
iterate. iht_warmstart is the hard-thresholding heuristic used to seed the
outer-approximation search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dpselect import backend
from dpselect.data import Dataset
from dpselect.supports import Support

LIPSCHITZ_INFLATION = 1.05


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 10_000
    rel_tol: float = 1e-8
    power_iters: int = 10_000

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")


PGD_DEFAULTS = SolverOptions()
SUBGRAD_DEFAULTS = SolverOptions(max_iters=5_000)


@dataclass(frozen=True)
class WeightedProblem:
    dataset: Dataset
    zhat: np.ndarray
    lam: float
    r: float
    loss: str = "ls"  # "ls" or "hinge"

    def __post_init__(self):
        zhat = np.asarray(self.zhat, dtype=np.float64)
        if zhat.shape != (self.dataset.p,):
            raise ValueError("zhat must have one weight per feature")
        if np.any(zhat <= 0) or np.any(zhat > 1):
            raise ValueError("weights must lie in (0, 1]")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.loss not in ("ls", "hinge"):
            raise ValueError(f"unknown loss {self.loss!r}")
        object.__setattr__(self, "zhat", zhat)


def _check_finite(d: Dataset):
    if not (np.isfinite(d.x).all() and np.isfinite(d.y).all()):
        raise ValueError("dataset contains non-finite values")


def lipschitz_constant(d: Dataset, lam: float, zhat: np.ndarray,
                       opts: SolverOptions | None = None) -> float:
    """Largest eigenvalue of (X'X + lam Diag(1/zhat)) / n via power iteration
    on the implicitly formed matrix. Converges from below (Rayleigh
    quotient), so callers needing a guaranteed upper bound inflate it."""
    opts = opts or PGD_DEFAULTS
    zhat = np.asarray(zhat, dtype=np.float64)
    if np.any(zhat <= 0):
        raise ValueError("weights must be strictly positive")
    _check_finite(d)
    p = d.p
    diag = lam / zhat
    v = np.ones(p) + 1e-3 * np.arange(p) / max(p, 1)
    v /= np.linalg.norm(v)
    rayleigh = 0.0
    for _ in range(opts.power_iters):
        mv = d.x.T @ (d.x @ v) + diag * v
        nrm = np.linalg.norm(mv)
        if nrm == 0.0:
            return 0.0
        new_rayleigh = float(v @ mv)
        v = mv / nrm
        if abs(new_rayleigh - rayleigh) <= 1e-13 * max(abs(new_rayleigh), 1e-30):
            rayleigh = new_rayleigh
            break
        rayleigh = new_rayleigh
    return rayleigh / d.n


def _project(beta: np.ndarray, r: float) -> np.ndarray:
    nrm = np.linalg.norm(beta)
    return beta * (r / nrm) if nrm > r else beta


def pgd_ridge(prob: WeightedProblem, opts: SolverOptions | None = None,
              beta0: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    if prob.loss != "ls":
        raise ValueError("pgd_ridge requires the least-squares loss")
    opts = opts or PGD_DEFAULTS
    _check_finite(prob.dataset)
    d = prob.dataset
    gram = d.x.T @ d.x
    xty = d.x.T @ d.y
    yty = float(d.y @ d.y)
    pen = prob.lam / (d.n * prob.zhat)
    lip = lipschitz_constant(d, prob.lam, prob.zhat, opts) * LIPSCHITZ_INFLATION
    start = np.zeros(d.p) if beta0 is None else _project(np.asarray(beta0, float), prob.r)
    if lip == 0.0:
        # zero design and no penalty: objective is constant in beta
        return start, yty / (2.0 * d.n)
    beta, obj, _ = backend.pgd_ridge_gram(
        gram, xty, yty, float(d.n), pen, prob.r, start,
        opts.max_iters, opts.rel_tol, 1.0 / lip)
    return beta, float(obj)


def hinge_objective(prob: WeightedProblem, beta: np.ndarray) -> float:
    d = prob.dataset
    pen = prob.lam / (d.n * prob.zhat)
    margins = 1.0 - d.y * (d.x @ beta)
    return float(np.maximum(margins, 0.0).mean() + pen @ (beta * beta))


def subgrad_hinge(prob: WeightedProblem, opts: SolverOptions | None = None,
                  beta0: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    if prob.loss != "hinge":
        raise ValueError("subgrad_hinge requires the hinge loss")
    opts = opts or SUBGRAD_DEFAULTS
    _check_finite(prob.dataset)
    d = prob.dataset
    if not np.all(np.isin(d.y, (-1.0, 1.0))):
        raise ValueError("hinge labels must be in {-1, +1}")
    pen = prob.lam / (d.n * prob.zhat)
    start = np.zeros(d.p) if beta0 is None else _project(np.asarray(beta0, float), prob.r)
    beta, obj, _ = backend.subgrad_hinge(
        d.x, d.y, pen, prob.r, start, opts.max_iters, opts.rel_tol)
    return beta, float(obj)


def iht_warmstart(d: Dataset, s: int, lam: float,
                  opts: SolverOptions | None = None) -> Support:
    """Hard-thresholding iteration on h(b) = (||y - Xb||^2 + lam ||b||^2)/(2n),
    keeping the s largest entries of each gradient step; stops once the kept
    support repeats. Ties sort to the lowest index."""
    opts = opts or PGD_DEFAULTS
    if s > d.p:
        raise ValueError("s cannot exceed p")
    _check_finite(d)
    lip = lipschitz_constant(d, lam, np.ones(d.p), opts) * LIPSCHITZ_INFLATION
    beta = np.zeros(d.p)
    if lip == 0.0:
        return Support(())
    support: tuple[int, ...] | None = None
    for _ in range(opts.max_iters):
        grad = (d.x.T @ (d.x @ beta - d.y) + lam * beta) / d.n
        v = beta - grad / lip
        order = np.argsort(-np.abs(v), kind="stable")[:s]
        new_beta = np.zeros(d.p)
        new_beta[order] = v[order]
        new_support = tuple(sorted(int(i) for i in np.flatnonzero(new_beta)))
        beta = new_beta
        if new_support == support:
            break
        support = new_support
    return Support.from_zero_based(np.flatnonzero(beta))
