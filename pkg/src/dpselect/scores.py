"""Cached scoring of supports and weighted relaxations on one dataset.

The engine precomputes the Gram matrix once, so restricted solves (the score
of a single support) touch only an s-by-s submatrix, and reuses a global
Lipschitz bound lam_max(X'X)/n + lam/(n * min zhat) valid for every weighted
subproblem. All values are cached by support, which keeps repeated
enumeration passes and the exhaustive oracles cheap.
"""

from __future__ import annotations

import numpy as np

from dpselect import backend
from dpselect.cuts import Cut
from dpselect.data import Dataset
from dpselect.solvers import (LIPSCHITZ_INFLATION, PGD_DEFAULTS,
                              SUBGRAD_DEFAULTS, SolverOptions)
from dpselect.supports import Support


def lift_binary(z: np.ndarray, a: float, b: float,
                rng: np.random.Generator) -> np.ndarray:
    """zhat_i = 1 where z_i = 1, otherwise z_i + Unif[a, b]."""
    z = np.asarray(z, dtype=np.float64)
    return np.where(z == 1.0, 1.0, z + rng.uniform(a, b, z.shape[0]))


class ScoreEngine:
    def __init__(self, dataset: Dataset, r: float, lam: float, loss: str = "ls",
                 opts: SolverOptions | None = None):
        if loss not in ("ls", "hinge"):
            raise ValueError(f"unknown loss {loss!r}")
        self.d = dataset
        self.r = float(r)
        self.lam = float(lam)
        self.loss = loss
        if loss == "ls":
            self.opts = opts or PGD_DEFAULTS
        else:
            self.opts = opts or SUBGRAD_DEFAULTS
            if not np.all(np.isin(dataset.y, (-1.0, 1.0))):
                raise ValueError("hinge labels must be in {-1, +1}")
        self._score_cache: dict[tuple[int, ...], float] = {}
        self._pen_cache: dict[tuple[int, ...], float] = {}
        self._warm: dict[str, np.ndarray] = {}
        if loss == "ls":
            self.gram = dataset.x.T @ dataset.x
            self.xty = dataset.x.T @ dataset.y
            self.yty = float(dataset.y @ dataset.y)
            self.gram_lam_max = float(np.linalg.eigvalsh(self.gram)[-1]) if dataset.p else 0.0

    # -- restricted solves ------------------------------------------------

    def _solve_restricted_ls(self, idx: np.ndarray, lam: float) -> float:
        """Minimum of ||y - X_S b||^2/(2n) + (lam/2n)||b||^2 over the r-ball."""
        n = self.d.n
        gram_s = np.ascontiguousarray(self.gram[np.ix_(idx, idx)])
        xty_s = np.ascontiguousarray(self.xty[idx])
        pen = np.full(len(idx), lam / n)
        lip = (self.gram_lam_max + lam) / n * LIPSCHITZ_INFLATION
        if lip <= 0.0:
            return self.yty / (2.0 * n)
        _, obj, _ = backend.pgd_ridge_gram(
            gram_s, xty_s, self.yty, float(n), pen, self.r,
            np.zeros(len(idx)), self.opts.max_iters, self.opts.rel_tol,
            1.0 / lip)
        return float(obj)

    def _solve_restricted_hinge(self, idx: np.ndarray, lam: float) -> float:
        n = self.d.n
        x_s = np.ascontiguousarray(self.d.x[:, idx])
        pen = np.full(len(idx), lam / n)
        _, obj, _ = backend.subgrad_hinge(
            x_s, self.d.y, pen, self.r, np.zeros(len(idx)),
            self.opts.max_iters, self.opts.rel_tol)
        return float(obj)

    def score_constrained(self, support: Support) -> float:
        """R(S, D): the lam-free r-constrained loss restricted to S
        (raw residual sum of squares for least squares, mean hinge loss)."""
        key = support.indices
        if key not in self._score_cache:
            idx = support.zero_based
            if self.loss == "ls":
                val = 2.0 * self.d.n * self._solve_restricted_ls(idx, 0.0)
            else:
                val = self._solve_restricted_hinge(idx, 0.0)
            self._score_cache[key] = val
        return self._score_cache[key]

    def penalized_support(self, support: Support) -> float:
        """The penalized objective at the binary indicator of S: off-support
        coefficients are pinned to zero, on-support weights are one."""
        key = support.indices
        if key not in self._pen_cache:
            idx = support.zero_based
            if self.loss == "ls":
                val = self._solve_restricted_ls(idx, self.lam)
            else:
                val = self._solve_restricted_hinge(idx, self.lam)
            self._pen_cache[key] = val
        return self._pen_cache[key]

    # -- lifted solves -----------------------------------------------------

    def penalized_lifted(self, zhat: np.ndarray, warm_key: str | None = None
                         ) -> tuple[float, np.ndarray, np.ndarray]:
        """Value, Danskin gradient, and inner minimizer of the weighted
        relaxation at interior weights zhat."""
        zhat = np.asarray(zhat, dtype=np.float64)
        n, p = self.d.n, self.d.p
        start = np.zeros(p)
        if warm_key is not None and warm_key in self._warm:
            start = self._warm[warm_key]
        if self.loss == "ls":
            pen = self.lam / (n * zhat)
            lip = (self.gram_lam_max / n + pen.max()) * LIPSCHITZ_INFLATION
            if lip <= 0.0:
                beta = start
                obj = self.yty / (2.0 * n)
            else:
                beta, obj, _ = backend.pgd_ridge_gram(
                    self.gram, self.xty, self.yty, float(n), pen, self.r,
                    start, self.opts.max_iters, self.opts.rel_tol, 1.0 / lip)
            grad = -(self.lam / (2.0 * n)) * (beta / zhat) ** 2
        else:
            pen = self.lam / (n * zhat)
            beta, obj, _ = backend.subgrad_hinge(
                self.d.x, self.d.y, pen, self.r, start,
                self.opts.max_iters, self.opts.rel_tol)
            grad = -(self.lam / n) * (beta / zhat) ** 2
        if warm_key is not None:
            self._warm[warm_key] = np.array(beta)
        return float(obj), np.minimum(grad, 0.0), beta

    def cut_at(self, support: Support, cfg, rng: np.random.Generator,
               warm_key: str | None = "oa") -> tuple[Cut, float]:
        """Noise-lift the binary indicator of S and build the cut anchored
        there; returns (cut, lifted value)."""
        zhat = lift_binary(support.mask(self.d.p), cfg.a, cfg.b, rng)
        val, grad, _ = self.penalized_lifted(zhat, warm_key=warm_key)
        return Cut(value=val, gradient=grad, anchor=zhat), val
