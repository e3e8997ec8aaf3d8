"""Outer-approximation search for the best penalized sparse support.

The penalized objective

    c(z) = min_{||b||^2 <= r^2}  loss(b) + penalty(b, z)

is convex on (0,1]^p; its value and Danskin gradient at a noise-lifted
binary point yield an affine global under-estimator (a cut). The loop
alternates between evaluating the current candidate (one inner solve at the
noisy lift, reused for the cut) and minimizing the accumulated piecewise
linear model over the constrained binaries with the bundled MILP solver.

Two refinements on top of the plain cutting-plane loop keep the search
finite and its answer exact:

* every evaluated candidate also gets a deterministic noise-free score (the
  penalized objective restricted to its support), and the incumbent is the
  best such score seen;
* evaluated size-s candidates are excluded from later master problems, so
  each iteration either proves termination or produces a fresh candidate.

Termination: relative gap (incumbent - master bound) / incumbent <= tol, or
the master runs out of candidates (gap 0: the whole feasible set was
scored). With tol = 0 the returned support is the exact penalized minimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dpselect.cuts import Cut
from dpselect.data import Dataset
from dpselect.milp import (MasterInfeasible, MasterProblem, pad_to_cardinality,
                           solve_master)
from dpselect.scores import ScoreEngine, lift_binary
from dpselect.solvers import SolverOptions, iht_warmstart
from dpselect.supports import Support


class OANotConverged(RuntimeError):
    """Iteration budget exhausted before the gap certificate reached tol."""

    def __init__(self, message, support, objective, gap):
        super().__init__(message)
        self.support = support
        self.objective = objective
        self.gap = gap


@dataclass(frozen=True)
class OAConfig:
    lam: float
    a: float = 0.001
    b: float = 0.005
    tol: float = 0.005
    max_oa_iters: int = 500

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if not 0.0 < self.a <= self.b < 1.0:
            raise ValueError("need 0 < a <= b < 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.max_oa_iters < 1:
            raise ValueError("max_oa_iters must be >= 1")


@dataclass
class OAResult:
    support: Support
    objective: float          # noise-free penalized value at the support
    lifted_objective: float   # c at the noisy lift, per the loop's flow
    certificate_gap: float
    iterations: int
    cuts: tuple[Cut, ...]
    trace: list = field(default_factory=list)


def add_noise(z: np.ndarray, cfg: OAConfig, rng: np.random.Generator) -> np.ndarray:
    """Lift a binary vector into (0,1]^p: ones stay, zeros move to [a, b]."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isin(z, (0.0, 1.0))):
        raise ValueError("z must be binary")
    return lift_binary(z, cfg.a, cfg.b, rng)


def penalized_value_and_gradient(d: Dataset, zhat: np.ndarray, cfg: OAConfig,
                                 r: float, loss: str = "ls",
                                 opts: SolverOptions | None = None
                                 ) -> tuple[float, np.ndarray]:
    zhat = np.asarray(zhat, dtype=np.float64)
    if np.any(zhat <= 0) or np.any(zhat > 1):
        raise ValueError("zhat must lie in (0, 1]^p")
    engine = ScoreEngine(d, r, cfg.lam, loss, opts)
    value, grad, _ = engine.penalized_lifted(zhat, warm_key=None)
    return value, grad


def warmstart_cuts(d: Dataset, s_hat1: Support, m_pct: float, cfg: OAConfig,
                   r: float, loss: str = "ls",
                   rng: np.random.Generator | None = None,
                   engine: ScoreEngine | None = None) -> tuple[Cut, ...]:
    """One-swap cuts around the best support: pool the top m% of features by
    |X'y| (minus the support itself) and anchor one cut at every support
    obtained by swapping one selected index for one pool feature."""
    if not 0.0 < m_pct <= 100.0:
        raise ValueError("m_pct must lie in (0, 100]")
    rng = rng if rng is not None else np.random.default_rng(0)
    engine = engine or ScoreEngine(d, r, cfg.lam, loss)
    k = int(round(d.p * m_pct / 100.0))
    xty_order = np.argsort(-np.abs(d.x.T @ d.y), kind="stable")[:k]
    selected = set(s_hat1.zero_based.tolist())
    pool = [int(j) for j in xty_order if int(j) not in selected]
    cuts = []
    for i in sorted(selected):
        for j in pool:
            swapped = sorted((selected - {i}) | {j})
            cut, _ = engine.cut_at(Support.from_zero_based(swapped), cfg, rng,
                                   warm_key="warm")
            cuts.append(cut)
    return tuple(cuts)


MAX_MASTER_CUTS = 80  # older cuts are dropped from the master (still valid to drop)
MASTER_NODE_LIMIT = 2_000


def _next_candidate(p: int, s: int, cuts, exclusions, overlap_caps, dead_caps,
                    node_limit: int | None = MASTER_NODE_LIMIT):
    """Solve the master and lift its solution to a fresh size-s support.

    A solution whose padding stalls below size s has no feasible size-s
    superset at all (constraint violations only grow with the set), so it is
    capped out via dead_caps and the master re-solved. Returns
    (support, eta) or (None, None) once the feasible set is exhausted; eta
    is a valid lower bound on the constrained binary optimum even when the
    node budget truncates the search."""
    cuts = tuple(cuts)[-MAX_MASTER_CUTS:]
    while True:
        mp = MasterProblem(p, s, cuts, tuple(exclusions),
                           tuple(overlap_caps) + tuple(dead_caps))
        try:
            sol = solve_master(mp, node_limit=node_limit)
        except MasterInfeasible:
            return None, None
        members = set(int(i) for i in np.flatnonzero(sol.z > 0.5))
        if len(members) < s:
            members = pad_to_cardinality(mp, members)
        if len(members) == s:
            return Support.from_zero_based(members), sol.lower_bound
        if not members:
            return None, None
        dead_caps.append((Support.from_zero_based(members), len(members) - 1))


def _ranking_cut(d: Dataset) -> Cut:
    """Synthetic cut whose master optimum is the feasible support with the
    largest total |X'y|; used only to pick starting points."""
    strength = np.abs(d.x.T @ d.y)
    return Cut(value=0.0, gradient=-strength, anchor=np.ones(d.p))


def _initial_support(d: Dataset, s: int, exclusions, overlap_caps,
                     cfg: OAConfig, loss: str) -> Support:
    """IHT seed (least squares) or |X'y| ranking (hinge), greedily repaired
    to satisfy the exclusion and overlap constraints; falls back to an exact
    master solve when the greedy repair cannot reach size s."""
    preferred: list[int] = []
    if loss == "ls":
        preferred = list(iht_warmstart(d, s, cfg.lam).zero_based)
    ranking = np.argsort(-np.abs(d.x.T @ d.y), kind="stable")
    order = preferred + [int(j) for j in ranking if int(j) not in set(preferred)]

    excl_sets = [set(e.zero_based.tolist()) for e in exclusions]
    cap_sets = [(set(t.zero_based.tolist()), c) for t, c in overlap_caps]

    def feasible(members: set[int]) -> bool:
        if any(len(members & e) > s - 1 for e in excl_sets):
            return False
        return not any(len(members & t) > c for t, c in cap_sets)

    members: set[int] = set()
    for j in order:
        if len(members) == s:
            break
        if feasible(members | {int(j)}):
            members.add(int(j))
    if len(members) == s:
        return Support.from_zero_based(members)
    candidate, _ = _next_candidate(d.p, s, (_ranking_cut(d),), exclusions,
                                   overlap_caps, [])
    if candidate is None:
        raise MasterInfeasible("no feasible starting support")
    return candidate


def oa_solve(d: Dataset, s: int, r: float, exclusions, cfg: OAConfig,
             loss: str = "ls", warm_cuts=(), rng: np.random.Generator | None = None,
             overlap_caps=(), engine: ScoreEngine | None = None,
             z0: Support | None = None, keep_trace: bool = False) -> OAResult:
    rng = rng if rng is not None else np.random.default_rng(0)
    engine = engine or ScoreEngine(d, r, cfg.lam, loss)
    exclusions = tuple(exclusions)
    overlap_caps = tuple(overlap_caps)

    if len(set(e.indices for e in exclusions)) >= math.comb(d.p, s):
        raise MasterInfeasible("exclusions exhaust all size-s supports")

    candidate = z0 if z0 is not None else _initial_support(
        d, s, exclusions, overlap_caps, cfg, loss)
    proposed_eta: float | None = None  # master bound that proposed the candidate
    cuts: list[Cut] = list(warm_cuts)
    visited: list[Support] = []  # evaluated size-s candidates, kept out of the master
    dead_caps: list[tuple[Support, int]] = []
    incumbent: Support | None = None
    incumbent_val = np.inf
    incumbent_lift = np.nan
    trace: list[dict] = []
    certificate = np.inf
    converged = False

    for iteration in range(1, cfg.max_oa_iters + 1):
        cut, lifted = engine.cut_at(candidate, cfg, rng)
        cuts.append(cut)
        exact_val = engine.penalized_support(candidate)
        if len(candidate) == s:
            visited.append(candidate)
        if (exact_val, candidate.indices) < (incumbent_val,
                                             incumbent.indices if incumbent else ()):
            incumbent = candidate
            incumbent_val = exact_val
            incumbent_lift = lifted
        if keep_trace:
            trace.append({"iter": iteration, "candidate": candidate,
                          "c_bin": exact_val, "c_lift": lifted,
                          "eta": proposed_eta})

        # the model predicted proposed_eta for this candidate; a tight match
        # means further cuts cannot move the optimum beyond tol
        if proposed_eta is not None:
            model_gap = (exact_val - proposed_eta) / max(abs(exact_val), 1e-12)
            if model_gap <= cfg.tol:
                converged = True
                certificate = max(0.0, (incumbent_val - proposed_eta)
                                  / max(abs(incumbent_val), 1e-12))
                break

        nxt, eta = _next_candidate(d.p, s, cuts,
                                   exclusions + tuple(visited),
                                   overlap_caps, dead_caps)
        if nxt is None:
            converged = True  # every feasible support was evaluated
            certificate = 0.0
            break
        bound_gap = (incumbent_val - eta) / max(abs(incumbent_val), 1e-12)
        if bound_gap <= cfg.tol:
            converged = True
            certificate = max(0.0, bound_gap)
            break
        candidate, proposed_eta = nxt, eta

    assert incumbent is not None
    if not converged:
        certificate = max(0.0, (incumbent_val - proposed_eta)
                          / max(abs(incumbent_val), 1e-12)) \
            if proposed_eta is not None else np.inf
        raise OANotConverged(
            f"outer approximation did not certify tol={cfg.tol} within "
            f"{cfg.max_oa_iters} iterations (gap {certificate:.3g})",
            incumbent, incumbent_val, certificate)
    return OAResult(support=incumbent, objective=incumbent_val,
                    lifted_objective=incumbent_lift,
                    certificate_gap=certificate, iterations=iteration,
                    cuts=tuple(cuts), trace=trace)
