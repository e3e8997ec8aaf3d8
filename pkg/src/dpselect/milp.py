"""Exact solver for the outer-approximation master problem

    min_{z, eta}  eta
    s.t.          eta >= cut_k(z)                 for every accumulated cut
                  sum_i z_i <= s
                  sum_{i in S_j} z_i <= s - 1     for every excluded support
                  sum_{i in T} z_i <= cap         for every overlap cap
                  z binary

via best-first branch-and-bound on the LP relaxation, with a direct
enumeration path at small sizes and as a test oracle.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from dpselect.cuts import Cut
from dpselect.simplex import solve_lp
from dpselect.supports import Support

INT_TOL = 1e-6
EXHAUSTIVE_THRESHOLD = 5_000
ENUM_CAP = 2_000_000


class MasterInfeasible(RuntimeError):
    """No binary point satisfies the cardinality/exclusion constraints."""


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class MasterProblem:
    p: int
    s: int
    cuts: tuple[Cut, ...]
    exclusions: tuple[Support, ...] = ()
    overlap_caps: tuple[tuple[Support, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cuts", tuple(self.cuts))
        object.__setattr__(self, "exclusions", tuple(self.exclusions))
        object.__setattr__(self, "overlap_caps", tuple(self.overlap_caps))
        if not self.cuts:
            raise ValueError("master problem needs at least one cut")
        if not 1 <= self.s <= self.p:
            raise ValueError("need 1 <= s <= p")
        for excl in self.exclusions:
            if len(excl) != self.s:
                raise ValueError("exclusions must have size s")
        for cut in self.cuts:
            if cut.gradient.shape != (self.p,):
                raise ValueError("cut dimension mismatch")


@dataclass
class MilpSolution:
    z: np.ndarray
    eta: float                  # max over cuts of the affine value at z
    node_count: int
    proven_optimal: bool        # search tree exhausted
    lower_bound: float = -np.inf  # valid bound on the binary optimum; eta when proven

    def __post_init__(self):
        if self.proven_optimal and not np.isfinite(self.lower_bound):
            self.lower_bound = self.eta

    @property
    def support(self) -> Support:
        return Support.from_zero_based(np.flatnonzero(self.z > 0.5))


def _cut_arrays(mp: MasterProblem):
    grads = np.vstack([c.gradient for c in mp.cuts])
    offsets = np.array([c.offset for c in mp.cuts])
    return grads, offsets


def cutmax(mp: MasterProblem, z: np.ndarray) -> float:
    grads, offsets = _cut_arrays(mp)
    return float(np.max(offsets + grads @ z))


def _feasible(mp: MasterProblem, members: frozenset[int]) -> bool:
    """members: 0-based index set."""
    if len(members) > mp.s:
        return False
    for excl in mp.exclusions:
        if len(members & set(excl.zero_based.tolist())) > mp.s - 1:
            return False
    for supp, cap in mp.overlap_caps:
        if len(members & set(supp.zero_based.tolist())) > cap:
            return False
    return True


def solve_master_exhaustive(mp: MasterProblem, cap: int = ENUM_CAP) -> MilpSolution:
    """Enumerate every support of size <= s; ties go to the lexicographically
    smallest index tuple (combinations are generated in that order)."""
    total = sum(math.comb(mp.p, t) for t in range(mp.s + 1))
    if total > cap:
        raise EnumerationCapExceeded(f"C(p, <=s) = {total} exceeds cap {cap}")
    grads, offsets = _cut_arrays(mp)
    best_eta = np.inf
    best_members: tuple[int, ...] | None = None

    excl_sets = [frozenset(e.zero_based.tolist()) for e in mp.exclusions]
    cap_sets = [(frozenset(t.zero_based.tolist()), c) for t, c in mp.overlap_caps]
    for size in range(mp.s, -1, -1):
        for combo in itertools.combinations(range(mp.p), size):
            cs = frozenset(combo)
            if any(len(cs & e) > mp.s - 1 for e in excl_sets):
                continue
            if any(len(cs & t) > c for t, c in cap_sets):
                continue
            eta = float(np.max(offsets + grads[:, combo].sum(axis=1))) if combo \
                else float(np.max(offsets))
            if eta < best_eta:
                best_eta = eta
                best_members = combo
    if best_members is None:
        raise MasterInfeasible("exclusions exhaust the feasible set")
    z = np.zeros(mp.p)
    z[list(best_members)] = 1.0
    return MilpSolution(z=z, eta=best_eta, node_count=0, proven_optimal=True)


@dataclass(order=True)
class _Node:
    bound: float
    counter: int
    fixed0: frozenset[int] = field(compare=False)
    fixed1: frozenset[int] = field(compare=False)


def _build_lp(mp: MasterProblem):
    grads, offsets = _cut_arrays(mp)
    n_cuts = grads.shape[0]
    rows = []
    rhs = []
    # cut rows: -eta + g'z <= -offset
    for k in range(n_cuts):
        rows.append(np.concatenate([grads[k], [-1.0]]))
        rhs.append(-offsets[k])
    card = np.concatenate([np.ones(mp.p), [0.0]])
    rows.append(card)
    rhs.append(float(mp.s))
    for excl in mp.exclusions:
        row = np.concatenate([excl.mask(mp.p), [0.0]])
        rows.append(row)
        rhs.append(float(mp.s - 1))
    for supp, capval in mp.overlap_caps:
        row = np.concatenate([supp.mask(mp.p), [0.0]])
        rows.append(row)
        rhs.append(float(capval))
    a = np.vstack(rows)
    b = np.array(rhs)
    c = np.concatenate([np.zeros(mp.p), [1.0]])
    eta_hi = float(np.max(offsets)) + 1.0
    eta_lo = float(np.min(offsets + grads.sum(axis=1))) - 1.0
    return a, b, c, eta_lo, eta_hi


def _node_lp(mp, a, b, c, eta_lo, eta_hi, fixed0, fixed1):
    lower = np.zeros(mp.p + 1)
    upper = np.ones(mp.p + 1)
    lower[-1], upper[-1] = eta_lo, eta_hi
    for i in fixed0:
        upper[i] = 0.0
    for i in fixed1:
        lower[i] = 1.0
    start_upper = np.zeros(mp.p + 1, dtype=bool)
    start_upper[-1] = True
    for i in fixed1:
        start_upper[i] = True
    return solve_lp(c, a, b, lower, upper, start_upper=start_upper)


def _greedy_incumbent(mp: MasterProblem, z_relaxed: np.ndarray):
    order = np.lexsort((np.arange(mp.p), -z_relaxed))
    members: set[int] = set()
    for i in order:
        if len(members) == mp.s:
            break
        trial = frozenset(members | {int(i)})
        if _feasible(mp, trial):
            members.add(int(i))
    if not _feasible(mp, frozenset(members)):
        return None
    z = np.zeros(mp.p)
    z[sorted(members)] = 1.0
    return z


class _CheapBound:
    """Per-node combinatorial relaxation: each cut's value is at least
    offset + (gradients of forced indices) + (sum of the most negative free
    gradients that fit the remaining cardinality); the max over cuts lower
    bounds the node. Ignores exclusions and caps, so it is valid (weaker
    than the LP) and costs O(cuts * prefix) per node."""

    def __init__(self, mp: MasterProblem):
        self.grads, self.offsets = _cut_arrays(mp)
        self.order = np.argsort(self.grads, axis=1, kind="stable")
        self.s = mp.s

    def bound(self, fixed0: frozenset[int], fixed1: frozenset[int]) -> float:
        best = -np.inf
        room = self.s - len(fixed1)
        for k in range(self.grads.shape[0]):
            val = self.offsets[k] + sum(self.grads[k, i] for i in fixed1)
            taken = 0
            for i in self.order[k]:
                if taken == room:
                    break
                g = self.grads[k, int(i)]
                if g >= 0.0:
                    break
                if int(i) in fixed1 or int(i) in fixed0:
                    continue
                val += g
                taken += 1
            if val > best:
                best = val
        return float(best)


def solve_master(mp: MasterProblem,
                 exhaustive_threshold: int = EXHAUSTIVE_THRESHOLD,
                 node_limit: int | None = None) -> MilpSolution:
    """Best-first branch and bound. With a node_limit the search may stop
    early: the incumbent is still feasible and lower_bound is still a valid
    bound on the binary optimum, but proven_optimal is False."""
    if math.comb(mp.p, mp.s) <= exhaustive_threshold:
        return solve_master_exhaustive(mp)

    a, b, c, eta_lo, eta_hi = _build_lp(mp)
    cheap = _CheapBound(mp)
    counter = itertools.count()
    incumbent_z: np.ndarray | None = None
    incumbent_eta = np.inf
    node_count = 0
    pruned_bound = np.inf  # min bound among nodes cut off by the node limit

    root = _Node(cheap.bound(frozenset(), frozenset()), next(counter),
                 frozenset(), frozenset())
    heap = [root]
    while heap:
        node = heapq.heappop(heap)
        if node.bound >= incumbent_eta - 1e-9:
            continue
        if node_limit is not None and node_count >= node_limit:
            pruned_bound = min(pruned_bound, node.bound)
            continue
        if not _feasible(mp, node.fixed1):
            continue
        res = _node_lp(mp, a, b, c, eta_lo, eta_hi, node.fixed0, node.fixed1)
        node_count += 1
        z = res.x[:-1]
        bound = max(res.objective, node.bound)
        if bound >= incumbent_eta - 1e-9:
            continue
        if incumbent_z is None and node_count == 1:
            seed = _greedy_incumbent(mp, z)
            if seed is not None:
                incumbent_z = seed
                incumbent_eta = cutmax(mp, seed)
        frac = np.abs(z - np.round(z))
        if np.max(frac) <= INT_TOL:
            zi = np.round(z)
            members = frozenset(int(i) for i in np.flatnonzero(zi > 0.5))
            if _feasible(mp, members):
                eta = cutmax(mp, zi)
                if eta < incumbent_eta - 1e-12:
                    incumbent_eta = eta
                    incumbent_z = zi
            continue
        # dive on the most promising variable: largest fractional value
        branch_candidates = np.flatnonzero(frac > INT_TOL)
        j = int(branch_candidates[np.argmax(z[branch_candidates])])
        for child_fixed0, child_fixed1 in (
            (node.fixed0, node.fixed1 | {j}),
            (node.fixed0 | {j}, node.fixed1),
        ):
            child_bound = max(bound, cheap.bound(child_fixed0, child_fixed1))
            if child_bound < incumbent_eta - 1e-9:
                heapq.heappush(heap, _Node(child_bound, next(counter),
                                           child_fixed0, child_fixed1))

    if incumbent_z is None:
        raise MasterInfeasible("no feasible binary point found")
    proven = not np.isfinite(pruned_bound)
    lower = float(incumbent_eta) if proven else float(min(pruned_bound, incumbent_eta))
    return MilpSolution(z=incumbent_z, eta=float(incumbent_eta),
                        node_count=node_count, proven_optimal=proven,
                        lower_bound=lower)


def pad_to_cardinality(mp: MasterProblem, members: set[int]) -> set[int]:
    """Fill a size-<s index set up to size s with the lowest feasible
    indices. Cuts have nonpositive gradients, so filling unused slots never
    raises the master objective."""
    members = set(members)
    for i in range(mp.p):
        if len(members) == mp.s:
            break
        if i in members:
            continue
        if _feasible(mp, frozenset(members | {i})):
            members.add(i)
    return members
