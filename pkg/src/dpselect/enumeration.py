"""Ranked support sequences consumed by the selection mechanisms.

Four routes produce them: sequential exclusion search (top_r), one solve per
Hamming-mistake class (mistakes), the large-R shortcut that scores the whole
one-mistake neighborhood directly (practical), and plain enumeration
(brute force, also the test oracle).

Every route hands the privacy layer the same quantity: the lam-free
r-constrained loss of each support. The lam-penalized surrogate steers the
search only; a diagnostics flag records whenever the two orderings disagree.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from dpselect.cuts import Cut
from dpselect.data import Dataset
from dpselect.milp import EnumerationCapExceeded, MasterInfeasible
from dpselect.oa import OAConfig, OAResult, oa_solve, warmstart_cuts
from dpselect.scores import ScoreEngine
from dpselect.solvers import SolverOptions
from dpselect.supports import Support

BRUTE_FORCE_CAP = 500_000


@dataclass(frozen=True)
class ScoredSupport:
    support: Support
    score: float
    penalized_score: float = math.nan


@dataclass
class EnumeratedSupports:
    items: tuple[ScoredSupport, ...]
    mode: str  # top_r | mistakes | practical
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.items = tuple(self.items)
        seen = [it.support.indices for it in self.items]
        if len(set(seen)) != len(seen):
            raise ValueError("enumerated supports must be pairwise distinct")
        if self.mode in ("top_r", "practical"):
            scores = [it.score for it in self.items]
            if any(b < a - 1e-9 for a, b in zip(scores, scores[1:])):
                raise ValueError("scores must be nondecreasing")

    def supports(self) -> list[Support]:
        return [it.support for it in self.items]

    def scores(self) -> np.ndarray:
        return np.array([it.score for it in self.items])


def _sorted_items(engine: ScoreEngine, supports) -> list[ScoredSupport]:
    items = [ScoredSupport(s, engine.score_constrained(s),
                           engine.penalized_support(s)) for s in supports]
    items.sort(key=lambda it: (it.score, it.support.indices))
    return items


def _rank_agreement(items) -> bool:
    by_pen = sorted(items, key=lambda it: (it.penalized_score, it.support.indices))
    return [it.support for it in by_pen] == [it.support for it in items]


def top_r_enumerate(d: Dataset, s: int, r: float, R: int, cfg: OAConfig,
                    loss: str = "ls", rng: np.random.Generator | None = None,
                    opts: SolverOptions | None = None) -> EnumeratedSupports:
    """The R best supports by repeated search with exclusion constraints."""
    if not 1 <= R < math.comb(d.p, s):
        raise ValueError("need 1 <= R < C(p, s)")
    rng = rng if rng is not None else np.random.default_rng(0)
    engine = ScoreEngine(d, r, cfg.lam, loss, opts)
    found: list[Support] = []
    pool: tuple[Cut, ...] = ()
    records: list[OAResult] = []
    for _ in range(R):
        res = oa_solve(d, s, r, tuple(found), cfg, loss=loss, warm_cuts=pool,
                       rng=rng, engine=engine)
        pool = res.cuts
        found.append(res.support)
        records.append(res)
    items = _sorted_items(engine, found)
    return EnumeratedSupports(tuple(items), "top_r", {
        "oa": records, "rank_agreement": _rank_agreement(items)})


def mistakes_enumerate(d: Dataset, s: int, r: float, cfg: OAConfig,
                       loss: str = "ls", rng: np.random.Generator | None = None,
                       opts: SolverOptions | None = None,
                       max_retries: int | None = None) -> EnumeratedSupports:
    """One optimal support per Hamming-mistake class 0..s. The class-k solve
    caps the overlap with the best support at s-k, which enforces *at least*
    k mistakes; a result landing in a higher class seeds that class and the
    solve retries with it excluded."""
    if s < 1:
        raise ValueError("s must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    engine = ScoreEngine(d, r, cfg.lam, loss, opts)
    max_retries = max_retries if max_retries is not None else 2 * s + 10

    res0 = oa_solve(d, s, r, (), cfg, loss=loss, rng=rng, engine=engine)
    s0 = res0.support
    reps: dict[int, Support] = {0: s0}
    records: list[OAResult] = [res0]
    pool = res0.cuts

    for k in range(1, s + 1):
        if math.comb(d.p - s, k) * math.comb(s, k) == 0:
            continue  # empty class (p - s < k)
        if k in reps:
            continue
        extra: list[Support] = []
        for attempt in range(max_retries + 1):
            if attempt == max_retries:
                reps[k] = _class_restricted_minimum(engine, s0, k)
                break
            res = oa_solve(d, s, r, tuple(extra), cfg, loss=loss,
                           warm_cuts=pool, rng=rng, engine=engine,
                           overlap_caps=((s0, s - k),))
            pool = res.cuts
            records.append(res)
            got = res.support.mistakes_from(s0)
            if got == k:
                reps[k] = res.support
                break
            if got > k and got not in reps:
                reps[got] = res.support
            extra.append(res.support)

    ordered = sorted(reps)
    items = tuple(
        ScoredSupport(reps[k], engine.score_constrained(reps[k]),
                      engine.penalized_support(reps[k]))
        for k in ordered)
    return EnumeratedSupports(items, "mistakes", {
        "oa": records, "classes": ordered})


def _class_restricted_minimum(engine: ScoreEngine, s0: Support, k: int) -> Support:
    """Direct search over the exact-k-mistake class, by the penalized
    objective with lexicographic ties (fallback when retries run out)."""
    import itertools

    p = engine.d.p
    inside = s0.zero_based.tolist()
    outside = [j for j in range(p) if j not in set(inside)]
    if math.comb(len(outside), k) * math.comb(len(inside), k) > BRUTE_FORCE_CAP:
        raise EnumerationCapExceeded("mistake class too large for direct search")
    best = None
    for drop in itertools.combinations(inside, k):
        kept = [i for i in inside if i not in set(drop)]
        for add in itertools.combinations(outside, k):
            cand = Support.from_zero_based(kept + list(add))
            key = (engine.penalized_support(cand), cand.indices)
            if best is None or key < best[0]:
                best = (key, cand)
    assert best is not None
    return best[1]


def practical_top_r(d: Dataset, s: int, r: float, cfg: OAConfig,
                    loss: str = "ls", rng: np.random.Generator | None = None,
                    m_pct: float = 10.0,
                    opts: SolverOptions | None = None) -> EnumeratedSupports:
    """Large-R shortcut: the best support, its entire one-mistake
    neighborhood scored by direct restricted solves, and the best support at
    two or more mistakes, for R = 2 + (p-s)s total."""
    if s < 2 or d.p < s + 2:
        raise ValueError("practical enumeration needs s >= 2 and p >= s + 2")
    rng = rng if rng is not None else np.random.default_rng(0)
    engine = ScoreEngine(d, r, cfg.lam, loss, opts)

    res1 = oa_solve(d, s, r, (), cfg, loss=loss, rng=rng, engine=engine)
    s1 = res1.support

    inside = s1.zero_based.tolist()
    outside = [j for j in range(d.p) if j not in set(inside)]
    one_mistake = [Support.from_zero_based([i for i in inside if i != drop] + [add])
                   for drop in inside for add in outside]
    one_pen = [engine.penalized_support(sup) for sup in one_mistake]

    warm = warmstart_cuts(d, s1, m_pct, cfg, r, loss, rng, engine=engine)
    res2 = oa_solve(d, s, r, (), cfg, loss=loss, warm_cuts=res1.cuts + warm,
                    rng=rng, engine=engine, overlap_caps=((s1, s - 2),))

    # the one-mistake neighborhood should dominate everything further out
    neighborhood_ok = max(one_pen) <= res2.objective + 1e-9

    items = _sorted_items(engine, [s1] + one_mistake + [res2.support])
    return EnumeratedSupports(tuple(items), "practical", {
        "oa": [res1, res2],
        "neighborhood_ok": bool(neighborhood_ok),
        "rank_agreement": _rank_agreement(items)})


def brute_force_enumerate(d: Dataset, s: int, r: float, R: int | None = None,
                          loss: str = "ls", cap: int = BRUTE_FORCE_CAP,
                          cfg: OAConfig | None = None,
                          opts: SolverOptions | None = None) -> EnumeratedSupports:
    """Exact top-R by scoring every size-s support; mode follows top_r."""
    import itertools

    total = math.comb(d.p, s)
    if total > cap:
        raise EnumerationCapExceeded(f"C(p, s) = {total} exceeds cap {cap}")
    R = total if R is None else R
    if not 1 <= R <= total:
        raise ValueError("need 1 <= R <= C(p, s)")
    lam = cfg.lam if cfg is not None else 0.0
    engine = ScoreEngine(d, r, lam, loss, opts)
    scored = []
    for combo in itertools.combinations(range(d.p), s):
        sup = Support.from_zero_based(combo)
        pen = engine.penalized_support(sup) if cfg is not None else math.nan
        scored.append(ScoredSupport(sup, engine.score_constrained(sup), pen))
    scored.sort(key=lambda it: (it.score, it.support.indices))
    return EnumeratedSupports(tuple(scored[:R]), "top_r", {"total": total})


def write_enumeration(path, enum: EnumeratedSupports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "indices", "score"])
        for rank, it in enumerate(enum.items, start=1):
            writer.writerow([rank, ";".join(str(i) for i in it.support),
                             repr(it.score)])


__all__ = [
    "Support", "ScoredSupport", "EnumeratedSupports", "top_r_enumerate",
    "mistakes_enumerate", "practical_top_r", "brute_force_enumerate",
    "write_enumeration", "MasterInfeasible",
]
