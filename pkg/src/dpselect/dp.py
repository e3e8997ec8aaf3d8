"""Selection mechanisms and their privacy accounting.

Both mechanisms are exponential-mechanism variants over size-s supports,
driven by the r-constrained loss R(S, D) and its global sensitivity bound:

* top-R: explicit weights on the R best supports plus one residual bucket
  weighted as if every remaining support scored like the R-th best; a draw
  landing in the bucket is realized by uniform rejection sampling.
* mistakes: one weight per Hamming-mistake class (the class minimum scores
  the whole class), uniform within a class.

Everything probability-shaped is computed in log space with a max shift;
binomial counts use exact integer arithmetic. The exact exponential
mechanism over a full score table doubles as the reference law for the
audits and the sampler fidelity tests.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from dpselect.data import DataBounds, Dataset, clip_dataset
from dpselect.enumeration import EnumeratedSupports
from dpselect.scores import ScoreEngine
from dpselect.solvers import SolverOptions
from dpselect.supports import Support

AUDIT_CAP = 200_000


@dataclass(frozen=True)
class SensitivityBound:
    delta: float
    loss: str
    b_x: float
    b_y: float
    r: float
    s: int
    n: int | None = None

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")


def sensitivity_ls(bounds: DataBounds, r: float, s: int) -> SensitivityBound:
    """Worst-case change of the constrained residual sum of squares when one
    row is replaced: 2 b_y^2 + 2 b_x^2 r^2 s."""
    delta = 2.0 * bounds.b_y ** 2 + 2.0 * bounds.b_x ** 2 * r ** 2 * s
    return SensitivityBound(delta, "ls", bounds.b_x, bounds.b_y, r, s)


def sensitivity_hinge(bounds: DataBounds, r: float, s: int, n: int) -> SensitivityBound:
    """Mean hinge analog: (1 + r b_x sqrt(s)) / n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    delta = (1.0 + r * bounds.b_x * math.sqrt(s)) / n
    return SensitivityBound(delta, "hinge", bounds.b_x, bounds.b_y, r, s, n)


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    T: float  # rounds of rejection sampling; math.inf allowed
    R: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.R < 1:
            raise ValueError("R must be >= 1")


@dataclass
class SelectionDistribution:
    weights: np.ndarray
    kind: str                          # top_r | mistakes | table
    outcomes: tuple                    # Support per slot; None marks the residual bucket
    classes: tuple[int, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        self.weights = w


def _normalized(log_w: np.ndarray) -> np.ndarray:
    shifted = log_w - log_w.max()
    w = np.exp(shifted)
    return w / w.sum()


def _draw_slot(weights: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(weights)
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


def build_p0(enumerated: EnumeratedSupports, delta: float, epsilon: float,
             p: int, s: int) -> SelectionDistribution:
    """Explicit selection weights over the R enumerated supports plus the
    residual bucket, which stands in for the C(p,s) - R remaining supports
    at the R-th best score."""
    if enumerated.mode not in ("top_r", "practical"):
        raise ValueError("build_p0 expects a top-R style enumeration")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    total = math.comb(p, s)
    big_r = len(enumerated.items)
    if big_r >= total:
        raise ValueError("R must be smaller than C(p, s)")
    scores = enumerated.scores()
    log_w = -epsilon * scores / (2.0 * delta)
    log_residual = math.log(total - big_r) - epsilon * scores[-1] / (2.0 * delta)
    weights = _normalized(np.concatenate([log_w, [log_residual]]))
    return SelectionDistribution(weights, "top_r",
                                 tuple(enumerated.supports()) + (None,))


def sample_uniform_support(p: int, s: int, rng: np.random.Generator) -> Support:
    """Floyd's algorithm: a uniform size-s subset of [p] without
    materializing the outcome set."""
    chosen: set[int] = set()
    for j in range(p - s + 1, p + 1):
        t = int(rng.integers(1, j + 1))
        chosen.add(j if t in chosen else t)
    return Support(tuple(sorted(chosen)))


def sample_top_r(enumerated: EnumeratedSupports, dist: SelectionDistribution,
                 T: float, p: int, s: int, rng: np.random.Generator) -> Support:
    """Draw a slot; an enumerated slot returns its support, the residual
    bucket rejection-samples uniform supports until one falls outside the
    enumerated set (at most T rounds; the final draw is returned even if
    every round landed inside)."""
    if dist.kind != "top_r":
        raise ValueError("distribution was not built by build_p0")
    slot = _draw_slot(dist.weights, rng)
    big_r = len(enumerated.items)
    if slot < big_r:
        return enumerated.items[slot].support
    top_set = {it.support.indices for it in enumerated.items}
    rounds = 0
    while True:
        draw = sample_uniform_support(p, s, rng)
        rounds += 1
        if draw.indices not in top_set or rounds >= T:
            return draw


def class_size(p: int, s: int, k: int) -> int:
    return math.comb(p - s, k) * math.comb(s, k)


def mistakes_distribution(enumerated: EnumeratedSupports, delta: float,
                          epsilon: float, p: int, s: int) -> SelectionDistribution:
    """Class k gets total mass proportional to |P_k| exp(-eps score_k/(2 delta))
    with |P_k| = C(p-s, k) C(s, k)."""
    if enumerated.mode != "mistakes":
        raise ValueError("mistakes_distribution expects a mistakes enumeration")
    classes = tuple(enumerated.diagnostics.get(
        "classes", range(len(enumerated.items))))
    scores = enumerated.scores()
    log_w = np.array([
        math.log(class_size(p, s, k)) - epsilon * score / (2.0 * delta)
        for k, score in zip(classes, scores)])
    weights = _normalized(log_w)
    return SelectionDistribution(weights, "mistakes",
                                 tuple(enumerated.supports()), classes)


def sample_mistakes(enumerated: EnumeratedSupports, dist: SelectionDistribution,
                    p: int, s: int, rng: np.random.Generator) -> Support:
    """Draw a class, then a uniform member of it: drop k indices of the best
    support and add k from outside, both uniformly."""
    if dist.kind != "mistakes":
        raise ValueError("distribution was not built by mistakes_distribution")
    slot = _draw_slot(dist.weights, rng)
    k = dist.classes[slot]
    s0 = enumerated.items[0].support
    if k == 0:
        return s0
    inside = list(s0.zero_based)
    outside = [j for j in range(p) if j not in set(inside)]
    keep = rng.choice(len(inside), size=len(inside) - k, replace=False)
    add = rng.choice(len(outside), size=k, replace=False)
    members = [inside[i] for i in keep] + [outside[j] for j in add]
    return Support.from_zero_based(members)


def exact_exponential_mechanism(score_table, delta: float,
                                epsilon: float) -> SelectionDistribution:
    """The exact normalized law over a full score table; outcomes ordered
    lexicographically by support."""
    if isinstance(score_table, dict):
        pairs = sorted(score_table.items(), key=lambda kv: kv[0].indices)
    else:
        pairs = sorted(score_table, key=lambda kv: kv[0].indices)
    if not pairs:
        raise ValueError("empty score table")
    scores = np.array([v for _, v in pairs])
    weights = _normalized(-epsilon * scores / (2.0 * delta))
    return SelectionDistribution(weights, "table", tuple(sup for sup, _ in pairs))


def epsilon_prime(params: PrivacyParams, p: int, s: int, n: int,
                  delta: float, b_y: float) -> float:
    """Privacy level of the top-R sampler with a finite rejection budget:

        eps' = log(e^eps + q^T / delta0) - log(1 - q^T)
        delta0 = exp(-n eps b_y^2 / (2 delta)) / C(p, s),  q = R / C(p, s)

    T = inf returns eps exactly."""
    total = math.comb(p, s)
    if not 1 < params.R < total:
        raise ValueError("need 1 < R < C(p, s)")
    if params.T <= 1:
        raise ValueError("need T > 1")
    if math.isinf(params.T):
        return params.epsilon
    log_q = math.log(params.R) - math.log(total)
    log_qt = params.T * log_q
    log_delta0 = -n * params.epsilon * b_y ** 2 / (2.0 * delta) - math.log(total)
    return float(np.logaddexp(params.epsilon, log_qt - log_delta0)
                 - math.log1p(-math.exp(log_qt)))


# -- exact audit -----------------------------------------------------------


@dataclass(frozen=True)
class MechanismSpec:
    mechanism: str  # exp_mech | top_r | mistakes
    epsilon: float
    s: int
    r: float
    bounds: DataBounds
    loss: str = "ls"
    R: int | None = None
    solver_opts: SolverOptions | None = None

    def __post_init__(self):
        if self.mechanism not in ("exp_mech", "top_r", "mistakes"):
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.mechanism == "top_r" and self.R is None:
            raise ValueError("top_r audit needs R")


@dataclass
class AuditResult:
    max_log_ratio: float
    gap_ok: bool
    gap_first: float
    gap_second: float
    delta: float


def _score_table(d: Dataset, spec: MechanismSpec) -> tuple[list[Support], np.ndarray]:
    total = math.comb(d.p, spec.s)
    if total > AUDIT_CAP:
        raise ValueError("audit requires an enumerable outcome set")
    engine = ScoreEngine(d, spec.r, 0.0, spec.loss, spec.solver_opts)
    supports = [Support.from_zero_based(c)
                for c in itertools.combinations(range(d.p), spec.s)]
    scores = np.array([engine.score_constrained(sup) for sup in supports])
    return supports, scores


def _log_probs(supports, scores: np.ndarray, spec: MechanismSpec,
               delta: float) -> np.ndarray:
    eps = spec.epsilon
    if spec.mechanism == "exp_mech":
        effective = scores
    elif spec.mechanism == "top_r":
        order = sorted(range(len(supports)),
                       key=lambda i: (scores[i], supports[i].indices))
        top = order[:spec.R]
        cap = scores[top[-1]]
        effective = np.full_like(scores, cap)
        effective[top] = scores[top]
    else:  # mistakes
        order = sorted(range(len(supports)),
                       key=lambda i: (scores[i], supports[i].indices))
        s0 = supports[order[0]]
        class_min: dict[int, float] = {}
        ks = np.empty(len(supports), dtype=int)
        for i, sup in enumerate(supports):
            k = sup.mistakes_from(s0)
            ks[i] = k
            if k not in class_min or scores[i] < class_min[k]:
                class_min[k] = scores[i]
        effective = np.array([class_min[k] for k in ks])
    log_w = -eps * effective / (2.0 * delta)
    shifted = log_w - log_w.max()
    return shifted - math.log(np.exp(shifted).sum())


def _neighbors(d: Dataset, d_prime: Dataset) -> bool:
    if d.x.shape != d_prime.x.shape:
        return False
    differs = np.any(d.x != d_prime.x, axis=1) | (d.y != d_prime.y)
    return int(differs.sum()) <= 1


def privacy_audit(d: Dataset, d_prime: Dataset, spec: MechanismSpec) -> AuditResult:
    """Exact worst-case log probability ratio of the mechanism between two
    neighboring datasets, plus the 2-delta score-gap condition that the
    mistakes guarantee relies on (checked on both datasets)."""
    if not _neighbors(d, d_prime):
        raise ValueError("datasets must differ in at most one row")
    clipped = clip_dataset(d, spec.bounds)
    clipped_p = clip_dataset(d_prime, spec.bounds)
    if spec.loss == "ls":
        delta = sensitivity_ls(spec.bounds, spec.r, spec.s).delta
    else:
        delta = sensitivity_hinge(spec.bounds, spec.r, spec.s, d.n).delta

    supports, scores = _score_table(clipped, spec)
    _, scores_p = _score_table(clipped_p, spec)
    lp = _log_probs(supports, scores, spec, delta)
    lp_p = _log_probs(supports, scores_p, spec, delta)

    def gap(vals: np.ndarray) -> float:
        top2 = np.sort(vals)[:2]
        return float(top2[1] - top2[0])

    gap_first, gap_second = gap(scores), gap(scores_p)
    return AuditResult(
        max_log_ratio=float(np.max(np.abs(lp - lp_p))),
        gap_ok=bool(gap_first > 2.0 * delta and gap_second > 2.0 * delta),
        gap_first=gap_first,
        gap_second=gap_second,
        delta=delta)


def write_audit(path, rows) -> None:
    """rows: iterables of (mechanism, epsilon, max_log_ratio, gap_ok, seed)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mechanism", "epsilon", "max_log_ratio", "gap_ok", "seed"])
        for row in rows:
            writer.writerow(list(row))
