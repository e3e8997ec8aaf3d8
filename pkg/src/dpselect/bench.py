"""Experiment harness: seeded sweeps over sample size, recovery metrics,
identifiability-margin instrumentation, plot-ready CSV emission.

Sub-seeds derive from the master seed and the (n, trial) pair through
SeedSequence spawn keys, so extending the grid never re-randomizes existing
trials. Failed trials are recorded and skipped instead of aborting a sweep.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

from dpselect.data import (DataBounds, SynthConfig, clip_dataset,
                           generate_synthetic,
                           generate_synthetic_classification)
from dpselect.dp import (build_p0, exact_exponential_mechanism,
                         mistakes_distribution, sample_mistakes, sample_top_r,
                         sensitivity_hinge, sensitivity_ls)
from dpselect.enumeration import (brute_force_enumerate, mistakes_enumerate,
                                  practical_top_r)
from dpselect.oa import OAConfig
from dpselect.supports import Support

RESULT_COLUMNS = ["method", "loss", "n", "p", "s", "epsilon", "snr", "rho",
                  "trial", "draw", "indices", "correct", "f1", "wall_time"]
AGGREGATE_COLUMNS = ["method", "loss", "n", "trials", "draws_per_trial",
                     "prop_correct", "prop_correct_se", "f1_mean", "f1_se"]

METHODS = ("top_r", "mistakes", "exp_mech_exact")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "mistakes"
    loss: str = "ls"
    p: int = 100
    s: int = 5
    rho: float = 0.1
    snr: float = 5.0
    n_grid: tuple[int, ...] = (500, 1000, 2000, 4000)
    trials: int = 10
    draws_per_trial: int = 50
    epsilon: float = 1.0
    lam: float = 120.0
    r: float = 1.1
    a: float = 0.001
    b: float = 0.005
    tol: float = 0.005
    b_x: float = 0.5
    b_y: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.loss not in ("ls", "hinge"):
            raise ValueError("loss must be 'ls' or 'hinge'")
        if self.trials < 1 or self.draws_per_trial < 1:
            raise ValueError("trials and draws_per_trial must be >= 1")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        kwargs = {}
        aliases = {"lambda": "lam", "draws": "draws_per_trial"}
        valid = {f.name: f.type for f in fields(cls)}
        for raw_key, value in mapping.items():
            key = aliases.get(raw_key, raw_key)
            if key not in valid:
                raise ValueError(f"unknown config key {raw_key!r}")
            if key == "n_grid":
                if isinstance(value, str):
                    value = tuple(int(v) for v in value.replace(";", ",").split(","))
                else:
                    value = tuple(int(v) for v in value)
            elif key in ("method", "loss"):
                value = str(value)
            elif key in ("p", "s", "trials", "draws_per_trial", "seed"):
                value = int(value)
            else:
                value = float(value)
            kwargs[key] = value
        return cls(**kwargs)


def read_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment."""
    mapping: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def f1_score(selected: Support, truth: Support) -> float:
    if len(selected) == 0 or len(truth) == 0:
        raise ValueError("supports must be nonempty")
    hits = len(set(selected.indices) & set(truth.indices))
    return 2.0 * hits / (len(selected) + len(truth))


def identifiability_margin(x: np.ndarray, beta_star: np.ndarray, s: int,
                           cap: int = 200_000) -> float:
    """Exact minimum over all size-s supports S != S* of
    beta'_{S*\\S} D(S) beta_{S*\\S} / |S* \\ S| with D(S) the residual
    covariance of the missed columns after regressing on X_S.

    Supports with singular Sigma_{S,S} are skipped with a warning."""
    x = np.asarray(x, dtype=np.float64)
    n, p = x.shape
    if math.comb(p, s) > cap:
        raise ValueError("margin instrumentation requires an enumerable support set")
    sigma = x.T @ x / n
    star = [int(i) for i in np.flatnonzero(beta_star)]
    tau = math.inf
    for combo in itertools.combinations(range(p), s):
        missed = sorted(set(star) - set(combo))
        if not missed:
            continue
        sel = list(combo)
        a_mm = sigma[np.ix_(missed, missed)]
        a_ms = sigma[np.ix_(missed, sel)]
        a_ss = sigma[np.ix_(sel, sel)]
        try:
            solved = np.linalg.solve(a_ss, a_ms.T)
        except np.linalg.LinAlgError:
            warnings.warn(f"singular selected-block covariance for support {combo}")
            continue
        d_mat = a_mm - a_ms @ solved
        bm = beta_star[missed]
        tau = min(tau, float(bm @ d_mat @ bm) / len(missed))
    return tau


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def _trial_rng(seed: int, n: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(n, trial, stream)))


def _run_trial(cfg: ExperimentConfig, n: int, trial: int):
    data_rng = _trial_rng(cfg.seed, n, trial, 0)
    mech_rng = _trial_rng(cfg.seed, n, trial, 1)
    oa_rng = _trial_rng(cfg.seed, n, trial, 2)
    synth = SynthConfig(n=n, p=cfg.p, s=cfg.s, rho=cfg.rho, snr=cfg.snr,
                        seed=cfg.seed)
    if cfg.loss == "ls":
        dataset, model = generate_synthetic(synth, rng=data_rng)
    else:
        dataset, model = generate_synthetic_classification(synth, rng=data_rng)
    bounds = DataBounds(cfg.b_x, cfg.b_y)
    clipped = clip_dataset(dataset, bounds)
    if cfg.loss == "ls":
        delta = sensitivity_ls(bounds, cfg.r, cfg.s).delta
    else:
        delta = sensitivity_hinge(bounds, cfg.r, cfg.s, n).delta
    oacfg = OAConfig(lam=cfg.lam, a=cfg.a, b=cfg.b, tol=cfg.tol)

    start = time.perf_counter()
    if cfg.method == "top_r":
        enum = practical_top_r(clipped, cfg.s, cfg.r, oacfg, cfg.loss, rng=oa_rng)
        dist = build_p0(enum, delta, cfg.epsilon, cfg.p, cfg.s)

        def draw() -> Support:
            return sample_top_r(enum, dist, math.inf, cfg.p, cfg.s, mech_rng)
    elif cfg.method == "mistakes":
        enum = mistakes_enumerate(clipped, cfg.s, cfg.r, oacfg, cfg.loss, rng=oa_rng)
        dist = mistakes_distribution(enum, delta, cfg.epsilon, cfg.p, cfg.s)

        def draw() -> Support:
            return sample_mistakes(enum, dist, cfg.p, cfg.s, mech_rng)
    else:  # exp_mech_exact
        enum = brute_force_enumerate(clipped, cfg.s, cfg.r, loss=cfg.loss)
        table = {it.support: it.score for it in enum.items}
        dist = exact_exponential_mechanism(table, delta, cfg.epsilon)

        def draw() -> Support:
            cdf = np.cumsum(dist.weights)
            slot = int(np.searchsorted(cdf, mech_rng.random() * cdf[-1], "right"))
            return dist.outcomes[slot]

    truth = Support(model.support)
    selections = [draw() for _ in range(cfg.draws_per_trial)]
    wall = (time.perf_counter() - start) / cfg.draws_per_trial

    rows = []
    for j, sel in enumerate(selections):
        score = f1_score(sel, truth)
        rows.append([cfg.method, cfg.loss, n, cfg.p, cfg.s, cfg.epsilon,
                     cfg.snr, cfg.rho, trial, j,
                     ";".join(str(i) for i in sel),
                     int(sel.indices == truth.indices), score, wall])
    return rows


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult()
    for n in cfg.n_grid:
        per_trial_correct = []
        per_trial_f1 = []
        for trial in range(cfg.trials):
            try:
                rows = _run_trial(cfg, n, trial)
            except Exception as exc:  # record and keep sweeping
                result.errors.append((cfg.method, n, trial, repr(exc)))
                continue
            result.rows.extend(rows)
            per_trial_correct.append(np.mean([row[11] for row in rows]))
            per_trial_f1.append(np.mean([row[12] for row in rows]))
        if per_trial_correct:
            result.aggregates.append(
                [cfg.method, cfg.loss, n, len(per_trial_correct),
                 cfg.draws_per_trial,
                 float(np.mean(per_trial_correct)),
                 _standard_error(per_trial_correct),
                 float(np.mean(per_trial_f1)),
                 _standard_error(per_trial_f1)])
    return result


def _standard_error(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))
