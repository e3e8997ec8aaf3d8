"""Dataset container, boundedness clipping, synthetic generators, CSV I/O.

Synthetic regression rows are Gaussian with AR(1) covariance
``Sigma[i, j] = rho**|i - j|``; the planted coefficient vector has value
``1/sqrt(s)`` at the odd positions 1, 3, ..., 2s-1 (1-based) so its l2 norm
is exactly 1. The noise vector is rescaled after drawing so that
``||X beta*||^2 / ||eps||^2`` equals the requested signal-to-noise ratio
exactly, which keeps every downstream quantity a deterministic function of
the seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class DataFormatError(ValueError):
    """Malformed dataset file: ragged rows, non-numeric cells, empty input."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n rows, p columns) and response/label vector."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("x must be a 2-d array")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ValueError("y must be 1-d with one entry per row of x")
        object.__setattr__(self, "x", np.ascontiguousarray(x))
        object.__setattr__(self, "y", np.ascontiguousarray(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class DataBounds:
    """Entrywise bounds |X_ij| <= b_x, |y_i| <= b_y enforced by clipping."""

    b_x: float
    b_y: float

    def __post_init__(self):
        if self.b_x <= 0 or self.b_y <= 0:
            raise ValueError("bounds must be positive")


@dataclass(frozen=True)
class SynthConfig:
    n: int
    p: int
    s: int
    rho: float
    snr: float
    seed: int

    def __post_init__(self):
        if min(self.n, self.p, self.s) < 1:
            raise ValueError("n, p, s must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if 2 * self.s - 1 > self.p:
            raise ValueError("need 2s - 1 <= p to place the planted support")
        if self.s > self.n:
            raise ValueError("need s <= n")


@dataclass(frozen=True)
class TrueModel:
    """Planted support (1-based indices) and full-length coefficient vector."""

    support: tuple[int, ...]
    beta: np.ndarray


def clip_dataset(d: Dataset, bounds: DataBounds) -> Dataset:
    """Clamp X entrywise to [-b_x, b_x] and y to [-b_y, b_y]."""
    return Dataset(
        np.clip(d.x, -bounds.b_x, bounds.b_x),
        np.clip(d.y, -bounds.b_y, bounds.b_y),
    )


def _ar1_cholesky(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(sigma)


def _planted_beta(p: int, s: int) -> tuple[np.ndarray, tuple[int, ...]]:
    support = tuple(range(1, 2 * s, 2))  # 1-based: 1, 3, ..., 2s-1
    beta = np.zeros(p)
    beta[[i - 1 for i in support]] = 1.0 / np.sqrt(s)
    return beta, support


def _latent(cfg: SynthConfig, rng: np.random.Generator):
    """Draw X and a noise vector rescaled for an exact SNR, return both
    together with the noiseless signal X beta*."""
    chol = _ar1_cholesky(cfg.p, cfg.rho)
    x = rng.standard_normal((cfg.n, cfg.p)) @ chol.T
    beta, support = _planted_beta(cfg.p, cfg.s)
    signal = x @ beta
    eps = rng.standard_normal(cfg.n)
    eps *= np.linalg.norm(signal) / (np.sqrt(cfg.snr) * np.linalg.norm(eps))
    return x, beta, support, signal, eps


def generate_synthetic(cfg: SynthConfig,
                       rng: np.random.Generator | None = None) -> tuple[Dataset, TrueModel]:
    """Regression data: y = X beta* + eps with exact per-realization SNR."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    x, beta, support, signal, eps = _latent(cfg, rng)
    return Dataset(x, signal + eps), TrueModel(support, beta)


def generate_synthetic_classification(cfg: SynthConfig,
                                      rng: np.random.Generator | None = None
                                      ) -> tuple[Dataset, TrueModel]:
    """Classification data: the regression latent z = X beta* + eps is
    thresholded against uniform draws, y_i = +1 if u_i > 1/(1+exp(-z_i))
    else -1."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    x, beta, support, signal, eps = _latent(cfg, rng)
    z = signal + eps
    u = rng.uniform(0.0, 1.0, cfg.n)
    y = np.where(u > 1.0 / (1.0 + np.exp(-z)), 1.0, -1.0)
    return Dataset(x, y), TrueModel(support, beta)


def write_dataset(path, d: Dataset) -> None:
    """CSV with header ``y,x1,...,xp`` and one numeric row per observation."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j}" for j in range(1, d.p + 1)])
        for i in range(d.n):
            writer.writerow([repr(float(d.y[i]))] + [repr(float(v)) for v in d.x[i]])


def read_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [row for row in rows if row]
    if not rows:
        raise DataFormatError(f"{path}: empty dataset file")
    header = rows[0]
    if len(header) < 2 or header[0] != "y":
        raise DataFormatError(f"{path}: expected header 'y,x1,...,xp'")
    p = len(header) - 1
    if not rows[1:]:
        raise DataFormatError(f"{path}: no data rows")
    y = np.empty(len(rows) - 1)
    x = np.empty((len(rows) - 1, p))
    for i, row in enumerate(rows[1:]):
        if len(row) != p + 1:
            raise DataFormatError(
                f"{path}: row {i + 2} has {len(row)} columns, expected {p + 1}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise DataFormatError(f"{path}: non-numeric cell in row {i + 2}") from exc
        y[i] = vals[0]
        x[i] = vals[1:]
    return Dataset(x, y)


def write_results(path, header: list[str], rows) -> None:
    """Plain CSV results writer shared by the CLI and the harness."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_model(path, model: TrueModel) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for j, v in enumerate(model.beta, start=1):
            writer.writerow([j, repr(float(v))])


def read_model(path) -> TrueModel:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [row for row in rows if row]
    if len(rows) < 2:
        raise DataFormatError(f"{path}: empty model file")
    beta = np.zeros(len(rows) - 1)
    for row in rows[1:]:
        try:
            j, v = int(row[0]), float(row[1])
        except (ValueError, IndexError) as exc:
            raise DataFormatError(f"{path}: malformed model row {row}") from exc
        beta[j - 1] = v
    support = tuple(int(j) for j in np.flatnonzero(beta) + 1)
    return TrueModel(support, beta)
