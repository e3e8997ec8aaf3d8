"""Affine under-estimator of the penalized selection objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Cut:
    """value + gradient'(z - anchor) lower-bounds the penalized objective
    everywhere on (0, 1]^p; gradients are nonpositive by construction."""

    value: float
    gradient: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        grad = np.asarray(self.gradient, dtype=np.float64)
        anchor = np.asarray(self.anchor, dtype=np.float64)
        if grad.shape != anchor.shape or grad.ndim != 1:
            raise ValueError("gradient and anchor must be 1-d of equal length")
        if np.any(grad > 1e-12):
            raise ValueError("cut gradients must be nonpositive")
        if np.any(anchor <= 0) or np.any(anchor > 1):
            raise ValueError("anchor entries must lie in (0, 1]")
        object.__setattr__(self, "gradient", grad)
        object.__setattr__(self, "anchor", anchor)

    @property
    def offset(self) -> float:
        """Constant term so the cut reads offset + gradient'z."""
        return float(self.value - self.gradient @ self.anchor)

    def evaluate(self, z: np.ndarray) -> float:
        return float(self.value + self.gradient @ (z - self.anchor))
