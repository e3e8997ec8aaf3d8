"""Support: a sorted set of 1-based feature indices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, order=True)
class Support:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx and idx[0] < 1:
            raise ValueError("indices are 1-based")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_zero_based(cls, idx) -> "Support":
        return cls(tuple(sorted(int(i) + 1 for i in idx)))

    @property
    def zero_based(self) -> np.ndarray:
        return np.array(self.indices, dtype=np.intp) - 1

    def mask(self, p: int) -> np.ndarray:
        z = np.zeros(p)
        z[self.zero_based] = 1.0
        return z

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def mistakes_from(self, other: "Support") -> int:
        """Number of indices of self outside other."""
        return len(set(self.indices) - set(other.indices))
