"""Uniform sample-space grids carrying all quadrature."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [left, right] with m nodes.

    Mixture / Gaussian / Laplace families live on [-r, r]; the gamma
    family, supported on (0, inf), uses [eps, r].
    """

    left: float
    right: float
    m: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"grid needs at least 2 nodes, got m={self.m}")
        if not self.right > self.left:
            raise ValueError("grid requires right > left")
        nodes = np.linspace(self.left, self.right, self.m)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return (self.right - self.left) / (self.m - 1)

    @classmethod
    def symmetric(cls, r: float = 15.0, m: int = 4000) -> "Grid":
        return cls(-r, r, m)

    @classmethod
    def positive(cls, r: float = 15.0, m: int = 4000, eps: float = 1e-6) -> "Grid":
        return cls(eps, r, m)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.m, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w
