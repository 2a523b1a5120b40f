"""Uniform 1-D spatial grids and sampled fields.

Everything downstream (kernels, solvers, statistics) works on a
:class:`Grid1D` carrying equally spaced samples in a :class:`Field`.
Grids are endpoint-inclusive: ``n_points`` samples span
``[x_min, x_max]`` with spacing ``dx = (x_max - x_min)/(n_points - 1)``.
For periodic operations the last sample is treated as a duplicate of the
first, so the fundamental period is ``x_max - x_min``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = ["Grid1D", "Field"]


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1-D grid on ``[x_min, x_max]`` with ``n_points`` samples."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self) -> None:
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points}")
        if not self.x_min < self.x_max:
            raise ValueError(
                f"require x_min < x_max, got [{self.x_min}, {self.x_max}]"
            )

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def period(self) -> float:
        """Fundamental period when the grid is used periodically."""
        return self.x_max - self.x_min

    @cached_property
    def x(self) -> np.ndarray:
        xs = np.linspace(self.x_min, self.x_max, self.n_points)
        xs.setflags(write=False)
        return xs

    def contains(self, x: float) -> bool:
        return self.x_min <= x <= self.x_max


@dataclass
class Field:
    """Real- or complex-valued samples on a :class:`Grid1D`."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid with "
                f"{self.grid.n_points} points"
            )

    @classmethod
    def from_function(cls, grid: Grid1D, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return cls(grid, np.asarray(fn(grid.x)))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)
