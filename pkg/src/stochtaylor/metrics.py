"""Quadrature distances between function values on rectangular windows.

Both metrics integrate over a uniform tensor grid with the composite
trapezoid rule: D_sq = integral of (f_hat - f_true)**2, D_l1 = integral of
|f_hat - f_true|. Callers supply the two value vectors evaluated on
``GridSpec.points()`` in grid order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "GridSpec",
    "trapezoid_weights",
    "integrated_sq_distance",
    "l1_distance",
    "shift_window_above",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on the box [lower, upper] with points_per_dim per axis."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points_per_dim: int

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper) or not lower:
            raise DomainError(
                f"lower and upper must be nonempty and share length, got {lower}, {upper}"
            )
        if not all(math.isfinite(v) for v in lower + upper):
            raise DomainError("window bounds must be finite")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise DomainError(f"need lower < upper per coordinate, got {lower}, {upper}")
        if not isinstance(self.points_per_dim, int) or self.points_per_dim < 2:
            raise DomainError(
                f"points_per_dim must be an integer >= 2, got {self.points_per_dim}"
            )

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def n_points(self) -> int:
        return self.points_per_dim**self.d

    def steps(self) -> tuple[float, ...]:
        """Grid spacing per axis."""
        n = self.points_per_dim - 1
        return tuple((hi - lo) / n for lo, hi in zip(self.lower, self.upper))

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(lo, hi, self.points_per_dim)
            for lo, hi in zip(self.lower, self.upper)
        ]

    def points(self) -> np.ndarray:
        """(n_points, d) array in lexicographic order (first axis slowest)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


def trapezoid_weights(grid: GridSpec) -> np.ndarray:
    """Composite trapezoid quadrature weights matching ``grid.points()`` order.

    Tensor product of per-axis weights h*(1/2, 1, ..., 1, 1/2); the weights
    sum to the window volume, so constants integrate exactly.
    """
    weights_1d = []
    for h in grid.steps():
        w = np.full(grid.points_per_dim, h)
        w[0] *= 0.5
        w[-1] *= 0.5
        weights_1d.append(w)
    total = weights_1d[0]
    for w in weights_1d[1:]:
        total = np.outer(total, w).reshape(-1)
    return total


def _check_values(f_hat, f_true, grid: GridSpec) -> np.ndarray:
    a = np.asarray(f_hat, dtype=float).reshape(-1)
    b = np.asarray(f_true, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DomainError(f"value vectors must match, got lengths {a.size} and {b.size}")
    if a.size != grid.n_points:
        raise DomainError(
            f"value vectors have length {a.size} but the grid has {grid.n_points} points"
        )
    diff = a - b
    if not np.isfinite(diff).all():
        raise DomainError("value vectors must be finite")
    return diff


def integrated_sq_distance(f_hat, f_true, grid: GridSpec) -> float:
    """Trapezoid approximation of the integral of (f_hat - f_true)**2 over the window."""
    diff = _check_values(f_hat, f_true, grid)
    return float(trapezoid_weights(grid) @ (diff * diff))


def l1_distance(f_hat, f_true, grid: GridSpec) -> float:
    """Trapezoid approximation of the integral of |f_hat - f_true| over the window."""
    diff = _check_values(f_hat, f_true, grid)
    return float(trapezoid_weights(grid) @ np.abs(diff))


def shift_window_above(grid: GridSpec, x0) -> GridSpec:
    """Move any window edge sitting at or below x0 inward by one grid step.

    Evaluation requires points strictly above the expansion origin; a window
    that starts exactly at the origin would place its first grid point on
    ln(0). Axes already strictly above x0 are unchanged.
    """
    x0_t = tuple(float(v) for v in x0)
    if len(x0_t) != grid.d:
        raise DomainError(f"x0 must have length {grid.d}, got {len(x0_t)}")
    steps = grid.steps()
    new_lower = tuple(
        lo + h if lo <= origin else lo
        for lo, h, origin in zip(grid.lower, steps, x0_t)
    )
    for lo, origin in zip(new_lower, x0_t):
        if lo <= origin:
            raise DomainError(
                f"window lower bound {lo} still at or below the origin {origin} "
                "after shifting; choose a narrower window or a lower origin"
            )
    if new_lower == grid.lower:
        return grid
    return GridSpec(lower=new_lower, upper=grid.upper, points_per_dim=grid.points_per_dim)
