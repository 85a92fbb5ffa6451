"""Uniform grids, finite-difference operators and quadrature.

All operators act on plain ``numpy`` arrays through the ``diff1``/``diff2``
helpers; the ``ScalarField`` wrappers only add validation. Two-dimensional
grids use the same axis specification for both coordinates and every
operator acts per axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DomainError

DENSITY_TOLERANCE = 1e-8


class Boundary(str, Enum):
    PERIODIC = "periodic"
    REFLECTING = "reflecting"


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[x_min, x_max]`` (closed) or ``[x_min, x_max)`` (periodic)."""

    n_points: int
    x_min: float
    x_max: float
    boundary: Boundary = Boundary.REFLECTING
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise ArgumentError(f"n_points must be an integer >= 8, got {self.n_points}")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise ArgumentError(f"need x_max > x_min, got [{self.x_min}, {self.x_max}]")
        if self.dim not in (1, 2):
            raise ArgumentError(f"dim must be 1 or 2, got {self.dim}")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def spacing(self) -> float:
        if self.boundary is Boundary.PERIODIC:
            return self.length / self.n_points
        return self.length / (self.n_points - 1)

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_points,) * self.dim

    @property
    def x(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return self.x_min + self.spacing * np.arange(self.n_points)

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to ``shape`` (one per axis)."""
        return tuple(np.meshgrid(*([self.x] * self.dim), indexing="ij"))

    def weights(self) -> np.ndarray:
        """Quadrature weights including the cell volume."""
        w = np.ones(self.n_points)
        if not self.periodic:
            w[0] = w[-1] = 0.5
        w = w * self.spacing
        if self.dim == 1:
            return w
        return np.multiply.outer(w, w)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.periodic:
            return np.isfinite(x)
        eps = 1e-12 * self.length
        return (x >= self.x_min - eps) & (x <= self.x_max + eps)

    def displacement(self, x_to, x_from):
        """``x_to - x_from``, using the minimum image on periodic grids."""
        d = np.asarray(x_to, dtype=float) - np.asarray(x_from, dtype=float)
        if self.periodic:
            d = d - self.length * np.round(d / self.length)
        return d

    def periodic_companion(self) -> "Grid":
        """Periodic grid sharing the nodes of this closed grid minus ``x_max``."""
        if self.periodic:
            return self
        return Grid(self.n_points - 1, self.x_min, self.x_max, Boundary.PERIODIC, self.dim)

    def reflecting_companion(self) -> "Grid":
        """Closed grid sharing the nodes of this periodic grid plus ``x_max``."""
        if not self.periodic:
            return self
        return Grid(self.n_points + 1, self.x_min, self.x_max, Boundary.REFLECTING, self.dim)


class ScalarField:
    """Real values on a grid."""

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise ArgumentError(f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("field values must be finite")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n_points}, dim={self.grid.dim})"

    @classmethod
    def from_function(cls, grid: Grid, func):
        return cls(grid, func(*grid.mesh()))

    def __add__(self, other):
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return ScalarField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


class DensityField(ScalarField):
    """Nonnegative field that integrates to one."""

    def __init__(self, grid: Grid, values, tolerance: float = DENSITY_TOLERANCE):
        super().__init__(grid, values)
        if np.any(self.values < 0):
            raise DomainError("density values must be nonnegative")
        total = _integrate_array(self.values, grid)
        if abs(total - 1.0) > tolerance:
            raise DomainError(f"density integrates to {total!r}, not 1")


def _check_same_grid(a: ScalarField, b: ScalarField):
    if a.grid != b.grid:
        raise ArgumentError("fields live on different grids")


def diff1(values: np.ndarray, grid: Grid, axis: int = 0) -> np.ndarray:
    """Second-order first derivative of an array along ``axis``."""
    f = np.moveaxis(np.asarray(values), axis, 0)
    if f.shape[0] != grid.n_points:
        raise ArgumentError(f"array length {f.shape[0]} does not match grid {grid.n_points}")
    h = grid.spacing
    if grid.periodic:
        out = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2 * h)
    else:
        out = np.empty_like(f)
        out[1:-1] = (f[2:] - f[:-2]) / (2 * h)
        out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
        out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def diff2(values: np.ndarray, grid: Grid, axis: int = 0) -> np.ndarray:
    """Second derivative along ``axis``; 3-point stencil, one-sided at closed ends."""
    f = np.moveaxis(np.asarray(values), axis, 0)
    if f.shape[0] != grid.n_points:
        raise ArgumentError(f"array length {f.shape[0]} does not match grid {grid.n_points}")
    h2 = grid.spacing ** 2
    if grid.periodic:
        out = (np.roll(f, -1, axis=0) - 2 * f + np.roll(f, 1, axis=0)) / h2
    else:
        out = np.empty_like(f)
        out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h2
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h2
    return np.moveaxis(out, 0, axis)


def _integrate_array(values: np.ndarray, grid: Grid) -> float:
    # flattened product summed in C order: fixed reduction order
    return float(np.sum((np.asarray(values) * grid.weights()).ravel()))


def gradient(f: ScalarField, axis: int = 0) -> ScalarField:
    """Derivative of ``f`` along one axis."""
    if not 0 <= axis < f.grid.dim:
        raise ArgumentError(f"axis {axis} out of range for a {f.grid.dim}-D grid")
    return ScalarField(f.grid, diff1(f.values, f.grid, axis))


def gradients(f: ScalarField) -> list[ScalarField]:
    return [gradient(f, a) for a in range(f.grid.dim)]


def laplacian(f: ScalarField, inverse_masses: Sequence[float] | None = None) -> ScalarField:
    """Sum of second derivatives, optionally weighted per axis."""
    weights = [1.0] * f.grid.dim if inverse_masses is None else list(inverse_masses)
    if len(weights) != f.grid.dim:
        raise ArgumentError("one weight per axis required")
    out = sum(w * diff2(f.values, f.grid, a) for a, w in enumerate(weights))
    return ScalarField(f.grid, out)


def integrate(f: ScalarField) -> float:
    """Trapezoid rule on closed grids, Riemann sum on periodic ones."""
    return _integrate_array(f.values, f.grid)


def normalize(rho: ScalarField) -> DensityField:
    values = np.asarray(rho.values)
    if np.any(values < 0):
        raise DomainError("cannot normalize a field with negative values")
    total = _integrate_array(values, rho.grid)
    if not total > 0:
        raise DomainError("cannot normalize a field with zero integral")
    return DensityField(rho.grid, values / total)


def density_from_values(grid: Grid, values) -> DensityField:
    """Normalize raw nonnegative values (convenience wrapper)."""
    return normalize(ScalarField(grid, values))
