"""Uniform periodic grids, scalar/complex fields and basic discrete calculus.

The grid covers a flat box ``[0, L)^{2n}`` with ``N`` points per axis and
periodic index arithmetic on every axis.  Derivatives are centered finite
differences (order 2 or 4); integration is the midpoint rule, which is
spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDensity, GridMismatch, GridTooCoarse

__all__ = [
    "Grid",
    "ScalarField",
    "ComplexField",
    "make_grid",
    "diff",
    "integrate",
]

# Centered first-derivative stencils: offset -> coefficient (divided by h later).
_STENCILS = {
    2: ((1, 0.5), (-1, -0.5)),
    4: ((1, 8.0 / 12.0), (-1, -8.0 / 12.0), (2, -1.0 / 12.0), (-2, 1.0 / 12.0)),
}


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice over a ``2n``-dimensional box.

    Attributes
    ----------
    half_dim : int
        ``n``; the box has ``2n`` axes.
    points_per_axis : int
        ``N``, identical for every axis, even, at least 8.
    box_length : float
        Physical length of every axis (default ``2*pi``).
    stencil_order : int
        Default finite-difference order (2 or 4).
    """

    half_dim: int
    points_per_axis: int
    box_length: float = 2.0 * math.pi
    stencil_order: int = 4

    def __post_init__(self):
        if self.half_dim < 1:
            raise GridTooCoarse(f"half_dim must be >= 1, got {self.half_dim}")
        N = self.points_per_axis
        if N < 8 or N % 2 != 0:
            raise GridTooCoarse(f"points_per_axis must be even and >= 8, got {N}")
        if self.box_length <= 0:
            raise GridTooCoarse("box_length must be positive")
        if self.stencil_order not in _STENCILS:
            raise ValueError(f"stencil_order must be one of {sorted(_STENCILS)}")

    @property
    def dim(self) -> int:
        """Number of real axes, ``2n``."""
        return 2 * self.half_dim

    @property
    def h(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def num_points(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def volume(self) -> float:
        return self.box_length ** self.dim

    def axis_points(self) -> np.ndarray:
        """1-d array of coordinate values along one axis."""
        return self.h * np.arange(self.points_per_axis)

    def coord(self, axis: int) -> np.ndarray:
        """Coordinate array along ``axis``, shaped for broadcasting."""
        self._check_axis(axis)
        shape = [1] * self.dim
        shape[axis] = self.points_per_axis
        return self.axis_points().reshape(shape)

    def coords(self) -> list:
        return [self.coord(a) for a in range(self.dim)]

    def _check_axis(self, axis: int):
        if not 0 <= axis < self.dim:
            raise ValueError(f"axis {axis} out of range for {self.dim} axes")

    # -- raw ndarray kernels -------------------------------------------------

    def diff_raw(self, values: np.ndarray, axis: int, order: int | None = None) -> np.ndarray:
        """Centered periodic finite difference of a raw array.

        ``np.roll(v, -k, axis)[i] == v[i + k]``: forward sample by k cells.
        """
        self._check_axis(axis)
        order = self.stencil_order if order is None else order
        if order == 2:
            out = np.roll(values, -1, axis=axis)
            out -= np.roll(values, 1, axis=axis)
            out *= 0.5 / self.h
            return out
        if order == 4:
            out = np.roll(values, -1, axis=axis)
            out -= np.roll(values, 1, axis=axis)
            out *= 8.0
            out -= np.roll(values, -2, axis=axis)
            out += np.roll(values, 2, axis=axis)
            out *= 1.0 / (12.0 * self.h)
            return out
        raise ValueError(f"unsupported stencil order {order}")

    def integrate_raw(self, values: np.ndarray) -> float:
        return float(np.sum(values)) * self.cell_volume

    # -- field constructors ---------------------------------------------------

    def field(self, fn) -> "ScalarField":
        """Sample ``fn(x0, x1, ...)`` on the grid."""
        vals = np.asarray(fn(*self.coords()), dtype=float)
        return ScalarField(self, np.broadcast_to(vals, self.shape).copy())

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def full(self, value: float) -> "ScalarField":
        return ScalarField(self, np.full(self.shape, float(value)))


def make_grid(half_dim: int, points_per_axis: int, box_length: float = 2.0 * math.pi,
              stencil_order: int = 4) -> Grid:
    """Build a grid; rejects odd or too-coarse resolutions (``GridTooCoarse``)."""
    return Grid(half_dim, points_per_axis, box_length, stencil_order)


class _Field:
    """Shared implementation of immutable grid-sampled fields."""

    _dtype = float

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=self._dtype)
        if values.shape != grid.shape:
            raise GridMismatch(
                f"field shape {values.shape} does not match grid shape {grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if values.base is not None or values.flags.writeable is False:
            values = values.copy()
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    # -- algebra ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, _Field):
            if other.grid != self.grid:
                raise GridMismatch("fields live on different grids")
            return other.values
        return other

    def _wrap(self, values):
        cls = ComplexField if np.iscomplexobj(values) else ScalarField
        return cls(self.grid, values)

    def __add__(self, other):
        return self._wrap(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self._wrap(self._coerce(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._coerce(other))

    def __neg__(self):
        return self._wrap(-self.values)

    # -- reductions --------------------------------------------------------

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def max(self) -> float:
        return float(np.max(self.values.real))

    def min(self) -> float:
        return float(np.min(self.values.real))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.integrate_raw(np.abs(self.values) ** 2)))

    def __repr__(self):  # pragma: no cover - cosmetic
        return (f"{type(self).__name__}(n={self.grid.half_dim}, "
                f"N={self.grid.points_per_axis}, sup={self.sup_norm():.3g})")


class ScalarField(_Field):
    """Real scalar samples on a grid; immutable after construction."""

    _dtype = float

    @property
    def real(self):
        return self


class ComplexField(_Field):
    """Complex scalar samples on a grid; immutable after construction."""

    _dtype = complex

    @property
    def real(self) -> ScalarField:
        return ScalarField(self.grid, self.values.real.copy())

    @property
    def imag(self) -> ScalarField:
        return ScalarField(self.grid, self.values.imag.copy())

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values))


def diff(f: _Field, axis: int, order: int | None = None):
    """Centered periodic finite difference along ``axis`` (0-based).

    Exact on constants; antisymmetric under reflection of the samples;
    linear to machine precision.
    """
    out = f.grid.diff_raw(f.values, axis, order)
    return type(f)(f.grid, out)


def integrate(f: _Field, density: _Field | None = None) -> float:
    """Midpoint-rule integral ``h^{2n} * sum(f * density)``.

    ``density`` must be strictly positive pointwise (``BadDensity``);
    omit it for the plain coordinate volume element.
    """
    if density is None:
        return f.grid.integrate_raw(f.values)
    if isinstance(density, _Field):
        if density.grid != f.grid:
            raise GridMismatch("density lives on a different grid")
        dens = density.values
    else:
        dens = np.asarray(density)
    if np.min(dens.real) <= 0 or np.iscomplexobj(dens):
        raise BadDensity("density must be real and strictly positive")
    return f.grid.integrate_raw(f.values * dens)


def weighted_mean(values: np.ndarray, weight: np.ndarray, grid: Grid) -> float:
    """Mean of ``values`` against a positive weight (raw-array helper)."""
    w = np.broadcast_to(weight, grid.shape)
    return float(np.sum(values * w) / np.sum(w))
