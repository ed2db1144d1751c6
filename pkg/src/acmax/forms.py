"""Real differential forms in the coordinate basis.

Forms are stored by their coefficients on sorted multi-indices
``dx^{i1} ^ ... ^ dx^{ip}`` with ``i1 < ... < ip``, so antisymmetry is exact
by construction.  Coefficient arrays only need to broadcast against the grid
shape, which keeps constant-coefficient forms (volume forms, flat metrics)
cheap.

The exterior derivative uses the grid's centered stencils axis by axis;
since discrete partials commute exactly, ``d(d(alpha)) == 0`` to rounding.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import DegreeMismatch, GridMismatch
from .grid import Grid

__all__ = ["RealForm", "basis_indices", "exterior_d", "wedge", "j_action"]


@lru_cache(maxsize=None)
def basis_indices(dim: int, degree: int) -> tuple:
    """Sorted multi-indices spanning degree-``p`` forms in ``dim`` axes."""
    return tuple(itertools.combinations(range(dim), degree))


@lru_cache(maxsize=None)
def _index_of(dim: int, degree: int) -> dict:
    return {idx: k for k, idx in enumerate(basis_indices(dim, degree))}


def _perm_sign(src: tuple, dst: tuple) -> float:
    perm = [dst.index(s) for s in src]
    sign = 1.0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def _merge_sign(left: tuple, right: tuple):
    """Permutation sign merging two disjoint sorted tuples, or None if they clash."""
    if set(left) & set(right):
        return None, None
    merged = left + right
    inversions = 0
    for i, a in enumerate(merged):
        for b in merged[i + 1:]:
            if a > b:
                inversions += 1
    return tuple(sorted(merged)), -1.0 if inversions % 2 else 1.0


class RealForm:
    """A real ``p``-form sampled on a grid.

    Parameters
    ----------
    grid : Grid
    degree : int
    comps : sequence of arrays
        One per sorted multi-index, each broadcastable to ``grid.shape``.
    """

    def __init__(self, grid: Grid, degree: int, comps):
        if not 0 <= degree <= grid.dim:
            raise DegreeMismatch(f"degree {degree} invalid in {grid.dim} dimensions")
        idx = basis_indices(grid.dim, degree)
        comps = [np.asarray(c, dtype=float) for c in comps]
        if len(comps) != len(idx):
            raise DegreeMismatch(
                f"expected {len(idx)} components for degree {degree}, got {len(comps)}"
            )
        for c in comps:
            np.broadcast_shapes(c.shape, grid.shape)
        self.grid = grid
        self.degree = degree
        self.comps = comps

    @classmethod
    def zero(cls, grid: Grid, degree: int) -> "RealForm":
        k = len(basis_indices(grid.dim, degree))
        return cls(grid, degree, [np.zeros(())] * k)

    def component(self, *axes) -> np.ndarray:
        """Coefficient on ``dx^{a1} ^ ... ^ dx^{ap}`` for any axis order."""
        key = tuple(axes)
        if len(set(key)) != len(key):
            return np.zeros(())
        srt = tuple(sorted(key))
        pos = _index_of(self.grid.dim, self.degree)[srt]
        return _perm_sign(key, srt) * self.comps[pos]

    def dense(self) -> "RealForm":
        return RealForm(self.grid, self.degree,
                        [np.broadcast_to(c, self.grid.shape).copy() for c in self.comps])

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(c))) for c in self.comps)

    # -- algebra -----------------------------------------------------------

    def _check(self, other: "RealForm"):
        if other.grid != self.grid:
            raise GridMismatch("forms live on different grids")
        if other.degree != self.degree:
            raise DegreeMismatch("forms have different degrees")

    def __add__(self, other: "RealForm") -> "RealForm":
        self._check(other)
        return RealForm(self.grid, self.degree,
                        [a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: "RealForm") -> "RealForm":
        self._check(other)
        return RealForm(self.grid, self.degree,
                        [a - b for a, b in zip(self.comps, other.comps)])

    def __mul__(self, scalar) -> "RealForm":
        return RealForm(self.grid, self.degree, [scalar * c for c in self.comps])

    __rmul__ = __mul__

    def __neg__(self) -> "RealForm":
        return self * (-1.0)

    def __repr__(self):  # pragma: no cover - cosmetic
        return f"RealForm(degree={self.degree}, sup={self.sup_norm():.3g})"


def _diff_broadcast(grid: Grid, coeff: np.ndarray, axis: int) -> np.ndarray:
    """Stencil derivative of a broadcast-shaped coefficient along a grid axis.

    Size-1 (or absent) axes are constant directions, so the derivative
    vanishes there without materializing the full grid.
    """
    local_axis = axis - (grid.dim - coeff.ndim)
    if local_axis < 0 or coeff.shape[local_axis] == 1:
        return np.zeros(())
    if coeff.shape[local_axis] != grid.points_per_axis:
        raise GridMismatch("component shape incompatible with grid")
    return grid.diff_raw(coeff, local_axis) if coeff.ndim == grid.dim else _roll_diff(grid, coeff, local_axis)


def _roll_diff(grid: Grid, coeff: np.ndarray, local_axis: int) -> np.ndarray:
    out = np.zeros_like(coeff)
    from .grid import _STENCILS
    for offset, c in _STENCILS[grid.stencil_order]:
        out += (c / grid.h) * np.roll(coeff, -offset, axis=local_axis)
    return out


def exterior_d(form: RealForm) -> RealForm:
    """Discrete exterior derivative (antisymmetrized coordinate stencils)."""
    grid = form.grid
    p = form.degree
    if p == grid.dim:
        raise DegreeMismatch("cannot raise the degree of a top form")
    in_pos = _index_of(grid.dim, p)
    comps = []
    for B in basis_indices(grid.dim, p + 1):
        acc = np.zeros(())
        for q, axis in enumerate(B):
            rest = B[:q] + B[q + 1:]
            term = _diff_broadcast(grid, form.comps[in_pos[rest]], axis)
            acc = acc + ((-1.0) ** q) * term
        comps.append(acc)
    return RealForm(grid, p + 1, comps)


def wedge(a: RealForm, b: RealForm) -> RealForm:
    """Pointwise wedge product."""
    if a.grid != b.grid:
        raise GridMismatch("forms live on different grids")
    grid = a.grid
    p, q = a.degree, b.degree
    if p + q > grid.dim:
        raise DegreeMismatch(f"wedge degree {p}+{q} exceeds dimension {grid.dim}")
    out_pos = _index_of(grid.dim, p + q)
    comps = [np.zeros(())] * len(basis_indices(grid.dim, p + q))
    for I, ca in zip(basis_indices(grid.dim, p), a.comps):
        for J, cb in zip(basis_indices(grid.dim, q), b.comps):
            merged, sign = _merge_sign(I, J)
            if merged is None:
                continue
            k = out_pos[merged]
            comps[k] = comps[k] + sign * (ca * cb)
    return RealForm(grid, p + q, comps)


def j_action(form: RealForm, J: np.ndarray) -> RealForm:
    """Action of an almost complex structure on a ``p``-form.

    ``(J.alpha)(X_1, ..., X_p) = (-1)^p alpha(J X_1, ..., J X_p)`` with
    ``J[gamma, beta]`` the coordinate matrix of ``J`` (entries broadcast over
    the grid).  Satisfies ``J(J(alpha)) = (-1)^p alpha``.
    """
    grid = form.grid
    p = form.degree
    if p == 0:
        return RealForm(grid, 0, [c.copy() for c in form.comps])
    idx = basis_indices(grid.dim, p)
    sign = (-1.0) ** p
    comps = []
    for B in idx:
        acc = np.zeros(())
        for C, cc in zip(idx, form.comps):
            minor = _j_minor(J, B, C)
            if minor is None:
                continue
            acc = acc + minor * cc
        comps.append(sign * acc)
    return RealForm(grid, p, comps)


def _j_minor(J: np.ndarray, rows: tuple, cols: tuple):
    """det over points of the submatrix with entry ``(k, l) = J[cols[l], rows[k]]``.

    This is the coefficient with which the input component on ``cols``
    contributes to the output component on ``rows``; ``None`` flags an
    identically-zero minor so callers can skip the term.
    """
    p = len(rows)
    entries = [[np.asarray(J[c, r]) for c in cols] for r in rows]
    if p == 1:
        out = entries[0][0]
    elif p == 2:
        out = entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0]
    else:
        shape = np.broadcast_shapes(*[e.shape for row in entries for e in row])
        M = np.empty(shape + (p, p))
        for k in range(p):
            for l in range(p):
                M[..., k, l] = np.broadcast_to(entries[k][l], shape)
        out = np.linalg.det(M)
    out = np.asarray(out)
    if out.size == 1 and float(out.reshape(-1)[0]) == 0.0:
        return None
    return out
