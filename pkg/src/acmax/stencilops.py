"""Matrix-free linear operators built from stencil-derivative terms.

A :class:`StencilOp` is a sum of terms of three shapes,

* second order: ``c_out * D_a(c_mid * D_b(c_in * f))``
* first order:  ``c_out * D_a(c_in * f)``
* zeroth order: ``c * f``

where every ``D`` is the grid's centered periodic difference and the
coefficients are arrays broadcastable to the grid.  Because the centered
stencil is exactly antisymmetric on a periodic grid (``D^T = -D`` in the
plain inner product), the transpose of a term list is again a term list,
so adjoints are exact by construction rather than by assembling matrices:

    <A f, g> = <f, A^T g>      (plain h^{2n}-weighted dot product)

Weighted adjoints conjugate by the weight: ``A* = W^{-1} A^T W``.
"""

from __future__ import annotations

import numpy as np
import scipy.fft
import scipy.sparse.linalg as spla

from .errors import LinearNoConvergence
from .grid import Grid

__all__ = ["StencilOp", "LatticeProjection", "FlatSymbolPreconditioner", "gmres_solve"]


class StencilOp:
    """Sum of stencil-derivative terms; see module docstring.

    Coefficients may be ``None`` (meaning 1), scalars, broadcast-shaped
    arrays, or full fields.  ``apply`` returns a complex array; use
    ``apply_real`` for operators known to be real.
    """

    def __init__(self, grid: Grid, terms2=(), terms1=(), terms0=()):
        self.grid = grid
        self.terms2 = [(_c(c1), a, _c(c2), b, _c(c3)) for (c1, a, c2, b, c3) in terms2]
        self.terms1 = [(_c(c1), a, _c(c2)) for (c1, a, c2) in terms1]
        self.terms0 = [_c(c) for c in terms0]

    def apply(self, values: np.ndarray) -> np.ndarray:
        grid = self.grid
        out = np.zeros(grid.shape, dtype=complex)
        inner_cache: dict = {}

        def inner(b, c_in):
            key = (b, id(c_in))
            got = inner_cache.get(key)
            if got is None:
                base = values if c_in is None else c_in * values
                got = grid.diff_raw(base, b)
                inner_cache[key] = got
            return got

        for c1, a, c2, b, c3 in self.terms2:
            mid = inner(b, c3)
            if c2 is not None:
                mid = c2 * mid
            term = grid.diff_raw(mid, a)
            out += term if c1 is None else c1 * term
        for c1, a, c2 in self.terms1:
            term = inner(a, c2) if c2 is None else grid.diff_raw(c2 * values, a)
            out += term if c1 is None else c1 * term
        for c in self.terms0:
            out += values if c is None else c * values
        return out

    def apply_real(self, values: np.ndarray) -> np.ndarray:
        return self.apply(values).real

    def transpose(self) -> "StencilOp":
        """Plain-inner-product transpose (exact; two sign flips per D cancel)."""
        t2 = [(c3, b, c2, a, c1) for (c1, a, c2, b, c3) in self.terms2]
        t1 = [(_neg(c2), a, c1) for (c1, a, c2) in self.terms1]
        return StencilOp(self.grid, t2, t1, list(self.terms0))

    def weighted_adjoint_apply(self, values: np.ndarray, weight: np.ndarray) -> np.ndarray:
        """Apply ``W^{-1} A^T W`` for a positive pointwise weight."""
        if not hasattr(self, "_transpose"):
            self._transpose = self.transpose()
        return self._transpose.apply(weight * values) / weight

    def __add__(self, other: "StencilOp") -> "StencilOp":
        op = StencilOp(self.grid)
        op.terms2 = self.terms2 + other.terms2
        op.terms1 = self.terms1 + other.terms1
        op.terms0 = self.terms0 + other.terms0
        return op


def _c(coeff):
    if coeff is None:
        return None
    arr = np.asarray(coeff)
    if arr.ndim == 0 and arr == 1:
        return None
    return arr


def _neg(coeff):
    return np.asarray(-1.0) if coeff is None else -coeff


def _axis_symbol(grid: Grid, freqs: np.ndarray) -> np.ndarray:
    """Imaginary part of the centered-stencil symbol along one axis."""
    theta = 2.0 * np.pi * freqs / grid.points_per_axis
    if grid.stencil_order == 2:
        return np.sin(theta) / grid.h
    return (8.0 * np.sin(theta) - np.sin(2.0 * theta)) / (6.0 * grid.h)


def _lattice_mode_indices(grid: Grid):
    """rfftn indices of the modes annihilated by every centered stencil.

    A mode whose index is 0 or N/2 on every axis has zero centered
    difference along each axis (the Nyquist sawtooth is invisible to
    symmetric stencils), so such modes span the spurious kernel shared by
    all the discrete operators.  The constant mode (all zeros) is excluded:
    it is the *physical* kernel and is handled by mean gauges.
    """
    import itertools
    N = grid.points_per_axis
    combos = []
    for combo in itertools.product((0, N // 2), repeat=grid.dim):
        if any(combo):
            combos.append(combo)
    return combos


class LatticeProjection:
    """Projection zeroing the nonconstant sawtooth-lattice Fourier modes.

    The centered stencils cannot see these ``2^{2n} - 1`` modes, so they are
    pure gauge for every operator and every solution; fixing them to zero
    makes discrete solutions unique and the deflated linear systems
    nonsingular.  The discarded content of smooth fields is their spectral
    tail at the Nyquist lattice, far below stencil error.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self._indices = _lattice_mode_indices(grid)

    def apply(self, values: np.ndarray) -> np.ndarray:
        spec = scipy.fft.rfftn(values)
        for idx in self._indices:
            spec[idx] = 0.0
        return scipy.fft.irfftn(spec, s=self.grid.shape)

    def lattice_sup(self, values: np.ndarray) -> float:
        """Sup-norm of the removed component (gauge-content diagnostic)."""
        return float(np.max(np.abs(values - self.apply(values))))


class FlatSymbolPreconditioner:
    """Exact Fourier inverse of ``scale * sum_a D_a^2`` with patched kernel modes.

    This is the constant-coefficient flat canonical Laplacian when
    ``scale = 1/2``; it serves as the (optional, configurable) preconditioner
    for every Krylov solve.  The ``k = 0`` entry of the symbol is replaced by
    ``const_mode`` so bordered/shifted systems stay invertible, and the
    nonconstant sawtooth-lattice modes (where the symbol vanishes exactly)
    are projected out rather than divided by zero.
    """

    def __init__(self, grid: Grid, scale: float = 0.5, const_mode: float = 1.0,
                 shift: float = 0.0):
        self.grid = grid
        dim = grid.dim
        N = grid.points_per_axis
        sym = np.zeros((1,) * dim)
        for a in range(dim):
            if a < dim - 1:
                freqs = np.fft.fftfreq(N, d=1.0 / N)
            else:
                freqs = np.arange(N // 2 + 1, dtype=float)
            shape = [1] * dim
            shape[a] = freqs.size
            s = _axis_symbol(grid, freqs).reshape(shape)
            sym = sym - scale * s * s
        sym = sym + shift
        sym = np.broadcast_to(sym, grid.shape[:-1] + (N // 2 + 1,)).copy()
        sym[(0,) * dim] = const_mode
        for idx in _lattice_mode_indices(grid):
            sym[idx] = np.inf
        self._sym = sym

    def solve(self, values: np.ndarray) -> np.ndarray:
        spec = scipy.fft.rfftn(values)
        spec /= self._sym
        return scipy.fft.irfftn(spec, s=self.grid.shape)


def gmres_solve(matvec, b: np.ndarray, rtol: float, maxiter: int,
                M_solve=None, x0: np.ndarray | None = None,
                restart: int = 40, context: str = "gmres") -> np.ndarray:
    """GMRES on a flat vector with an optional preconditioner solve.

    Raises ``LinearNoConvergence`` (naming the calling context) when the
    relative residual target is not met.
    """
    size = b.size
    A = spla.LinearOperator((size, size), matvec=matvec, dtype=float)
    M = None
    if M_solve is not None:
        M = spla.LinearOperator((size, size), matvec=M_solve, dtype=float)
    x, info = spla.gmres(A, b, x0=x0, rtol=rtol, atol=0.0, restart=restart,
                         maxiter=max(1, maxiter // restart), M=M)
    if info != 0:
        res = np.linalg.norm(b - matvec(x)) / max(np.linalg.norm(b), 1e-300)
        if res > rtol * 10.0:
            raise LinearNoConvergence(
                f"{context}: GMRES stalled at relative residual {res:.3e}"
            )
    return x
