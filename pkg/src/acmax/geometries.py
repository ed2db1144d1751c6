"""Built-in model almost Hermitian manifolds with analytic frame data.

Three periodic models on the ``2n``-torus:

* ``flat``   -- the standard integrable structure; every bracket vanishes.
* ``twisted``-- a non-integrable J from the sheared real frame
  ``f_2 = d/dx^2 + eps sin(x^0) d/dx^3`` (n = 2 only).  Its fundamental
  2-form is the standard symplectic form, so the background is symplectic
  and already Gauduchon while J genuinely fails to be integrable.
* ``warped`` -- the twisted frame rescaled by ``exp(-v/2)`` with
  ``v = delta (cos x^0 + sin x^2)``.  The fundamental form becomes
  ``exp(v) w``, which is *not* Gauduchon, so the conformal-factor machinery
  has a nontrivial target: the factor is ``u = -v`` up to an additive
  constant.

All constructors supply closed-form coefficient derivatives; finite
differencing of frames never enters the operators (it survives only as a
test oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .calculus import Geometry, SymbolicFrame, geometry_from_frame
from .errors import ConfigError
from .grid import Grid, make_grid

__all__ = ["GeometrySpec", "flat_torus", "twisted_torus", "warped_torus", "build"]

_SQRT2 = math.sqrt(2.0)


def _zeros_like_frame(n: int, dim: int):
    return [[0.0 for _ in range(dim)] for _ in range(n)]


def _flat_frame(n: int):
    dim = 2 * n
    E = _zeros_like_frame(n, dim)
    for i in range(n):
        E[i][2 * i] = 1.0 / _SQRT2
        E[i][2 * i + 1] = -1j / _SQRT2
    dE = [_zeros_like_frame(n, dim) for _ in range(dim)]
    return E, dE


def _flat_symbolic(n: int) -> SymbolicFrame:
    xs = sp.symbols(f"x0:{2 * n}", real=True)
    E = sp.zeros(n, 2 * n)
    for i in range(n):
        E[i, 2 * i] = 1 / sp.sqrt(2)
        E[i, 2 * i + 1] = -sp.I / sp.sqrt(2)
    return SymbolicFrame(xs, E)


def flat_torus(n: int, N: int, box_length: float = 2.0 * math.pi,
               stencil_order: int = 4) -> Geometry:
    """Standard flat torus: constant unitary frame, integrable J, Euclidean g."""
    grid = make_grid(n, N, box_length, stencil_order)
    E, dE = _flat_frame(n)
    return geometry_from_frame(grid, E, dE, "flat", _flat_symbolic(n))


def _twisted_arrays(grid: Grid, eps: float):
    x0 = grid.coord(0)
    s, c = np.sin(x0), np.cos(x0)
    E, dE = _flat_frame(2)
    E[1][3] = (eps * s - 1j) / _SQRT2
    dE[0][1][3] = eps * c / _SQRT2
    return E, dE


def _twisted_symbolic(eps: float) -> SymbolicFrame:
    xs = sp.symbols("x0:4", real=True)
    E = _flat_symbolic(2).E.copy()
    E[1, 3] = (eps * sp.sin(xs[0]) - sp.I) / sp.sqrt(2)
    return SymbolicFrame(xs, E)


def twisted_torus(n: int, N: int, eps: float, box_length: float = 2.0 * math.pi,
                  stencil_order: int = 4) -> Geometry:
    """Non-integrable almost complex 4-torus.

    Real frame ``f_0 = d0, f_1 = d1, f_2 = d2 + eps sin(x^0) d3, f_3 = d3``
    with ``J f_0 = f_1``, ``J f_2 = f_3`` and g making the frame orthonormal.
    ``eps = 0`` reproduces the flat torus exactly.
    """
    if n != 2:
        raise ConfigError("the twisted torus is defined for half_dim n = 2")
    if not 0.0 <= eps < 1.0:
        raise ConfigError(f"twist amplitude must satisfy 0 <= eps < 1, got {eps}")
    grid = make_grid(n, N, box_length, stencil_order)
    E, dE = _twisted_arrays(grid, eps)
    return geometry_from_frame(grid, E, dE, "twisted", _twisted_symbolic(eps))


def warped_torus(n: int, N: int, eps: float, warp: float,
                 box_length: float = 2.0 * math.pi, stencil_order: int = 4) -> Geometry:
    """Conformally warped twisted torus: frame ``exp(-v/2) e_i``.

    With ``v = warp (cos x^0 + sin x^2)`` the metric is ``exp(v) g`` and the
    fundamental form ``exp(v) w`` is not Gauduchon; its conformal Gauduchon
    factor is ``-v`` up to an additive constant, giving the solver a
    closed-form target.
    """
    if n != 2:
        raise ConfigError("the warped torus is defined for half_dim n = 2")
    if not 0.0 <= eps < 1.0:
        raise ConfigError(f"twist amplitude must satisfy 0 <= eps < 1, got {eps}")
    if not 0.0 <= warp <= 1.0:
        raise ConfigError(f"warp amplitude must satisfy 0 <= warp <= 1, got {warp}")
    grid = make_grid(n, N, box_length, stencil_order)
    E, dE = _twisted_arrays(grid, eps)
    x0, x2 = grid.coord(0), grid.coord(2)
    v = warp * (np.cos(x0) + np.sin(x2))
    dv = [None] * grid.dim
    dv[0] = -warp * np.sin(x0)
    dv[2] = warp * np.cos(x2)
    scale = np.exp(-0.5 * v)
    En = [[scale * np.asarray(E[i][a], dtype=complex) for a in range(grid.dim)]
          for i in range(2)]
    dEn = [[[None for _ in range(grid.dim)] for _ in range(2)] for _ in range(grid.dim)]
    for b in range(grid.dim):
        for i in range(2):
            for a in range(grid.dim):
                term = np.asarray(dE[b][i][a], dtype=complex) * scale
                if dv[b] is not None:
                    term = term - 0.5 * dv[b] * scale * np.asarray(E[i][a], dtype=complex)
                dEn[b][i][a] = term
    xs = sp.symbols("x0:4", real=True)
    v_sym = warp * (sp.cos(xs[0]) + sp.sin(xs[2]))
    E_sym = _twisted_symbolic(eps).E * sp.exp(-v_sym / 2)
    geom = geometry_from_frame(grid, En, dEn, "warped", SymbolicFrame(xs, E_sym))
    geom.conformal_exponent = v
    return geom


@dataclass(frozen=True)
class GeometrySpec:
    """Declarative description of a built-in geometry (CLI-expressible)."""

    kind: str
    half_dim: int = 2
    points_per_axis: int = 16
    twist: float = 0.0
    warp: float = 0.0
    box_length: float = 2.0 * math.pi
    stencil_order: int = 4

    def __post_init__(self):
        if self.kind not in ("flat", "twisted", "warped"):
            raise ConfigError(f"unknown geometry kind {self.kind!r}")
        if self.kind in ("twisted", "warped") and self.half_dim != 2:
            raise ConfigError(f"geometry kind {self.kind!r} requires half_dim 2")
        if not 0.0 <= self.twist < 1.0:
            raise ConfigError(f"twist amplitude must satisfy 0 <= eps < 1, got {self.twist}")

    def make(self) -> Geometry:
        if self.kind == "flat":
            return flat_torus(self.half_dim, self.points_per_axis,
                              self.box_length, self.stencil_order)
        if self.kind == "twisted":
            return twisted_torus(self.half_dim, self.points_per_axis, self.twist,
                                 self.box_length, self.stencil_order)
        return warped_torus(self.half_dim, self.points_per_axis, self.twist,
                            self.warp, self.box_length, self.stencil_order)


_GEOMETRY_CACHE: dict = {}


def build(spec: GeometrySpec) -> Geometry:
    """Build (and memoize) the geometry for a spec.

    Geometries are immutable, so sharing instances is safe and lets derived
    data (conformal factors, assembled operators) be reused across runs.
    """
    geom = _GEOMETRY_CACHE.get(spec)
    if geom is None:
        geom = spec.make()
        _GEOMETRY_CACHE[spec] = geom
    return geom
