"""Closed-form forward evaluation for manufactured solutions.

Given a chosen potential ``phi*`` in closed form, the exact Monge-Ampere
log-density ``F* = log det(g + hess(phi*)) - log det(g)`` is computed
symbolically through the frame's closed-form coefficients and sampled on
any grid.  Solving with data ``F*`` then measures pure discretization
error against ``phi*`` -- the reference is resolution-independent.

The symbolic route avoids the bracket decomposition: the Hermitian matrix
of the almost-complex Hessian can be read off the 2-form ``d(J d phi)``,

    a_ij = -(i/2) * (d(J d phi))(e_i, conj(e_j)),

because the non-(1,1) part of a 2-form evaluates to zero on
``(e_i, conj(e_j))`` pairs.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from .calculus import Geometry
from .errors import ConfigError
from .grid import ScalarField

__all__ = [
    "trig_expression",
    "symbolic_complex_hessian",
    "symbolic_log_density",
    "sample_expression",
    "manufactured_forcing",
]


def trig_expression(xs, terms) -> sp.Expr:
    """Build ``sum amp * cos/sin(k . x)`` from (multi-index, amplitude) terms.

    ``terms`` is an iterable of dicts with keys ``k`` (integer multi-index),
    ``amp``, and optional ``kind`` ("cos" default, or "sin").
    """
    expr = sp.Integer(0)
    for term in terms:
        k = term["k"]
        if len(k) != len(xs):
            raise ConfigError(f"multi-index {k} has wrong length")
        amp = sp.Float(term["amp"])
        arg = sum(int(ki) * x for ki, x in zip(k, xs))
        kind = term.get("kind", "cos")
        if kind == "cos":
            expr += amp * sp.cos(arg)
        elif kind == "sin":
            expr += amp * sp.sin(arg)
        else:
            raise ConfigError(f"unknown trig kind {kind!r}")
    return expr


def _symbolic_J(sym) -> sp.Matrix:
    """Coordinate matrix of J from the symbolic frame (J f_2i = f_2i+1)."""
    E = sym.E
    n, dim = E.shape
    Fr = sp.zeros(dim, dim)
    for i in range(n):
        for a in range(dim):
            Fr[2 * i, a] = sp.sqrt(2) * sp.re(E[i, a])
            Fr[2 * i + 1, a] = -sp.sqrt(2) * sp.im(E[i, a])
    V = Fr.T  # columns are the real frame vectors
    J0 = sp.zeros(dim, dim)
    for i in range(n):
        J0[2 * i + 1, 2 * i] = 1
        J0[2 * i, 2 * i + 1] = -1
    return sp.simplify(V * J0 * V.inv())


def symbolic_complex_hessian(geom: Geometry, phi: sp.Expr) -> sp.Matrix:
    """Exact frame-component matrix of the almost-complex Hessian of ``phi``."""
    sym = geom.symbolic
    if sym is None:
        raise ConfigError(f"geometry {geom.name!r} carries no symbolic frame")
    xs = sym.xs
    E = sym.E
    n, dim = E.shape
    J = _symbolic_J(sym)
    dphi = [sp.diff(phi, x) for x in xs]
    lam = [-sum(J[g, b] * dphi[g] for g in range(dim)) for b in range(dim)]
    M = sp.zeros(dim, dim)
    for a in range(dim):
        for b in range(dim):
            M[a, b] = sp.diff(lam[b], xs[a]) - sp.diff(lam[a], xs[b])
    A = sp.zeros(n, n)
    half_i = -sp.I / 2
    for i in range(n):
        for j in range(n):
            val = sp.Integer(0)
            for a in range(dim):
                for b in range(dim):
                    if M[a, b] != 0:
                        val += M[a, b] * E[i, a] * sp.conjugate(E[j, b])
            A[i, j] = half_i * val
    return A


def symbolic_log_density(geom: Geometry, phi: sp.Expr) -> sp.Expr:
    """Exact ``log det(gram + hess) - log det(gram)`` (unitary frames: gram = Id)."""
    A = symbolic_complex_hessian(geom, phi)
    n = A.shape[0]
    tilted = sp.eye(n) + A
    det = tilted.det()
    det = sp.simplify(sp.expand(sp.re(sp.expand(det))))
    return sp.log(det)


def sample_expression(geom: Geometry, expr: sp.Expr) -> ScalarField:
    """Evaluate a closed-form expression on the geometry's grid."""
    sym = geom.symbolic
    if sym is None:
        raise ConfigError(f"geometry {geom.name!r} carries no symbolic frame")
    fn = sp.lambdify(sym.xs, expr, modules="numpy")
    vals = fn(*geom.grid.coords())
    vals = np.asarray(vals, dtype=complex)
    if vals.size > 1 and float(np.max(np.abs(vals.imag))) > 1e-10:
        raise ConfigError("expression did not evaluate to a real field")
    out = np.broadcast_to(vals.real, geom.grid.shape)
    return ScalarField(geom.grid, np.ascontiguousarray(out))


def manufactured_forcing(geom: Geometry, phi: sp.Expr):
    """Exact forcing F* and the sampled reference potential for ``phi*``.

    Solving the equation with data ``F*`` at any resolution recovers
    ``phi*`` up to the stencil's discretization error (and the sup
    normalization shift), so halving ``h`` must shrink the error at the
    stencil order.
    """
    F_expr = symbolic_log_density(geom, phi)
    F = sample_expression(geom, F_expr)
    phi_ref = sample_expression(geom, phi)
    return F, phi_ref
