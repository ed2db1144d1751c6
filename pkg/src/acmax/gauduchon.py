"""Conformal Gauduchon factors and the canonical Poisson equation.

The formal adjoint of the canonical Laplacian with respect to the metric
volume pairing has a one-dimensional kernel spanned by a single-signed
function ``f > 0``; writing ``f = exp((n-1) u)`` makes ``exp(u) w`` a
Gauduchon metric.  The weight ``f * volume`` is the obstruction functional
for solving ``Lap_C f = h``: the equation is solvable iff the weighted
integral of ``h`` vanishes, and the solution is unique up to a constant.

Discretely the adjoint is *exact by construction* (stencil-term transposes,
see :mod:`acmax.stencilops`), so the kernel is found by shifted inverse
power iteration and the Poisson problem by a deflated (bordered) GMRES
solve with an FFT flat-Laplacian preconditioner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import Geometry, j_form_action_any
from .errors import Incompatible, KernelSignChange, NoConvergence
from .forms import RealForm, exterior_d
from .grid import ScalarField
from .operators import canonical_op
from .stencilops import FlatSymbolPreconditioner, LatticeProjection, gmres_solve

__all__ = [
    "GauduchonFactor",
    "adjoint_apply",
    "gauduchon_factor",
    "gauduchon_defect",
    "solve_canonical_poisson",
]


@dataclass
class GauduchonFactor:
    """Conformal factor ``u`` with solver diagnostics.

    ``weight_density`` is the pointwise density ``exp((n-1)u) * sqrt(det g)``
    normalized to weighted mean one; it is the measure in every
    compatibility integral and solver gauge downstream.
    """

    u: ScalarField
    kernel_residual: float
    positivity_margin: float
    gauduchon_defect: float
    weight_density: np.ndarray

    def weighted_mean(self, values: np.ndarray) -> float:
        w = np.broadcast_to(self.weight_density, values.shape)
        return float(np.sum(values * w) / np.sum(w))


def adjoint_apply(geom: Geometry, f: ScalarField) -> ScalarField:
    """Adjoint of the canonical Laplacian in the metric volume pairing.

    Satisfies ``<Lap_C a, b> = <a, adjoint b>`` to rounding for all fields,
    with ``<a, b> = integrate(a * b, volume density)``.
    """
    geom.check_field(f)
    op = canonical_op(geom)
    rho = np.broadcast_to(geom.sqrt_det_g, geom.grid.shape)
    return ScalarField(geom.grid, op.weighted_adjoint_apply(f.values, rho).real)


def _adjoint_matvec(geom: Geometry):
    op = canonical_op(geom).transpose()
    rho = np.broadcast_to(geom.sqrt_det_g, geom.grid.shape)
    inv_rho = 1.0 / rho

    def matvec(values: np.ndarray) -> np.ndarray:
        return op.apply(rho * values).real * inv_rho

    return matvec


def gauduchon_defect(geom: Geometry, u: ScalarField) -> float:
    """Sup-norm of ``d(J d((exp(u) w)^{n-1}))`` (implemented for n = 2).

    Zero exactly when ``exp(u) w`` is Gauduchon; decreases at stencil order
    when ``u`` approximates the continuum conformal factor.
    """
    if geom.half_dim != 2:
        return float("nan")
    omega = geom.metric_form()
    eu = np.exp(u.values)
    scaled = RealForm(geom.grid, 2, [eu * c for c in omega.comps])
    three = exterior_d(scaled)
    four = exterior_d(j_form_action_any(geom, three))
    return four.sup_norm()


def gauduchon_factor(geom: Geometry, seed: int = 0,
                     krylov_tol: float = 1e-11,
                     krylov_max_iter: int = 6000) -> GauduchonFactor:
    """Conformal factor making ``exp(u) w`` Gauduchon (n >= 2).

    The adjoint Laplacian has a one-dimensional kernel (the canonical
    Laplacian annihilates exactly the constants on the periodic grid), so
    the kernel vector with volume-weighted mean one solves the *bordered*
    equation

        adjoint(f) + gamma * mean_vol(f) = gamma,

    which is nonsingular and well conditioned; a single preconditioned GMRES
    solve (seeded from the constant field, or a perturbed start for
    ``seed != 0``) recovers ``f`` to solver tolerance.  ``f`` must be
    single-signed (``KernelSignChange`` otherwise); then
    ``u = log(f) / (n - 1)``, normalized so the weighted mean of
    ``exp((n-1) u)`` is one.  For n = 1 every metric is already Gauduchon
    and ``u = 0`` is returned directly.

    Results are cached on the geometry per seed.
    """
    cache_key = ("gauduchon", seed)
    got = geom._cache.get(cache_key)
    if got is not None:
        return got

    grid = geom.grid
    n = geom.half_dim
    rho = np.broadcast_to(geom.sqrt_det_g, grid.shape)

    if n == 1:
        # Every almost Hermitian metric on a 2-manifold is Gauduchon:
        # the condition constrains d(J d(w^{n-1})) with w^0 = 1.
        u = grid.zeros()
        factor = GauduchonFactor(u, 0.0, 1.0, 0.0, np.ascontiguousarray(rho))
        geom._cache[cache_key] = factor
        return factor

    adj = _adjoint_matvec(geom)
    v, residual = adjoint_kernel_vector(grid, adj, rho, seed=seed,
                                        krylov_tol=krylov_tol,
                                        krylov_max_iter=krylov_max_iter)

    fmin, fmax = float(np.min(v)), float(np.max(v))
    if fmin <= 0.0:
        raise KernelSignChange(
            f"computed kernel vector changes sign (min {fmin:.3e}, max {fmax:.3e}); "
            "the discretization is too coarse to resolve the conformal factor"
        )

    f = v / _weighted_mean(v, rho)
    u = ScalarField(grid, np.log(f) / (n - 1))
    defect = gauduchon_defect(geom, u)
    factor = GauduchonFactor(
        u=u,
        kernel_residual=residual,
        positivity_margin=float(np.min(f)),
        gauduchon_defect=defect,
        weight_density=f * rho,
    )
    geom._cache[cache_key] = factor
    return factor


def _weighted_mean(values: np.ndarray, weight: np.ndarray) -> float:
    return float(np.sum(values * weight) / np.sum(weight))


def adjoint_kernel_vector(grid, adjoint_fn, rho: np.ndarray, seed: int = 0,
                          krylov_tol: float = 1e-11, krylov_max_iter: int = 6000):
    """Near-null vector of a weighted-adjoint operator, mean-normalized.

    Solves the bordered equation ``adjoint(f) + mean_rho(f) = 1`` in the
    lattice-free gauge; the solution is the kernel vector with
    volume-weighted mean one (the sawtooth-lattice kernel directions are
    excluded, see :class:`acmax.stencilops.LatticeProjection`).  Returns
    ``(f, kernel_residual)``.
    """
    gamma = 1.0
    rho_sum = float(np.sum(rho))
    precond = FlatSymbolPreconditioner(grid, scale=0.5, const_mode=gamma)
    project = LatticeProjection(grid)

    def matvec(x: np.ndarray) -> np.ndarray:
        v = x.reshape(grid.shape)
        out = project.apply(adjoint_fn(v))
        out += gamma * (float(np.sum(v * rho)) / rho_sum)
        return out.ravel()

    x0 = np.ones(grid.shape)
    if seed != 0:
        rng = np.random.default_rng(seed)
        x0 = project.apply(x0 + 0.1 * rng.standard_normal(grid.shape))
    rhs = gamma * np.ones(grid.num_points)
    sol = gmres_solve(
        matvec, rhs, rtol=krylov_tol, maxiter=krylov_max_iter, x0=x0.ravel(),
        M_solve=lambda x: precond.solve(x.reshape(grid.shape)).ravel(),
        restart=60, context="adjoint kernel solve",
    )
    v = sol.reshape(grid.shape)
    residual = float(np.linalg.norm(adjoint_fn(v)) / np.linalg.norm(v))
    if residual > 1e-6:
        raise NoConvergence(
            f"bordered kernel solve stalled at kernel residual {residual:.3e}"
        )
    return v, residual


def solve_canonical_poisson(geom: Geometry, h: ScalarField, factor: GauduchonFactor,
                            tol_compat: float | None = None, tol_lin: float = 1e-10,
                            krylov_max_iter: int = 4000) -> ScalarField:
    """Solve ``Lap_C f = h`` for mean-zero ``f`` under the compatibility condition.

    The weighted integral of ``h`` against the Gauduchon weight must vanish
    (to ``tol_compat``, default ``1e-8 * sup|h| * volume``); otherwise the
    problem is inconsistent and ``Incompatible`` is raised.  The
    one-dimensional constant kernel is deflated by a rank-one bordered term,
    so GMRES converges to the unique weighted-mean-zero solution with
    ``|Lap_C f - h| <= tol_lin * |h|``.
    """
    geom.check_field(h)
    grid = geom.grid
    w = np.broadcast_to(factor.weight_density, grid.shape)
    defect = abs(grid.integrate_raw(h.values * w))
    hsup = float(np.max(np.abs(h.values)))
    if hsup == 0.0:
        return grid.zeros()
    tol_c = tol_compat if tol_compat is not None else 1e-8 * hsup * grid.volume
    if defect > tol_c:
        raise Incompatible(
            f"weighted mean of the right-hand side is {defect:.3e} "
            f"(tolerance {tol_c:.3e}); the equation has no solution"
        )

    op = canonical_op(geom)
    wsum = float(np.sum(w))
    gamma = 1.0
    project = LatticeProjection(grid)

    def matvec(x: np.ndarray) -> np.ndarray:
        v = x.reshape(grid.shape)
        out = project.apply(op.apply_real(v))
        out += gamma * (float(np.sum(v * w)) / wsum)
        return out.ravel()

    precond = FlatSymbolPreconditioner(grid, scale=0.5, const_mode=gamma)
    rhs = project.apply(h.values)
    sol = gmres_solve(
        matvec, rhs.ravel(), rtol=min(tol_lin, 1e-11), maxiter=krylov_max_iter,
        M_solve=lambda x: precond.solve(x.reshape(grid.shape)).ravel(),
        restart=60, context="canonical Poisson solve",
    )
    f = sol.reshape(grid.shape)
    f = f - _weighted_mean(f, w)
    return ScalarField(grid, f)
