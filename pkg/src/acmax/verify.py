"""Oracles and monitors: eigenvalue perturbation formulas, the Hessian
decomposition through J, determinant superadditivity, the wedge/J pairing
identity, taming checks, and a priori estimate dashboards.

These are the pointwise-algebra facts the solvers lean on; everything here
is either a closed formula checked against an independent oracle or a
monitored quantity sampled along solve paths.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .calculus import Geometry, ddbar, hermitian_to_form, j_form_action_any
from .errors import DegenerateTopEigenvalue, DegreeMismatch, NonPSDInput
from .forms import RealForm, basis_indices, exterior_d, wedge
from .grid import ScalarField
from .operators import tilted_metric

__all__ = [
    "EstimateMonitors",
    "eig_top_derivatives",
    "hessian_decomposition",
    "det_superadditivity_check",
    "wedge_j_identity_check",
    "estimate_monitors",
    "taming_check",
    "identity_suite",
    "random_trig_field",
]


# -- largest-eigenvalue perturbation formulas -------------------------------------


def eig_top_derivatives(Phi: np.ndarray, gap_min: float = 1e-6):
    """First and second derivatives of the top eigenvalue of a symmetric matrix.

    Treating the matrix entries as independent variables,

        d lambda_1 / d Phi_{ab}            = V1_a V1_b
        d^2 lambda_1 / d Phi_{ab} d Phi_{cd} =
            sum_{m>1} (V1_a Vm_b Vm_c V1_d + Vm_a V1_b V1_c Vm_d)
                      / (lambda_1 - lambda_m)

    where ``V1`` is the unit top eigenvector.  Requires a simple top
    eigenvalue (``DegenerateTopEigenvalue`` if the spectral gap is below
    ``gap_min``).
    """
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim != 2 or Phi.shape[0] != Phi.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(Phi - Phi.T)) > 1e-12 * max(1.0, np.max(np.abs(Phi))):
        raise ValueError("expected a symmetric matrix")
    lam, V = np.linalg.eigh(Phi)
    top = lam[-1]
    gap = top - lam[-2]
    if gap < gap_min:
        raise DegenerateTopEigenvalue(
            f"top eigenvalue gap {gap:.3e} below {gap_min:.3e}"
        )
    v1 = V[:, -1]
    grad = np.outer(v1, v1)
    rest = V[:, :-1]
    inv_gaps = 1.0 / (top - lam[:-1])
    # curv[a,b,c,d] = sum_m w_m (v1_a m_b m_c v1_d + m_a v1_b v1_c m_d)
    curv = np.einsum("a,bm,cm,d,m->abcd", v1, rest, rest, v1, inv_gaps)
    curv = curv + np.einsum("am,b,c,dm,m->abcd", rest, v1, v1, rest, inv_gaps)
    return grad, curv


# -- Hessian decomposition through J ---------------------------------------------


def hessian_decomposition(geom: Geometry, v: ScalarField, point: tuple):
    """Split the J-Hessian bilinear form at a grid point.

    Returns ``(H, DJ, E)`` where ``H(X, Y)`` is the symmetric form associated
    to the almost-complex Hessian of ``v`` (evaluated on ``(X, JY)``),
    ``DJ = (D^2 v + J^T D^2 v J) / 2`` is the J-invariant part of the
    coordinate Hessian, and ``E = H - DJ``.  On a flat structure ``E``
    vanishes; in general it depends linearly on the gradient of ``v``.
    """
    geom.check_field(v)
    grid = geom.grid
    dim = grid.dim
    point = tuple(int(p) for p in point)

    gamma = hermitian_to_form(geom, ddbar(geom, v))
    Jp = np.empty((dim, dim))
    for c in range(dim):
        for b in range(dim):
            Jp[c, b] = np.broadcast_to(geom.J[c, b], grid.shape)[point]
    gm = np.zeros((dim, dim))
    for (a, b), comp in zip(basis_indices(dim, 2), gamma.comps):
        val = np.broadcast_to(comp, grid.shape)[point]
        gm[a, b] = val
        gm[b, a] = -val
    H = gm @ Jp

    D2 = np.empty((dim, dim))
    firsts = [grid.diff_raw(v.values, a) for a in range(dim)]
    for a in range(dim):
        for b in range(a, dim):
            val = grid.diff_raw(firsts[a], b)[point]
            D2[a, b] = val
            D2[b, a] = val
    DJ = 0.5 * (D2 + Jp.T @ D2 @ Jp)
    H = 0.5 * (H + H.T)
    return H, DJ, H - DJ


def det_superadditivity_check(A: np.ndarray, B: np.ndarray, floor: float = -1e-12):
    """Verdict and slack for ``det(A+B) >= det(A) + det(B)`` on PSD matrices."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    for name, M in (("A", A), ("B", B)):
        eig = np.linalg.eigvalsh(0.5 * (M + M.T))
        if eig[0] < floor:
            raise NonPSDInput(f"matrix {name} has eigenvalue {eig[0]:.3e} below {floor}")
    slack = float(np.linalg.det(A + B) - np.linalg.det(A) - np.linalg.det(B))
    return slack >= floor, slack


def wedge_j_identity_check(geom: Geometry, alpha: RealForm, beta: RealForm) -> float:
    """Sup-norm of ``alpha ^ (J beta) - (-1)^p (J alpha) ^ beta`` (top forms).

    A purely pointwise, metric-free identity; the return should sit at
    rounding level for any form pair with ``deg alpha + deg beta = 2n`` and
    ``p = deg beta <= 2``.
    """
    if beta.degree > 2:
        raise DegreeMismatch("identity exposed for deg(beta) <= 2")
    if alpha.degree + beta.degree != geom.grid.dim:
        raise DegreeMismatch("degrees must sum to the top degree")
    lhs = wedge(alpha, j_form_action_any(geom, beta))
    rhs = ((-1.0) ** beta.degree) * wedge(j_form_action_any(geom, alpha), beta)
    return (lhs - rhs).sup_norm()


# -- estimate monitors --------------------------------------------------------------


@dataclass
class EstimateMonitors:
    """Scalar dashboard of the quantities the a priori theory bounds."""

    sup_abs_phi: float
    sup_grad: float
    sup_real_hessian: float
    lambda1_max: float
    min_eig_tilted: float

    def as_dict(self) -> dict:
        return asdict(self)


def real_hessian(geom: Geometry, phi: ScalarField) -> np.ndarray:
    """Covariant Hessian ``D_a D_b phi - Gamma^c_{ab} D_c phi`` (point-last)."""
    grid = geom.grid
    dim = grid.dim
    firsts = [grid.diff_raw(phi.values, a) for a in range(dim)]
    out = np.empty(grid.shape + (dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            val = grid.diff_raw(firsts[a], b)
            for c in range(dim):
                gam = geom.christoffel[c, a, b]
                if np.any(gam != 0):
                    val = val - gam * firsts[c]
            out[..., a, b] = val
            out[..., b, a] = val
    return out


def estimate_monitors(geom: Geometry, phi: ScalarField, F: ScalarField | None = None) -> EstimateMonitors:
    """Compute the monitor bundle at an admissible iterate.

    ``lambda1_max`` is the global maximum of the largest eigenvalue of the
    real Hessian measured against ``g`` (generalized eigenvalue through the
    metric Cholesky factor).
    """
    grid = geom.grid
    dim = grid.dim
    tilted = tilted_metric(geom, phi)
    tilted.require_positive()

    sup_abs = float(np.max(np.abs(phi.values)))
    if sup_abs == 0.0:
        # every derivative of the zero field vanishes identically
        return EstimateMonitors(0.0, 0.0, 0.0, 0.0, tilted.min_eigenvalue)

    grad2 = np.zeros(grid.shape)
    from .calculus import frame_apply_raw
    for i in range(geom.half_dim):
        grad2 = grad2 + np.abs(frame_apply_raw(geom, i, phi.values)) ** 2
    sup_grad = float(np.sqrt(np.max(grad2)))

    hess = real_hessian(geom, phi)
    ginv = np.moveaxis(geom.g_inv, (0, 1), (-2, -1))
    norm2 = np.einsum("...ac,...bd,...ab,...cd->...", ginv, ginv, hess, hess)
    sup_hess = float(np.sqrt(np.max(norm2)))

    # generalized top eigenvalue of (hess, g) via the metric Cholesky factor
    gmat = np.moveaxis(geom.g, (0, 1), (-2, -1))
    L = np.linalg.cholesky(gmat)
    Linv = np.linalg.inv(L)
    S = Linv @ hess @ np.swapaxes(Linv, -1, -2)
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    lam1 = float(np.max(np.linalg.eigvalsh(S)[..., -1]))

    return EstimateMonitors(
        sup_abs_phi=sup_abs,
        sup_grad=sup_grad,
        sup_real_hessian=sup_hess,
        lambda1_max=lam1,
        min_eig_tilted=tilted.min_eigenvalue,
    )


# -- taming check -------------------------------------------------------------------


def taming_check(geom: Geometry, phi: ScalarField) -> dict:
    """Closedness and volume domination of ``w + d(J d phi)/2``.

    Uses the form route throughout: with ``beta = d(J d phi)`` and its
    J-invariant part ``beta11``, the candidate symplectic form is
    ``wt = w + beta/2`` and the comparison form is ``w + beta11/2``.  Their
    top powers differ by the square of the non-(1,1) half, which is
    pointwise nonnegative, so ``wt^n >= (w^(1,1) + i ddbar phi)^n`` up to
    rounding.
    """
    geom.check_field(phi)
    from .calculus import d_J_d, pq11
    if geom.grid.half_dim != 2:
        raise DegreeMismatch("taming check implemented for n = 2")
    omega = geom.metric_form()
    beta = d_J_d(geom, phi)
    beta11 = pq11(geom, beta)
    wt = omega + 0.5 * beta
    w11 = omega + 0.5 * beta11
    d_wt = exterior_d(wt)
    top_t = wedge(wt, wt)
    top_11 = wedge(w11, w11)
    diff = top_t.comps[0] - top_11.comps[0]
    return {
        "sup_d_omega_tilde": d_wt.sup_norm(),
        "min_power_slack": float(np.min(diff)),
        "sup_power_slack": float(np.max(diff)),
    }


# -- randomized identity suite -------------------------------------------------------


def random_trig_field(grid, rng, kmax: int = 2, nmodes: int = 4, amp: float = 1.0) -> ScalarField:
    """Band-limited random trig polynomial, normalized to ``sup <= amp``."""
    vals = np.zeros(grid.shape)
    for _ in range(nmodes):
        k = rng.integers(-kmax, kmax + 1, size=grid.dim)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        coeff = rng.uniform(-1.0, 1.0)
        arg = sum(int(ki) * grid.coord(i) for i, ki in enumerate(k))
        vals = vals + coeff * np.cos(arg + phase)
    sup = np.max(np.abs(vals))
    if sup > 0:
        vals = vals * (amp / sup)
    return ScalarField(grid, np.ascontiguousarray(np.broadcast_to(vals, grid.shape)))


def random_form(grid, rng, degree: int) -> RealForm:
    comps = [rng.uniform(-1.0, 1.0, size=grid.shape) for _ in basis_indices(grid.dim, degree)]
    return RealForm(grid, degree, comps)


def _fd_top_eigenvalue(Phi: np.ndarray, E: np.ndarray, t: float) -> float:
    vals = np.linalg.eigvals(Phi + t * E)
    return float(np.max(vals.real))


def check_eig_derivatives(rng, dim: int = 4, samples: int = 100, gap_min: float = 1e-3):
    """Compare the closed-form eigenvalue derivatives with central differences."""
    worst_grad = 0.0
    worst_curv = 0.0
    done = 0
    while done < samples:
        M = rng.standard_normal((dim, dim))
        Phi = 0.5 * (M + M.T)
        lam = np.linalg.eigvalsh(Phi)
        gap = lam[-1] - lam[-2]
        if gap < gap_min:
            continue
        done += 1
        grad, curv = eig_top_derivatives(Phi, gap_min=gap_min * 0.5)
        t = 5e-4 * min(gap, 1.0)
        fd_grad = np.empty((dim, dim))
        for a in range(dim):
            for b in range(dim):
                E = np.zeros((dim, dim))
                E[a, b] = 1.0
                fd_grad[a, b] = (_fd_top_eigenvalue(Phi, E, t)
                                 - _fd_top_eigenvalue(Phi, E, -t)) / (2.0 * t)
        worst_grad = max(worst_grad,
                         float(np.max(np.abs(fd_grad - grad)) / max(1.0, np.max(np.abs(grad)))))
        # mixed second derivatives on a few random entry pairs
        for _ in range(4):
            a, b, c, d = rng.integers(0, dim, size=4)
            E1 = np.zeros((dim, dim)); E1[a, b] = 1.0
            E2 = np.zeros((dim, dim)); E2[c, d] = 1.0
            fpp = _fd_top_eigenvalue(Phi, E1 * t + E2 * t, 1.0)
            fpm = _fd_top_eigenvalue(Phi, E1 * t - E2 * t, 1.0)
            fmp = _fd_top_eigenvalue(Phi, -E1 * t + E2 * t, 1.0)
            fmm = _fd_top_eigenvalue(Phi, -E1 * t - E2 * t, 1.0)
            fd = (fpp - fpm - fmp + fmm) / (4.0 * t * t)
            scale = max(1.0, float(np.max(np.abs(curv))))
            worst_curv = max(worst_curv, abs(fd - curv[a, b, c, d]) / scale)
    return {"grad_rel_err": float(worst_grad), "curv_rel_err": float(worst_curv),
            "samples": done}


def identity_suite(seed: int = 0, geom: Geometry | None = None,
                   eig_samples: int = 100, det_samples: int = 1000,
                   wedge_samples: int = 100) -> dict:
    """Run the randomized pointwise-identity suite; returns per-check records.

    Covers: top-eigenvalue derivative formulas against central differences,
    determinant superadditivity on random PSD pairs, the wedge/J pairing
    identity, and ``J^2 = (-1)^p`` on forms.
    """
    rng = np.random.default_rng(seed)
    results = {}

    if eig_samples > 0:
        eig = check_eig_derivatives(rng, samples=eig_samples)
        results["eig_top_derivatives"] = {
            **eig,
            "passed": bool(eig["grad_rel_err"] <= 1e-6 and eig["curv_rel_err"] <= 1e-6),
        }

    if det_samples > 0:
        worst = 0.0
        for _ in range(det_samples):
            dim = int(rng.integers(2, 7))
            A = rng.standard_normal((dim, dim))
            B = rng.standard_normal((dim, dim))
            A = A @ A.T
            B = B @ B.T
            ok, slack = det_superadditivity_check(A, B)
            worst = min(worst, slack)
        results["det_superadditivity"] = {"min_slack": float(worst),
                                          "passed": bool(worst >= -1e-12),
                                          "samples": det_samples}

    if geom is None:
        from .geometries import twisted_torus
        geom = twisted_torus(2, 8, 0.3)
    grid = geom.grid
    if wedge_samples > 0:
        worst_wedge = 0.0
        for _ in range(wedge_samples):
            p = int(rng.integers(1, 3))
            beta = random_form(grid, rng, p)
            alpha = random_form(grid, rng, grid.dim - p)
            worst_wedge = max(worst_wedge, wedge_j_identity_check(geom, alpha, beta))
        results["wedge_j_identity"] = {"sup_residual": float(worst_wedge),
                                       "passed": bool(worst_wedge <= 1e-12),
                                       "samples": wedge_samples}

    worst_j2 = 0.0
    for p in (1, 2):
        form = random_form(grid, rng, p)
        jj = j_form_action_any(geom, j_form_action_any(geom, form))
        target = form if p % 2 == 0 else -1.0 * form
        worst_j2 = max(worst_j2, (jj - target).sup_norm())
    results["j_squared_on_forms"] = {"sup_residual": float(worst_j2),
                                     "passed": bool(worst_j2 <= 1e-12)}

    results["passed"] = bool(all(v["passed"] for v in results.values()
                                 if isinstance(v, dict)))
    return results
