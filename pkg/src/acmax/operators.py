"""Scalar differential operators: canonical Laplacian, Laplace-Beltrami,
torsion residual, Monge-Ampere log-density and its linearization.

The canonical Laplacian is the unitary-frame trace

    Lap_C f = sum_i ( e_i conj(e_i) f - [e_i, conj(e_i)]^{(0,1)} f ),

the trace of :func:`acmax.calculus.ddbar` against the (identity) frame Gram
matrix.  The tilted metric ``gt = g + ddbar(phi)`` must stay positive
definite; determinants go through a vectorized Cholesky factorization whose
pivots fail fast on non-positivity, doubling as the positivity guard.
"""

from __future__ import annotations

import numpy as np

from .calculus import Geometry, HermitianField, ddbar, ddbar_matrix
from .errors import NotPositive
from .grid import ScalarField
from .stencilops import StencilOp

__all__ = [
    "TiltedMetric",
    "canonical_laplacian",
    "canonical_op",
    "lb_laplacian",
    "torsion_residual",
    "tilted_metric",
    "ma_log_density",
    "linearized_apply",
    "herm_min_eig",
    "herm_logdet",
    "herm_inv",
]


# -- pointwise Hermitian kernels ------------------------------------------------


def herm_min_eig(A: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of Hermitian matrices over trailing (n, n) axes."""
    n = A.shape[-1]
    if n == 1:
        return A[..., 0, 0].real
    if n == 2:
        a = A[..., 0, 0].real
        d = A[..., 1, 1].real
        off = np.abs(A[..., 0, 1]) ** 2
        half_tr = 0.5 * (a + d)
        rad = np.sqrt(0.25 * (a - d) ** 2 + off)
        return half_tr - rad
    return np.linalg.eigvalsh(A)[..., 0]


def herm_logdet(A: np.ndarray, context: str = "matrix") -> np.ndarray:
    """log det of Hermitian positive definite matrices via vectorized Cholesky.

    Fails fast with ``NotPositive`` (offending grid point and its smallest
    eigenvalue) if any pivot is nonpositive.
    """
    n = A.shape[-1]
    work = np.array(A, dtype=complex)
    logdet = np.zeros(A.shape[:-2])
    for k in range(n):
        pivot = work[..., k, k].real
        if pivot.size and np.min(pivot) <= 0.0:
            flat = int(np.argmin(pivot))
            point = np.unravel_index(flat, pivot.shape) if pivot.ndim else ()
            eig = float(herm_min_eig(A[point] if pivot.ndim else A))
            raise NotPositive(point, eig, f"{context} not positive definite")
        logdet = logdet + np.log(pivot)
        if k + 1 < n:
            col = work[..., k + 1:, k]
            work[..., k + 1:, k + 1:] -= (
                col[..., :, None] * np.conj(col[..., None, :]) / pivot[..., None, None]
            )
    return logdet


def herm_inv(A: np.ndarray) -> np.ndarray:
    """Inverse of Hermitian matrices over trailing (n, n) axes."""
    n = A.shape[-1]
    if n == 1:
        return 1.0 / A
    if n == 2:
        det = (A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]).real
        out = np.empty_like(A)
        out[..., 0, 0] = A[..., 1, 1] / det
        out[..., 1, 1] = A[..., 0, 0] / det
        out[..., 0, 1] = -A[..., 0, 1] / det
        out[..., 1, 0] = -A[..., 1, 0] / det
        return out
    return np.linalg.inv(A)


# -- operator assembly ------------------------------------------------------------


def _gram_matrix(geom: Geometry) -> np.ndarray:
    """Frame Gram matrix with point axes leading, snapped to the exact
    identity for unitary frames (both shapes broadcast against full fields)."""
    n = geom.half_dim
    if geom.is_unitary_frame():
        return np.eye(n, dtype=complex)
    return np.moveaxis(geom.gram, (0, 1), (-2, -1))


def canonical_op(geom: Geometry) -> StencilOp:
    """The canonical Laplacian as a transposable stencil term list (cached)."""
    op = geom._cache.get("canonical_op")
    if op is not None:
        return op
    n = geom.half_dim
    E = geom.E
    br = geom.brackets.coeff_ebar
    terms2, terms1 = [], []
    for i in range(n):
        for a in geom.frame_axes[i]:
            for b in geom.frame_axes[i]:
                terms2.append((E[i, a], a, np.conj(E[i, b]), b, None))
        for k in range(n):
            c = br[i, i, k]
            if not np.any(c != 0):
                continue
            for b in geom.frame_axes[k]:
                terms1.append((-c * np.conj(E[k, b]), b, None))
    op = StencilOp(geom.grid, terms2, terms1)
    geom._cache["canonical_op"] = op
    return op


def canonical_laplacian(geom: Geometry, f: ScalarField) -> ScalarField:
    """``Lap_C f``; equals the Gram-trace of ``ddbar(f)`` to machine precision."""
    geom.check_field(f)
    return ScalarField(geom.grid, canonical_op(geom).apply_real(f.values))


def lb_op(geom: Geometry) -> StencilOp:
    """Divergence-form Laplace-Beltrami operator of the frame metric (cached)."""
    op = geom._cache.get("lb_op")
    if op is not None:
        return op
    dim = geom.grid.dim
    rho = geom.sqrt_det_g
    inv_rho = 1.0 / rho
    terms2 = []
    for a in range(dim):
        for b in range(dim):
            coeff = rho * geom.g_inv[a, b]
            if np.any(coeff != 0):
                terms2.append((inv_rho, a, coeff, b, None))
    op = StencilOp(geom.grid, terms2)
    geom._cache["lb_op"] = op
    return op


def lb_laplacian(geom: Geometry, f: ScalarField) -> ScalarField:
    """Laplace-Beltrami operator with analytic metric coefficients."""
    geom.check_field(f)
    return ScalarField(geom.grid, lb_op(geom).apply_real(f.values))


def torsion_residual(geom: Geometry, f: ScalarField) -> ScalarField:
    """``R(f) = Lap f - 2 Lap_C f``, the discrete torsion-vector pairing ``tau(df)``.

    Identically zero (to rounding) when the fundamental form is closed; a
    genuine first-order operator on conformally warped models.
    """
    geom.check_field(f)
    lb = lb_op(geom).apply_real(f.values)
    can = canonical_op(geom).apply_real(f.values)
    return ScalarField(geom.grid, lb - 2.0 * can)


# -- tilted metric and Monge-Ampere density ----------------------------------------


class TiltedMetric:
    """``gt = g + ddbar(phi)`` with positivity bookkeeping.

    ``min_eigenvalue`` is the global minimum over grid points; the pointwise
    inverse is computed once on demand and cached.
    """

    def __init__(self, geom: Geometry, matrix: HermitianField):
        self.geom = geom
        self.matrix = matrix
        eigs = herm_min_eig(matrix.values)
        flat = int(np.argmin(eigs))
        self.argmin_point = np.unravel_index(flat, eigs.shape)
        self.min_eigenvalue = float(eigs[self.argmin_point])
        self._inverse = None

    @property
    def positive(self) -> bool:
        return self.min_eigenvalue > 0.0

    @property
    def inverse(self) -> np.ndarray:
        if self._inverse is None:
            if not self.positive:
                raise NotPositive(self.argmin_point, self.min_eigenvalue,
                                  "tilted metric not positive definite")
            self._inverse = herm_inv(self.matrix.values)
        return self._inverse

    def require_positive(self):
        if not self.positive:
            raise NotPositive(self.argmin_point, self.min_eigenvalue,
                              "tilted metric not positive definite")


def tilted_metric(geom: Geometry, phi: ScalarField) -> TiltedMetric:
    """Build ``gt = g + ddbar(phi)`` without raising on indefiniteness."""
    geom.check_field(phi)
    dd = ddbar(geom, phi)
    vals = dd.values + _gram_matrix(geom)
    return TiltedMetric(geom, HermitianField(geom.grid, vals, dd.hermitization_defect))


def ma_log_density(geom: Geometry, phi: ScalarField):
    """``log det(gt) - log det(g)`` pointwise, plus the tilted metric.

    Raises ``NotPositive`` (with the offending point and eigenvalue) when the
    tilted metric has a nonpositive eigenvalue anywhere.
    """
    tilted = tilted_metric(geom, phi)
    tilted.require_positive()
    logdet = herm_logdet(tilted.matrix.values, "tilted metric")
    if not geom.is_unitary_frame():
        logdet = logdet - herm_logdet(_gram_matrix(geom), "frame Gram matrix")
    field = ScalarField(geom.grid, np.ascontiguousarray(
        np.broadcast_to(logdet, geom.grid.shape)))
    return field, tilted


def background_positivity_floor(geom: Geometry) -> float:
    """Global minimum eigenvalue of the background frame Gram matrix."""
    gram = _gram_matrix(geom)
    return float(np.min(herm_min_eig(gram)))


def linearized_apply(geom: Geometry, tilted: TiltedMetric, psi: ScalarField) -> ScalarField:
    """Apply ``L psi = gt^{ij} (e_i conj(e_j) psi - [e_i, conj(e_j)]^{(0,1)} psi)``.

    This is the Gateaux derivative of :func:`ma_log_density` at the tilted
    metric; when ``gt`` is the identity it reduces to the canonical
    Laplacian.
    """
    geom.check_field(psi)
    tilted.require_positive()
    raw = ddbar_matrix(geom, psi.values)
    herm = 0.5 * (raw + np.conj(np.swapaxes(raw, -1, -2)))
    out = np.einsum("...ij,...ji->...", tilted.inverse, herm).real
    return ScalarField(geom.grid, out)


def ddbar_entry_op(geom: Geometry, i: int, j: int) -> StencilOp:
    """The single entry ``e_i conj(e_j) - [e_i, conj(e_j)]^{(0,1)}`` as a
    transposable stencil term list (cached per geometry)."""
    key = ("ddbar_entry_op", i, j)
    op = geom._cache.get(key)
    if op is not None:
        return op
    E = geom.E
    br = geom.brackets.coeff_ebar
    terms2 = [(E[i, a], a, np.conj(E[j, b]), b, None)
              for a in geom.frame_axes[i] for b in geom.frame_axes[j]]
    terms1 = []
    for k in range(geom.half_dim):
        c = br[i, j, k]
        if not np.any(c != 0):
            continue
        for b in geom.frame_axes[k]:
            terms1.append((-c * np.conj(E[k, b]), b, None))
    op = StencilOp(geom.grid, terms2, terms1)
    geom._cache[key] = op
    return op


def linearized_transpose_apply(geom: Geometry, tilted: TiltedMetric,
                               values: np.ndarray) -> np.ndarray:
    """Plain-inner-product transpose of :func:`linearized_apply` on raw arrays.

    ``L psi = Re sum_ij (gt^{-1})_{ji} D_ij psi`` gives
    ``L^T g = Re sum_ij D_ij^T ((gt^{-1})_{ji} g)`` with each ``D_ij``
    transposed exactly at the stencil-term level.
    """
    tilted.require_positive()
    inv = tilted.inverse
    n = geom.half_dim
    out = np.zeros(geom.grid.shape, dtype=complex)
    for i in range(n):
        for j in range(n):
            op_t = geom._cache.get(("ddbar_entry_op_T", i, j))
            if op_t is None:
                op_t = ddbar_entry_op(geom, i, j).transpose()
                geom._cache[("ddbar_entry_op_T", i, j)] = op_t
            out += op_t.apply(inv[..., j, i] * values)
    return out.real
