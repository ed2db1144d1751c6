"""Almost-complex frame calculus on periodic grids.

A :class:`Geometry` bundles a global complex frame ``e_i = sum_a E[i,a] d/dx^a``
together with its analytic coefficient derivatives.  Everything else -- the
almost complex structure ``J``, the Riemannian metric making the real frame
orthonormal, Lie brackets with their ``(0,1)`` projections, Christoffel
symbols -- is derived pointwise at construction time.

Frame coefficients vary over the grid but usually only along a few axes, so
all geometry tensors are stored on a common *broadcast shape*: arrays whose
axes of size one mark constant directions.  Only fields that depend on an
unknown function (Hessians, tilted metrics) are materialized at full grid
size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forms
from .errors import FrameDegenerate, GridMismatch, UnsupportedDegree
from .forms import RealForm, exterior_d, j_action as _j_action_matrix
from .grid import ComplexField, Grid

__all__ = [
    "Geometry",
    "HermitianField",
    "BracketData",
    "geometry_from_frame",
    "frame_apply",
    "bracket_01",
    "ddbar",
    "ddbar_matrix",
    "j_form_action",
    "pq11",
    "d_J_d",
    "nijenhuis_defect",
    "hermitian_to_form",
    "form_to_hermitian",
]


def _as_batch(tensor: np.ndarray, ncomp_axes: int) -> np.ndarray:
    """Move leading component axes behind the broadcast (point) axes."""
    src = tuple(range(ncomp_axes))
    dst = tuple(range(-ncomp_axes, 0))
    return np.moveaxis(tensor, src, dst)


def _from_batch(tensor: np.ndarray, ncomp_axes: int) -> np.ndarray:
    src = tuple(range(-ncomp_axes, 0))
    dst = tuple(range(ncomp_axes))
    return np.moveaxis(tensor, src, dst)


@dataclass
class SymbolicFrame:
    """Closed-form frame data for exact forward evaluations (sympy exprs)."""

    xs: tuple
    E: object  # sympy Matrix, n x 2n


class HermitianField:
    """Per-point ``n x n`` Hermitian matrices on a grid.

    The stored matrix is exactly Hermitian (symmetrized); the size of the
    discarded skew part is kept in ``hermitization_defect`` as a free
    consistency diagnostic.
    """

    def __init__(self, grid: Grid, values: np.ndarray, hermitization_defect: float = 0.0):
        n = grid.half_dim
        values = np.asarray(values, dtype=complex)
        if values.shape != grid.shape + (n, n):
            raise GridMismatch(
                f"expected shape {grid.shape + (n, n)}, got {values.shape}"
            )
        self.grid = grid
        self.values = values
        self.hermitization_defect = float(hermitization_defect)

    @classmethod
    def from_raw(cls, grid: Grid, raw: np.ndarray) -> "HermitianField":
        """Symmetrize a raw matrix field, recording the defect."""
        adj = np.conj(np.swapaxes(raw, -1, -2))
        defect = float(np.max(np.abs(raw - adj)))
        return cls(grid, 0.5 * (raw + adj), defect)

    def entry(self, i: int, j: int) -> np.ndarray:
        return self.values[..., i, j]

    def trace(self) -> np.ndarray:
        return np.einsum("...ii->...", self.values).real

    def __add__(self, other):
        if isinstance(other, HermitianField):
            return HermitianField(self.grid, self.values + other.values,
                                  max(self.hermitization_defect, other.hermitization_defect))
        return HermitianField(self.grid, self.values + other, self.hermitization_defect)

    def __repr__(self):  # pragma: no cover - cosmetic
        return (f"HermitianField(n={self.grid.half_dim}, defect="
                f"{self.hermitization_defect:.3g})")


class BracketData:
    """Frame coefficients of the Lie brackets ``[e_i, conj(e_j)]``.

    ``coeff_e[i, j, k]`` multiplies ``e_k`` and ``coeff_ebar[i, j, k]``
    multiplies ``conj(e_k)``; the ``(0,1)`` part of the bracket is the
    ``coeff_ebar`` block.  Conjugation symmetry
    ``[e_j, conj(e_i)] = -conj([e_i, conj(e_j)])`` holds by construction.
    """

    def __init__(self, coeff_e: np.ndarray, coeff_ebar: np.ndarray):
        self.coeff_e = coeff_e
        self.coeff_ebar = coeff_ebar

    def part_01(self, i: int, j: int) -> np.ndarray:
        return self.coeff_ebar[i, j]

    def part_10(self, i: int, j: int) -> np.ndarray:
        return self.coeff_e[i, j]


class Geometry:
    """A parallelizable almost Hermitian model geometry.

    Built by :func:`geometry_from_frame`; immutable afterwards.  All tensors
    are indexed component-first with trailing broadcast (point) axes:
    ``E[i, a]``, ``J[c, b]`` (``J d/dx^b = sum_c J[c,b] d/dx^c``),
    ``g[a, b]``, ``christoffel[c, a, b]`` etc.
    """

    def __init__(self, grid: Grid, name: str, E: np.ndarray, dE: np.ndarray,
                 symbolic: SymbolicFrame | None = None):
        self.grid = grid
        self.name = name
        self.E = E
        self.dE = dE
        self.symbolic = symbolic
        self._cache: dict = {}
        self._derive()
        self._validate()

    # -- construction --------------------------------------------------------

    def _derive(self):
        n = self.grid.half_dim
        dim = self.grid.dim
        E, dE = self.E, self.dE

        # Real frame f_{2i} = sqrt(2) Re e_i, f_{2i+1} = -sqrt(2) Im e_i,
        # so that e_i = (f_{2i} - i f_{2i+1}) / sqrt(2).
        Fr = np.empty((dim, dim) + E.shape[2:])
        dFr = np.empty((dim, dim, dim) + E.shape[2:])
        s2 = np.sqrt(2.0)
        for i in range(n):
            Fr[2 * i] = s2 * E[i].real
            Fr[2 * i + 1] = -s2 * E[i].imag
            for b in range(dim):
                dFr[b, 2 * i] = s2 * dE[b, i].real
                dFr[b, 2 * i + 1] = -s2 * dE[b, i].imag
        self.real_frame = Fr
        self._d_real_frame = dFr

        FrB = _as_batch(Fr, 2)  # (*b, a, alpha)
        det = np.linalg.det(FrB)
        if np.min(np.abs(det)) < 1e-10:
            k = int(np.argmin(np.abs(det)))
            raise FrameDegenerate(f"real frame determinant ~0 (min |det|={np.min(np.abs(det)):.3g})")
        # Coframe rows f^a dual to f_a:  C @ Fr^T = Id.
        CB = np.linalg.inv(np.swapaxes(FrB, -1, -2))
        self.coframe = _from_batch(CB, 2)

        # J = V J0 V^{-1} with V = Fr^T (columns are the frame vectors).
        J0 = np.zeros((dim, dim))
        for i in range(n):
            J0[2 * i + 1, 2 * i] = 1.0
            J0[2 * i, 2 * i + 1] = -1.0
        VB = np.swapaxes(FrB, -1, -2)
        JB = VB @ J0 @ np.linalg.inv(VB)
        self.J = _from_batch(JB, 2)

        # Metric g = C^T C makes the real frame orthonormal.
        gB = np.swapaxes(CB, -1, -2) @ CB
        gB = 0.5 * (gB + np.swapaxes(gB, -1, -2))
        self.g = _from_batch(gB, 2)
        self.g_inv = _from_batch(np.linalg.inv(gB), 2)
        self.det_g = np.linalg.det(gB)
        self.sqrt_det_g = np.sqrt(self.det_g)

        # Analytic metric derivatives via dC = -C dFr^T C.
        dg = np.empty((dim,) + self.g.shape)
        dCs = []
        for bax in range(dim):
            dFrB = _as_batch(dFr[bax], 2)
            dCB = -CB @ np.swapaxes(dFrB, -1, -2) @ CB
            dCs.append(dCB)
            dgB = np.swapaxes(dCB, -1, -2) @ CB + np.swapaxes(CB, -1, -2) @ dCB
            dg[bax] = _from_batch(dgB, 2)
        self.dg = dg

        # Christoffel symbols of g (closed form via analytic dg).
        ginv = self.g_inv
        Gamma = np.einsum(
            "cd...,dab...->cab...",
            ginv,
            0.5 * (np.moveaxis(dg, (0, 1, 2), (1, 0, 2))        # d_a g_{d b}
                   + np.moveaxis(dg, (0, 1, 2), (2, 1, 0))      # d_b g_{a d}
                   - np.moveaxis(dg, (0, 1, 2), (0, 1, 2))),    # d_d g_{a b}
        )
        self.christoffel = Gamma

        # Unitary coframe theta^i (dual to e_i): rows of P^{-1} where the
        # columns of P are e_1..e_n, conj(e_1)..conj(e_n).
        P = np.concatenate([np.swapaxes(E, 0, 1), np.swapaxes(np.conj(E), 0, 1)], axis=1)
        PB = _as_batch(P.astype(complex), 2)
        PinvB = np.linalg.inv(PB)
        self._frame_matrix = P
        self._frame_matrix_inv = _from_batch(PinvB, 2)
        self.theta = self._frame_matrix_inv[:n]

        # Hermitian Gram matrix g(e_i, conj(e_j)); identity for unitary frames.
        self.gram = np.einsum("ia...,jb...,ab...->ij...", E, np.conj(E), self.g.astype(complex))

        # Lie brackets [e_i, conj(e_j)] from analytic coefficient derivatives,
        # decomposed in the complex frame basis.
        w = np.einsum("ib...,bja...->ija...", E, np.conj(dE)) \
            - np.einsum("jb...,bia...->ija...", np.conj(E), dE)
        coeffs = np.einsum("ka...,ija...->ijk...", self._frame_matrix_inv, w)
        self.brackets = BracketData(coeffs[:, :, :n], coeffs[:, :, n:])

        # Static sparsity: which axes each frame vector actually uses.
        self.frame_axes = [
            [a for a in range(dim) if np.any(E[i, a] != 0)] for i in range(n)
        ]

    def _validate(self):
        dim = self.grid.dim
        JB = _as_batch(self.J, 2)
        j2 = JB @ JB + np.eye(dim)
        if np.max(np.abs(j2)) > 1e-12:
            raise FrameDegenerate(f"J^2 + Id = {np.max(np.abs(j2)):.3g} exceeds 1e-12")
        gB = _as_batch(self.g, 2)
        compat = np.swapaxes(JB, -1, -2) @ gB @ JB - gB
        if np.max(np.abs(compat)) > 1e-12:
            raise FrameDegenerate("metric is not J-invariant to 1e-12")
        br = self.brackets
        sym = br.coeff_ebar + np.conj(np.swapaxes(br.coeff_e, 0, 1))
        if np.max(np.abs(sym)) > 1e-10:
            raise FrameDegenerate("bracket conjugation symmetry violated")

    # -- conveniences ----------------------------------------------------------

    @property
    def half_dim(self) -> int:
        return self.grid.half_dim

    def is_unitary_frame(self, tol: float = 1e-12) -> bool:
        key = ("is_unitary", tol)
        got = self._cache.get(key)
        if got is None:
            n = self.half_dim
            eye = np.eye(n).reshape((n, n) + (1,) * (self.gram.ndim - 2))
            got = bool(np.max(np.abs(self.gram - eye)) <= tol)
            self._cache[key] = got
        return got

    def volume_density(self) -> np.ndarray:
        """Density of the metric volume element against ``dx^0...dx^{2n-1}``."""
        return self.sqrt_det_g

    def metric_form(self) -> RealForm:
        """The fundamental real ``(1,1)`` form ``w(X, Y) = g(JX, Y)``."""
        dim = self.grid.dim
        comps = []
        for (a, b) in forms.basis_indices(dim, 2):
            val = np.einsum("c...,c...->...", self.J[:, a], self.g[:, b])
            comps.append(val)
        return RealForm(self.grid, 2, comps)

    def check_field(self, f):
        if f.grid != self.grid:
            raise GridMismatch("field lives on a different grid")


def geometry_from_frame(grid: Grid, frame_coeff, frame_coeff_deriv, name: str,
                        symbolic: SymbolicFrame | None = None) -> Geometry:
    """Assemble a Geometry from frame coefficients and their derivatives.

    ``frame_coeff[i][a]`` and ``frame_coeff_deriv[b][i][a]`` may be scalars or
    arrays broadcastable to the grid; they are the coefficients ``E_i^a`` with
    ``e_i = sum_a E_i^a d/dx^a`` and their analytic partials ``d_b E_i^a``.
    """
    n, dim = grid.half_dim, grid.dim
    entries = [[np.asarray(frame_coeff[i][a], dtype=complex) for a in range(dim)]
               for i in range(n)]
    dentries = [[[np.asarray(frame_coeff_deriv[b][i][a], dtype=complex)
                  for a in range(dim)] for i in range(n)] for b in range(dim)]
    bshape = np.broadcast_shapes(
        *[e.shape for row in entries for e in row],
        *[e.shape for blk in dentries for row in blk for e in row],
    )
    np.broadcast_shapes(bshape, grid.shape)
    E = np.empty((n, dim) + bshape, dtype=complex)
    dE = np.empty((dim, n, dim) + bshape, dtype=complex)
    for i in range(n):
        for a in range(dim):
            E[i, a] = np.broadcast_to(entries[i][a], bshape)
            for b in range(dim):
                dE[b, i, a] = np.broadcast_to(dentries[b][i][a], bshape)
    return Geometry(grid, name, E, dE, symbolic)


# -- frame derivatives ----------------------------------------------------------


def frame_apply(geom: Geometry, i: int, f) -> ComplexField:
    """Apply the frame vector field ``e_i`` to a scalar field."""
    geom.check_field(f)
    return ComplexField(geom.grid, frame_apply_raw(geom, i, f.values))


def frame_apply_raw(geom: Geometry, i: int, values: np.ndarray, conjugate: bool = False) -> np.ndarray:
    """Raw-array ``e_i(f)`` (or ``conj(e_i)(f)`` with ``conjugate=True``)."""
    grid = geom.grid
    out = None
    for a in geom.frame_axes[i]:
        coeff = np.conj(geom.E[i, a]) if conjugate else geom.E[i, a]
        term = coeff * grid.diff_raw(values, a)
        out = term if out is None else out + term
    if out is None:
        out = np.zeros(grid.shape, dtype=complex)
    return out


def bracket_01(geom: Geometry, i: int, j: int) -> np.ndarray:
    """Coefficients of ``[e_i, conj(e_j)]^{(0,1)}`` on the ``conj(e_k)`` basis."""
    n = geom.half_dim
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"frame index out of range for n={n}")
    return geom.brackets.part_01(i, j)


def _ebar_derivatives(geom: Geometry, values: np.ndarray) -> list:
    """All ``conj(e_j)(f)`` for a real field ``f`` (shared inner pass)."""
    grid = geom.grid
    partials = {}
    out = []
    for j in range(geom.half_dim):
        acc = None
        for a in geom.frame_axes[j]:
            if a not in partials:
                partials[a] = grid.diff_raw(values, a)
            term = np.conj(geom.E[j, a]) * partials[a]
            acc = term if acc is None else acc + term
        out.append(acc if acc is not None else np.zeros(grid.shape, dtype=complex))
    return out


def ddbar_matrix(geom: Geometry, values: np.ndarray) -> np.ndarray:
    """Raw (unsymmetrized) matrix ``e_i(conj(e_j) f) - [e_i, conj(e_j)]^{(0,1)} f``."""
    n = geom.half_dim
    ebar = _ebar_derivatives(geom, values)
    out = np.empty(geom.grid.shape + (n, n), dtype=complex)
    br = geom.brackets.coeff_ebar
    for i in range(n):
        for j in range(n):
            acc = frame_apply_raw(geom, i, ebar[j])
            for k in range(n):
                c = br[i, j, k]
                if np.any(c != 0):
                    acc = acc - c * ebar[k]
            out[..., i, j] = acc
    return out


def ddbar(geom: Geometry, f) -> HermitianField:
    """The almost-complex Hessian ``(d del-bar f)(e_i, conj(e_j))`` as a matrix field.

    Entry ``(i, j)`` is ``e_i(conj(e_j)(f)) - [e_i, conj(e_j)]^{(0,1)}(f)``,
    symmetrized to exact Hermitian with the defect recorded.
    """
    geom.check_field(f)
    raw = ddbar_matrix(geom, f.values)
    return HermitianField.from_raw(geom.grid, raw)


# -- J on forms and the (1,1) projection -------------------------------------


def j_form_action(geom: Geometry, alpha: RealForm) -> RealForm:
    """``(J alpha)(X_1,...,X_p) = (-1)^p alpha(J X_1,...,J X_p)`` for ``p <= 2``."""
    if alpha.degree > 2:
        raise UnsupportedDegree(f"J action exposed for degree <= 2, got {alpha.degree}")
    if alpha.grid != geom.grid:
        raise GridMismatch("form lives on a different grid")
    return _j_action_matrix(alpha, geom.J)


def j_form_action_any(geom: Geometry, alpha: RealForm) -> RealForm:
    """Internal J action without the degree guard (used on 3- and 4-forms)."""
    if alpha.grid != geom.grid:
        raise GridMismatch("form lives on a different grid")
    return _j_action_matrix(alpha, geom.J)


def pq11(geom: Geometry, alpha: RealForm) -> RealForm:
    """J-invariant ``(1,1)`` part ``(alpha + J alpha)/2`` of a 2-form; idempotent."""
    if alpha.degree != 2:
        raise UnsupportedDegree("the (1,1) projection acts on 2-forms")
    return 0.5 * (alpha + j_form_action(geom, alpha))


def d_J_d(geom: Geometry, f) -> RealForm:
    """The 2-form ``d(J df)``; not of type (1,1) unless J is integrable."""
    geom.check_field(f)
    df = RealForm(geom.grid, 1,
                  [geom.grid.diff_raw(f.values, a) for a in range(geom.grid.dim)])
    return exterior_d(_j_action_matrix(df, geom.J))


def nijenhuis_defect(geom: Geometry, f) -> float:
    """Sup-norm of the non-(1,1) component of ``d(J df)``.

    Vanishes at stencil order when J is integrable; bounded below under
    refinement on genuinely non-integrable geometries.
    """
    alpha = d_J_d(geom, f)
    return (alpha - pq11(geom, alpha)).sup_norm()


# -- frame <-> coordinate conversions ------------------------------------------


def hermitian_to_form(geom: Geometry, H: HermitianField) -> RealForm:
    """Real (1,1) coordinate 2-form ``i H_{ij} theta^i ^ conj(theta^j)``."""
    n = geom.half_dim
    dim = geom.grid.dim
    th = geom.theta
    comps = []
    for (a, b) in forms.basis_indices(dim, 2):
        acc = np.zeros(geom.grid.shape)
        for i in range(n):
            for j in range(n):
                pair = th[i, a] * np.conj(th[j, b]) - th[i, b] * np.conj(th[j, a])
                acc = acc + (1j * H.values[..., i, j] * pair).real
        comps.append(acc)
    return RealForm(geom.grid, 2, comps)


def form_to_hermitian(geom: Geometry, alpha: RealForm) -> np.ndarray:
    """Frame matrix ``-i alpha(e_i, conj(e_j))`` of a real 2-form.

    For a (1,1) form this inverts :func:`hermitian_to_form`; the non-(1,1)
    part of ``alpha`` evaluates to zero on ``(e_i, conj(e_j))`` pairs and is
    silently annihilated.
    """
    if alpha.degree != 2:
        raise UnsupportedDegree("frame conversion acts on 2-forms")
    n = geom.half_dim
    E = geom.E
    out = np.zeros(geom.grid.shape + (n, n), dtype=complex)
    for (a, b), comp in zip(forms.basis_indices(geom.grid.dim, 2), alpha.comps):
        for i in range(n):
            for j in range(n):
                pair = E[i, a] * np.conj(E[j, b]) - E[i, b] * np.conj(E[j, a])
                if np.any(pair != 0):
                    out[..., i, j] += -1j * comp * pair
    return out
