import numpy as np
import pytest

from acmax.errors import BadDensity, GridMismatch, GridTooCoarse
from acmax.grid import ComplexField, ScalarField, diff, integrate, make_grid

TWO_PI = 2.0 * np.pi


def test_make_grid_metadata():
    g = make_grid(2, 16)
    assert g.dim == 4
    assert g.num_points == 16**4
    assert g.h == pytest.approx(TWO_PI / 16)
    g1 = make_grid(1, 32)
    assert g1.num_points == 32**2


@pytest.mark.parametrize("n,N", [(2, 7), (2, 6), (1, 9), (0, 16)])
def test_make_grid_rejects_coarse_or_odd(n, N):
    with pytest.raises(GridTooCoarse):
        make_grid(n, N)


def test_diff_constant_is_zero():
    g = make_grid(1, 16)
    d = diff(g.full(3.7), 0)
    assert d.sup_norm() == 0.0


def test_diff_sin_against_cosine():
    # 4th-order centered stencil on sin has error h^4/30 * |cos|;
    # frozen regression bound with headroom.
    g = make_grid(1, 32)
    f = g.field(lambda x0, x1: np.sin(x0))
    d = diff(f, 0, order=4)
    exact = np.cos(g.coord(0)) * np.ones(g.shape)
    err = np.max(np.abs(d.values - exact))
    assert err <= 0.04 * g.h**4
    assert err >= 0.02 * g.h**4  # sanity: not accidentally spectral


def test_diff_independent_axis():
    g = make_grid(1, 16)
    f = g.field(lambda x0, x1: np.sin(x0))
    assert diff(f, 1).sup_norm() == 0.0


def test_diff_axis_out_of_range():
    g = make_grid(1, 16)
    with pytest.raises(ValueError):
        diff(g.zeros(), 5)


def test_diff_linearity(rng):
    g = make_grid(1, 16)
    f = ScalarField(g, rng.standard_normal(g.shape))
    h = ScalarField(g, rng.standard_normal(g.shape))
    lhs = diff(2.5 * f + (-1.25) * h, 0)
    rhs = 2.5 * diff(f, 0) + (-1.25) * diff(h, 0)
    np.testing.assert_allclose(lhs.values, rhs.values, rtol=0, atol=1e-14)


def test_discrete_integration_by_parts(rng):
    # centered stencils are exactly antisymmetric on the periodic grid
    g = make_grid(1, 16)
    f = ScalarField(g, rng.standard_normal(g.shape))
    h = ScalarField(g, rng.standard_normal(g.shape))
    for order in (2, 4):
        s = integrate(diff(f, 0, order) * h) + integrate(f * diff(h, 0, order))
        assert abs(s) <= 1e-10 * f.l2_norm() * h.l2_norm()


def test_diff_reflection_antisymmetry(rng):
    g = make_grid(1, 16)
    vals = rng.standard_normal(g.shape)
    refl = vals[::-1, :].copy()
    d = g.diff_raw(vals, 0)
    d_refl = g.diff_raw(refl, 0)
    np.testing.assert_allclose(d_refl, -d[::-1, :], atol=1e-13)


def test_diff_refinement_order():
    # N -> 2N must shrink the error by at least 2^order * 0.8
    for order, floor in ((2, 3.2), (4, 12.8)):
        errs = []
        for N in (16, 32):
            g = make_grid(1, N, stencil_order=order)
            f = g.field(lambda x0, x1: np.sin(2 * x0) + np.cos(x1))
            d = diff(f, 0)
            exact = 2 * np.cos(2 * g.coord(0)) * np.ones(g.shape)
            errs.append(np.max(np.abs(d.values - exact)))
        assert errs[0] / errs[1] >= floor


def test_integrate_volume():
    g = make_grid(1, 16)
    assert integrate(g.full(1.0), g.full(1.0)) == pytest.approx(TWO_PI**2)


def test_integrate_periodic_mode_vanishes():
    g = make_grid(1, 16)
    f = g.field(lambda x0, x1: np.sin(x0))
    assert abs(integrate(f, g.full(1.0))) < 1e-12


def test_integrate_sin_squared():
    # exact for the midpoint rule: sum of sin^2 over N points is N/2
    g = make_grid(1, 16)
    f = g.field(lambda x0, x1: np.sin(x0) ** 2)
    assert integrate(f, g.full(1.0)) == pytest.approx(0.5 * TWO_PI**2, rel=1e-14)


def test_integrate_rejects_bad_density():
    g = make_grid(1, 16)
    with pytest.raises(BadDensity):
        integrate(g.full(1.0), g.full(0.0))
    with pytest.raises(BadDensity):
        integrate(g.full(1.0), g.field(lambda x0, x1: np.cos(x0)))


def test_field_validation():
    g = make_grid(1, 16)
    with pytest.raises(GridMismatch):
        ScalarField(g, np.zeros((4, 4)))
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.shape, np.nan))


def test_field_immutable():
    g = make_grid(1, 16)
    f = g.zeros()
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_complex_field_parts(rng):
    g = make_grid(1, 16)
    vals = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    f = ComplexField(g, vals)
    np.testing.assert_allclose(f.conj().values, np.conj(vals))
    np.testing.assert_allclose((f.real + 1j * f.imag.values).values, vals)


def test_field_cross_grid_arithmetic_rejected():
    a = make_grid(1, 16).zeros()
    b = make_grid(1, 32).zeros()
    with pytest.raises(GridMismatch):
        _ = a + b
