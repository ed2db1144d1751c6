import numpy as np
import pytest

from acmax.calculus import Geometry
from acmax.errors import ConfigError
from acmax.forms import exterior_d
from acmax.gauduchon import gauduchon_factor
from acmax.geometries import (GeometrySpec, build, flat_torus, twisted_torus,
                              warped_torus)


def _as_pointwise(tensor):
    """Move the leading (component, component) axes behind the point axes."""
    return np.moveaxis(tensor, (0, 1), (-2, -1))


@pytest.mark.parametrize("mk", [
    lambda: flat_torus(1, 16),
    lambda: flat_torus(2, 8),
    lambda: twisted_torus(2, 8, 0.3),
    lambda: warped_torus(2, 8, 0.3, 0.2),
])
def test_structure_identities(mk):
    geom = mk()
    dim = geom.grid.dim
    J = _as_pointwise(geom.J)
    assert np.max(np.abs(J @ J + np.eye(dim))) < 1e-12
    g = _as_pointwise(geom.g)
    compat = np.swapaxes(J, -1, -2) @ g @ J - g
    assert np.max(np.abs(compat)) < 1e-12


@pytest.mark.parametrize("mk", [
    lambda: flat_torus(2, 8),
    lambda: twisted_torus(2, 8, 0.3),
    lambda: warped_torus(2, 8, 0.3, 0.2),
])
def test_frames_are_unitary(mk):
    geom = mk()
    assert geom.is_unitary_frame()


def test_twist_zero_reproduces_flat():
    fl = flat_torus(2, 8)
    tw = twisted_torus(2, 8, 0.0)
    flat_E = fl.E.reshape(fl.E.shape + (1,) * (tw.E.ndim - fl.E.ndim))
    np.testing.assert_array_equal(tw.E, np.broadcast_to(flat_E, tw.E.shape))
    assert np.max(np.abs(tw.brackets.coeff_ebar)) == 0.0


def test_fundamental_form_closed_flat_and_twisted():
    for geom in (flat_torus(2, 8), twisted_torus(2, 8, 0.3)):
        dw = exterior_d(geom.metric_form())
        assert dw.sup_norm() < 1e-13


def test_twisted_form_is_standard_symplectic():
    tw = twisted_torus(2, 8, 0.3)
    omega = tw.metric_form()
    from acmax.forms import basis_indices
    for idx, comp in zip(basis_indices(4, 2), omega.comps):
        expected = 1.0 if idx in ((0, 1), (2, 3)) else 0.0
        np.testing.assert_allclose(np.broadcast_to(comp, tw.grid.shape),
                                   expected, atol=1e-13)


def test_warped_form_not_closed():
    wa = warped_torus(2, 8, 0.3, 0.2)
    assert exterior_d(wa.metric_form()).sup_norm() > 0.01


def test_warped_volume_density():
    wa = warped_torus(2, 8, 0.3, 0.2)
    v = wa.conformal_exponent
    np.testing.assert_allclose(
        np.broadcast_to(wa.sqrt_det_g, wa.grid.shape),
        np.broadcast_to(np.exp(2.0 * v), wa.grid.shape), rtol=1e-11)


def test_warped_gauduchon_closed_form():
    # the conformal factor of exp(v) w is -v up to an additive constant
    wa = warped_torus(2, 12, 0.3, 0.2)
    factor = gauduchon_factor(wa)
    v = np.broadcast_to(wa.conformal_exponent, wa.grid.shape)
    diff = factor.u.values + v
    diff = diff - np.mean(diff)
    assert np.max(np.abs(diff)) < 2.0 * wa.grid.h**4


def test_twist_range_validated():
    with pytest.raises(ConfigError):
        twisted_torus(2, 8, 1.5)
    with pytest.raises(ConfigError):
        twisted_torus(2, 8, -0.1)
    with pytest.raises(ConfigError):
        twisted_torus(3, 8, 0.3)


def test_spec_roundtrip_and_cache():
    spec = GeometrySpec(kind="twisted", points_per_axis=8, twist=0.3)
    a = build(spec)
    b = build(GeometrySpec(kind="twisted", points_per_axis=8, twist=0.3))
    assert a is b
    assert isinstance(a, Geometry)
    with pytest.raises(ConfigError):
        GeometrySpec(kind="nonsense")
    with pytest.raises(ConfigError):
        GeometrySpec(kind="twisted", half_dim=3)
