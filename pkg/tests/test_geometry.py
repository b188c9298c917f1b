import numpy as np
import pytest

from isomass.catalog import catalog, list_geometries
from isomass.exceptions import ConfigError, DomainError, SingularGeometryError
from isomass.geometry import (
    MultipatchGeometry,
    Patch,
    eval_geometry,
    eval_geometry_grid,
    identity_patch,
    weight_from_geometry,
    weight_inverse_jacobian,
)
from isomass.multipatch import build_multipatch_space
from isomass.splines import TensorBasis, tensor_gauss_rule

SINGLE = [n for n in list_geometries() if isinstance(catalog(n), Patch)]
ALL_PATCHES = [(n, r) for n in list_geometries()
               for r in range(1 if isinstance(catalog(n), Patch) else len(catalog(n).patches))]


def patch_of(name, r):
    g = catalog(name)
    return g if isinstance(g, Patch) else g.patches[r]


def test_identity_map():
    rng = np.random.default_rng(0)
    for d in (1, 2, 3):
        patch = identity_patch(d)
        for xi in rng.random((10, d)):
            x, J, det = eval_geometry(patch, xi)
            np.testing.assert_allclose(x, xi, atol=1e-13)
            np.testing.assert_allclose(J, np.eye(d), atol=1e-13)
            assert det == pytest.approx(1.0, abs=1e-13)


def test_affine_scaling():
    patch = identity_patch(2).affine_copy(2 * np.eye(2))
    _, _, det = eval_geometry(patch, np.array([0.3, 0.8]))
    assert det == pytest.approx(4.0)
    quad = tensor_gauss_rule(TensorBasis.uniform(2, 3, 2))
    np.testing.assert_allclose(weight_from_geometry(patch, quad).values, 4.0)
    np.testing.assert_allclose(weight_inverse_jacobian(patch, quad).values, 0.25)


def test_domain_error():
    with pytest.raises(DomainError):
        eval_geometry(identity_patch(2), np.array([0.5, 1.5]))


def test_disc_one_singularity_closed_form():
    # x = xi * c(eta), so det J = xi * (c x c'); zero on the whole edge xi = 0
    patch = catalog("disc_one_singularity")
    assert patch.singular
    for eta in np.linspace(0, 1, 9):
        _, _, det = eval_geometry(patch, np.array([0.0, eta]))
        assert det == 0.0
    _, J, det = eval_geometry(patch, np.array([0.5, 0.3]))
    c = eval_geometry(patch, np.array([1.0, 0.3]))[0]
    np.testing.assert_allclose(J[:, 0], c, atol=1e-14)


def test_disc_four_corners_vanish():
    patch = catalog("disc_four_singularities")
    for corner in [(0, 0), (1, 0), (0, 1), (1, 1)]:
        _, _, det = eval_geometry(patch, np.array(corner, dtype=float))
        assert abs(det) < 1e-12
    _, _, det = eval_geometry(patch, np.array([0.5, 0.5]))
    assert det > 0


def test_holed_plate_corner_vanishes():
    patch = catalog("holed_plate_singular")
    x, _, det = eval_geometry(patch, np.array([0.5, 1.0]))
    np.testing.assert_allclose(x, [-4.0, 4.0])
    assert det == 0.0


def test_inverse_weight_rejects_singular():
    patch = catalog("disc_one_singularity")
    quad = tensor_gauss_rule(TensorBasis.uniform(2, 4, 2))
    with pytest.raises(SingularGeometryError):
        weight_inverse_jacobian(patch, quad)


@pytest.mark.parametrize("name, r", ALL_PATCHES)
def test_jacobian_matches_finite_differences(name, r):
    patch = patch_of(name, r)
    rng = np.random.default_rng(1)
    step = 1e-6
    for xi in rng.uniform(0.01, 0.99, (100, patch.dim)):
        _, J, _ = eval_geometry(patch, xi)
        fd = np.empty_like(J)
        for k in range(patch.dim):
            e = np.zeros(patch.dim)
            e[k] = step
            fd[:, k] = (eval_geometry(patch, xi + e)[0] - eval_geometry(patch, xi - e)[0]) / (2 * step)
        assert np.linalg.norm(J - fd) <= 1e-5 * max(1.0, np.linalg.norm(J))


@pytest.mark.parametrize("name, r", ALL_PATCHES)
def test_jacobian_sign(name, r):
    patch = patch_of(name, r)
    quad = tensor_gauss_rule(TensorBasis.uniform(3, 16, patch.dim))
    _, _, det = eval_geometry_grid(patch, [q.points for q in quad])
    if patch.singular:
        assert det.min() >= -1e-12
    else:
        assert det.min() > 0


@pytest.mark.parametrize("name", SINGLE)
def test_geometry_fixed_under_refinement(name):
    patch = catalog(name)
    nodes = [np.linspace(0, 1, 7)] * patch.dim
    before, _, _ = eval_geometry_grid(patch, nodes)
    for p, n in [(2, 8), (4, 32)]:
        w = weight_from_geometry(patch, tensor_gauss_rule(TensorBasis.uniform(p, n, patch.dim)))
        assert w.values.size > 0
    after, _, _ = eval_geometry_grid(patch, nodes)
    np.testing.assert_array_equal(before, after)


def test_quarter_annulus_area():
    patch = catalog("quarter_annulus")
    quad = tensor_gauss_rule(TensorBasis.uniform(2, 16, 2))
    area = weight_from_geometry(patch, quad).integral()
    # sector under the Bezier arc (r,0),(r,r),(0,r) is r^2 (1/2 + 1/3)
    assert area == pytest.approx((4 - 1) * (0.5 + 1 / 3), rel=1e-13)


def test_catalog_contents():
    assert isinstance(catalog("unit_square"), Patch) and catalog("unit_square").regular
    assert catalog("unit_cube").dim == 3
    sq = catalog("multipatch_square_2x2")
    assert isinstance(sq, MultipatchGeometry) and len(sq) == 4
    assert build_multipatch_space(sq, 2, 4).n_adj == 4


def test_catalog_unknown_name_lists_entries():
    with pytest.raises(ConfigError, match="unit_square"):
        catalog("no_such_domain")


def test_catalog_dimension_mismatch():
    with pytest.raises(ConfigError):
        catalog("unit_cube", 2)
