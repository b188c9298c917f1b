import numpy as np
import pytest
from scipy.spatial import cKDTree

from isomass.assembly import assemble_physical_mass
from isomass.catalog import catalog
from isomass.exceptions import ConformityError
from isomass.geometry import MultipatchGeometry, eval_geometry_grid, identity_patch, weight_from_geometry
from isomass.multipatch import (
    AdditiveSchwarzPreconditioner,
    assemble_global_mass,
    assemble_local_masses,
    build_multipatch_space,
    restriction_matrix,
)
from isomass.precond import MassPreconditioner
from isomass.solver import condition_number_dense
from isomass.splines import KnotVector, TensorBasis, make_uniform_knots, tensor_gauss_rule


def box(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return identity_patch(lo.size).affine_copy(np.diag(hi - lo), lo)


def strip():
    return MultipatchGeometry([box([0, 0], [1, 1]), box([1, 0], [2, 1])], label="strip")


def merged_strip_mass(p, n_sub):
    """Single patch on [0,2]x[0,1] with a C^0 knot at the joint: the same space as the strip."""
    half = np.linspace(0, 0.5, n_sub + 1)
    knots = np.concatenate([[0.0] * (p + 1), half[1:-1], [0.5] * p, 0.5 + half[1:-1], [1.0] * (p + 1)])
    tb = TensorBasis([KnotVector(knots, p), make_uniform_knots(p, n_sub)])
    patch = box([0, 0], [2, 1])
    quad = tensor_gauss_rule(tb)
    M = assemble_physical_mass(tb, weight_from_geometry(patch, quad))
    pts, _, _ = eval_geometry_grid(patch, [kv.greville for kv in tb.kvs])
    return M, pts.reshape(-1, 2, order="F")


def global_greville_images(ms):
    out = np.empty((ms.num_dofs, ms.geometry.dim))
    for patch, basis, g in zip(ms.patches, ms.bases, ms.global_maps):
        pts, _, _ = eval_geometry_grid(patch, [kv.greville for kv in basis.kvs])
        out[g] = pts.reshape(-1, patch.dim, order="F")
    return out


class TestNumbering:
    def test_single_patch_is_trivial(self):
        ms = build_multipatch_space(catalog("kite_like"), 3, 6)
        np.testing.assert_array_equal(ms.global_maps[0], np.arange(ms.num_dofs))
        assert ms.num_dofs == 9**2
        assert (ms.multiplicity == 1).all() and ms.n_adj == 1
        assert ms.interfaces == []

    def test_two_squares_dimension(self):
        ms = build_multipatch_space(strip(), 1, 2)
        assert ms.num_dofs == 15
        assert len(ms.interfaces) == 1
        assert ms.interfaces[0].as_tuple() == (0, 1, 1, 0, 0)
        assert ms.n_adj == 2

    def test_two_cubes_dimension(self):
        geom = MultipatchGeometry([box([0, 0, 0], [1, 1, 1]), box([0, 0, 1], [1, 1, 2])])
        ms = build_multipatch_space(geom, 1, 2)
        assert ms.num_dofs == 2 * 27 - 9
        assert ms.interfaces[0].as_tuple()[:4] == (0, 5, 1, 4)

    def test_grid_centre_function_is_shared_by_four(self):
        ms = build_multipatch_space(catalog("multipatch_square_2x2"), 2, 4)
        assert ms.multiplicity.max() == 4 and (ms.multiplicity == 4).sum() == 1
        assert ms.n_adj == 4
        # C^0 grid of 2x2 patches with 6 functions per direction each: 11 per direction
        assert ms.num_dofs == 11**2

    @pytest.mark.parametrize("name, n_adj, n_if", [
        ("multipatch_strip_2", 2, 1),
        ("multipatch_square_2x2", 4, 4),
        ("multipatch_star_5", 5, 5),
        ("multipatch_disc_5", 3, 8),
    ])
    def test_catalog_topology(self, name, n_adj, n_if):
        ms = build_multipatch_space(catalog(name), 2, 4)
        assert ms.n_adj == n_adj
        assert len(ms.interfaces) == n_if

    def test_reversed_neighbour(self):
        # second patch parametrized right-to-left and top-to-bottom
        right = box([1, 0], [2, 1]).affine_copy(-np.eye(2), [3.0, 1.0])
        ms = build_multipatch_space(MultipatchGeometry([box([0, 0], [1, 1]), right]), 2, 3)
        assert ms.num_dofs == 2 * 25 - 5
        (iface,) = ms.interfaces
        assert iface.as_tuple()[:4] == (0, 1, 1, 1)
        assert iface.orientation == 1
        M = assemble_global_mass(ms)
        assert M.sum() == pytest.approx(2.0, rel=1e-13)

    def test_restriction_round_trip(self):
        ms = build_multipatch_space(catalog("multipatch_star_5"), 2, 4)
        v = np.random.default_rng(0).standard_normal(ms.num_dofs)
        for r in range(ms.num_patches):
            R = restriction_matrix(ms, r)
            u = np.random.default_rng(r).standard_normal(R.shape[0])
            np.testing.assert_array_equal(R @ (R.T @ u), u)
            np.testing.assert_array_equal(R @ v, v[ms.global_maps[r]])
        counts = sum(restriction_matrix(ms, r).T @ np.ones(ms.bases[r].num_dofs) for r in range(ms.num_patches))
        np.testing.assert_array_equal(counts, ms.multiplicity)


class TestConformity:
    def test_mismatched_subdivisions(self):
        with pytest.raises(ConformityError, match="patch"):
            build_multipatch_space(strip(), 2, [4, 5])

    def test_t_junction(self):
        geom = MultipatchGeometry([box([0, 0], [1, 1]), box([1, 0], [2, 2])])
        with pytest.raises(ConformityError, match="0 and 1"):
            build_multipatch_space(geom, 1, 2)

    def test_declared_interfaces_must_match(self):
        geom = strip()
        geom.interfaces = [(0, 1, 1, 0, 0)]
        build_multipatch_space(geom, 2, 3)
        geom.interfaces = [(0, 3, 1, 2, 0)]
        with pytest.raises(ConformityError, match="declared"):
            build_multipatch_space(geom, 2, 3)

    def test_disjoint_patches_share_nothing(self):
        geom = MultipatchGeometry([box([0, 0], [1, 1]), box([3, 0], [4, 1])])
        ms = build_multipatch_space(geom, 2, 3)
        assert ms.num_dofs == 2 * 25 and ms.interfaces == []


class TestGlobalMass:
    def test_single_patch_equals_physical_mass(self):
        patch = catalog("quarter_annulus")
        ms = build_multipatch_space(patch, 3, 5)
        tb = TensorBasis.uniform(3, 5, 2)
        ref = assemble_physical_mass(tb, weight_from_geometry(patch, tensor_gauss_rule(tb)))
        assert abs(assemble_global_mass(ms) - ref).max() == 0.0

    @pytest.mark.parametrize("name", ["multipatch_strip_2", "multipatch_square_2x2", "multipatch_star_5"])
    def test_entries_sum_to_area(self, name):
        ms = build_multipatch_space(catalog(name), 2, 6)
        M = assemble_global_mass(ms)
        area = sum(weight_from_geometry(pt, q).integral() for pt, q in zip(ms.patches, ms.quads))
        assert M.sum() == pytest.approx(area, rel=1e-12)
        assert abs(M - M.T).max() == 0.0

    @pytest.mark.parametrize("p, n_sub", [(1, 3), (2, 4), (3, 5)])
    def test_strip_equals_merged_patch(self, p, n_sub):
        ms = build_multipatch_space(strip(), p, n_sub)
        M = assemble_global_mass(ms)
        Mref, pts = merged_strip_mass(p, n_sub)
        assert Mref.shape == M.shape
        dist, perm = cKDTree(pts).query(global_greville_images(ms))
        assert dist.max() < 1e-12 and np.unique(perm).size == perm.size
        diff = M - Mref[perm][:, perm]
        assert abs(diff).max() <= 1e-12 * abs(Mref).max()

    def test_local_masses_reused(self):
        ms = build_multipatch_space(catalog("multipatch_square_2x2"), 2, 4)
        loc = assemble_local_masses(ms)
        assert abs(assemble_global_mass(ms, loc) - assemble_global_mass(ms)).max() == 0.0


def dense_asm(ms):
    out = np.zeros((ms.num_dofs, ms.num_dofs))
    for r, Mr in enumerate(assemble_local_masses(ms)):
        tb = ms.bases[r]
        Pr = MassPreconditioner().fit(tb, weight_from_geometry(ms.patches[r], ms.quads[r]), mass=Mr).to_dense()
        R = restriction_matrix(ms, r).toarray()
        out += R.T @ np.linalg.inv(Pr) @ R
    return out


class TestAdditiveSchwarz:
    def test_single_patch_reduces_to_local(self):
        patch = catalog("kite_like")
        ms = build_multipatch_space(patch, 2, 6)
        A = AdditiveSchwarzPreconditioner().fit(ms)
        tb = TensorBasis.uniform(2, 6, 2)
        P = MassPreconditioner().fit(tb, weight_from_geometry(patch, tensor_gauss_rule(tb)))
        z = np.random.default_rng(1).standard_normal(ms.num_dofs)
        np.testing.assert_allclose(A.apply_inverse(z), P.apply_inverse(z), rtol=1e-14)

    @pytest.mark.parametrize("name", ["multipatch_square_2x2", "multipatch_disc_5"])
    def test_matches_dense_sum(self, name):
        ms = build_multipatch_space(catalog(name), 2, 4)
        A = AdditiveSchwarzPreconditioner().fit(ms)
        ref = dense_asm(ms)
        Z = np.random.default_rng(2).standard_normal((3, ms.num_dofs))
        for z in Z:
            np.testing.assert_allclose(A.apply_inverse(z), ref @ z, atol=1e-10 * np.abs(ref @ z).max())
        u, v = Z[:2]
        assert abs(A.apply_inverse(u) @ v - u @ A.apply_inverse(v)) <= 1e-12 * abs(u @ A.apply_inverse(v))

    def test_positive_definite(self):
        ms = build_multipatch_space(catalog("multipatch_star_5"), 2, 3)
        A = AdditiveSchwarzPreconditioner().fit(ms)
        Q = np.column_stack([A.apply_inverse(e) for e in np.eye(ms.num_dofs)])
        assert np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() > 0

    def test_flops_and_determinism(self):
        ms = build_multipatch_space(catalog("multipatch_square_2x2"), 3, 6)
        A = AdditiveSchwarzPreconditioner().fit(ms)
        z = np.random.default_rng(3).standard_normal(ms.num_dofs)
        a, b = A.apply_inverse(z), A.apply_inverse(z)
        np.testing.assert_array_equal(a, b)
        assert A.flops.count == 2 * A.flops_per_apply
        assert A.flops_per_apply == sum(P.flops_per_apply for P in A.local_)

    def test_strip_and_grid_condition_numbers_comparable(self):
        k = {}
        for name in ("multipatch_strip_2", "multipatch_square_2x2"):
            ms = build_multipatch_space(catalog(name), 2, 8)
            k[name] = condition_number_dense(assemble_global_mass(ms), P_inv=AdditiveSchwarzPreconditioner().fit(ms))
        assert k["multipatch_square_2x2"] / k["multipatch_strip_2"] <= 8
