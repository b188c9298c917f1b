"""Conforming C^0 multipatch spaces and the Additive Schwarz mass preconditioner.

Local basis functions of different patches are identified when they live on a
shared boundary and the images of their Greville points coincide (within a
relative tolerance of the domain size).  A face whose corners coincide with a
face of another patch must have every one of its functions matched, otherwise
the discretizations are not conforming and :class:`ConformityError` is raised.
"""

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from ._validation import check_is_fitted, check_vector
from .assembly import assemble_physical_mass
from .exceptions import ConformityError
from .geometry import MultipatchGeometry, Patch, eval_geometry_grid, weight_from_geometry
from .kron import FlopCounter
from .precond import MassPreconditioner, _InversePreconditioner
from .splines import TensorBasis, make_uniform_knots, tensor_gauss_rule

__all__ = [
    "Interface",
    "MultipatchSpace",
    "AdditiveSchwarzPreconditioner",
    "build_multipatch_space",
    "assemble_global_mass",
    "assemble_local_masses",
    "apply_additive_schwarz",
    "restriction_matrix",
]


@dataclass(frozen=True)
class Interface:
    """Full-face interface ``(patch_a, face_a) ~ (patch_b, face_b)``.

    Faces are numbered ``2*k + side``.  ``orientation`` indexes the corner
    permutation taking face ``a`` onto face ``b`` (0 = aligned; in 2-D 1 =
    reversed; in 3-D bits are flip_u, flip_v, swap).
    """

    patch_a: int
    face_a: int
    patch_b: int
    face_b: int
    orientation: int

    def as_tuple(self):
        return (self.patch_a, self.face_a, self.patch_b, self.face_b, self.orientation)


class MultipatchSpace:
    """Global C^0 space assembled from per-patch tensor-product spline spaces.

    Attributes
    ----------
    geometry : MultipatchGeometry
    bases : list of TensorBasis
        Analysis basis on each patch.
    global_maps : list of ndarray
        ``global_maps[r][i]`` is the global index of local function ``i`` of patch ``r``.
    num_dofs : int
    multiplicity : ndarray
        Number of patches sharing each global function.
    n_adj : int
        Maximum multiplicity.
    interfaces : list of Interface
    """

    def __init__(self, geometry, bases, quads, global_maps, num_dofs, interfaces):
        self.geometry = geometry
        self.bases = bases
        self.quads = quads
        self.global_maps = global_maps
        self.num_dofs = int(num_dofs)
        self.interfaces = interfaces
        mult = np.zeros(self.num_dofs, dtype=int)
        for g in global_maps:
            mult[g] += 1
        self.multiplicity = mult
        self.n_adj = int(mult.max())

    @property
    def num_patches(self):
        return len(self.bases)

    @property
    def patches(self):
        return self.geometry.patches

    def __repr__(self):
        return (
            f"MultipatchSpace(patches={self.num_patches}, dofs={self.num_dofs}, "
            f"n_adj={self.n_adj}, interfaces={len(self.interfaces)})"
        )

    def local_indices(self, r):
        """Global indices of the functions whose support meets patch ``r``."""
        return self.global_maps[r]


def _face_function_mask(shape, face):
    k, side = divmod(face, 2)
    idx = np.indices(shape)
    return (idx[k] == (0 if side == 0 else shape[k] - 1)).ravel(order="F")


def _face_corners(patch, face):
    d = patch.dim
    k, side = divmod(face, 2)
    corners = patch.corners()  # co-lexicographic over the 2^d vertices
    bits = np.array(list(itertools.product([0, 1], repeat=d)))[:, ::-1]  # co-lex order
    keep = bits[:, k] == side
    return corners[keep]


def _orientation_table(dface):
    """Corner permutations of a (d-1)-cube face, as index arrays into co-lex corner lists."""
    if dface == 0:
        return [np.array([0])]
    if dface == 1:
        return [np.array([0, 1]), np.array([1, 0])]
    table = []
    for swap, flip_v, flip_u in itertools.product([0, 1], repeat=3):
        perm = []
        for v in (0, 1):
            for u in (0, 1):
                a, b = (v, u) if swap else (u, v)
                a ^= flip_u
                b ^= flip_v
                perm.append(a + 2 * b)
        table.append(np.array(perm))
    return table  # code = flip_u + 2*flip_v + 4*swap


def _greville_images(patch, basis):
    x, _, _ = eval_geometry_grid(patch, [kv.greville for kv in basis.kvs])
    return x.reshape(-1, patch.dim, order="F")


def build_multipatch_space(geom, p, n_sub, q=None, tol=1e-10):
    """Number the global C^0 basis of a multipatch geometry.

    Parameters
    ----------
    geom : MultipatchGeometry or Patch
    p : int
        Spline degree (maximal smoothness inside patches).
    n_sub : int or sequence of int
        Uniform subdivisions per direction, globally or per patch.
    q : int, optional
        Gauss points per span (default ``p + 1``).
    tol : float
        Relative matching tolerance for interface identification.
    """
    if isinstance(geom, Patch):
        geom = MultipatchGeometry([geom], label=geom.label)
    npatch = len(geom.patches)
    n_subs = [n_sub] * npatch if np.isscalar(n_sub) else list(n_sub)
    if len(n_subs) != npatch:
        raise ValueError("need one n_sub per patch")
    dim = geom.dim
    bases = [TensorBasis([make_uniform_knots(p, ns)] * dim) for ns in n_subs]
    quads = [tensor_gauss_rule(b, q) for b in bases]

    allpts = np.vstack([pt.control_points for pt in geom.patches])
    scale = float(np.max(np.ptp(allpts, axis=0))) or 1.0
    atol = tol * scale

    images = [_greville_images(pt, b) for pt, b in zip(geom.patches, bases)]
    boundary = []
    for b in bases:
        mask = np.zeros(b.num_dofs, dtype=bool)
        for f in range(2 * dim):
            mask |= _face_function_mask(b.shape, f)
        boundary.append(mask)

    global_maps = []
    seen_pts, seen_ids = [], []
    next_id = 0
    for r, b in enumerate(bases):
        g = np.empty(b.num_dofs, dtype=np.int64)
        bidx = np.nonzero(boundary[r])[0]
        matched = np.full(bidx.size, -1, dtype=np.int64)
        if seen_pts:
            tree = cKDTree(np.vstack(seen_pts))
            ids = np.concatenate(seen_ids)
            dist, nn = tree.query(images[r][bidx], k=1)
            hit = dist <= atol
            matched[hit] = ids[nn[hit]]
        used = matched[matched >= 0]
        if used.size != np.unique(used).size:
            raise ConformityError(
                f"patch {r}: several boundary functions collapse onto one function of a neighbouring patch"
            )
        g[:] = -1
        g[bidx] = matched
        # unmatched functions get fresh ids in local order
        fresh = np.nonzero(g < 0)[0]
        g[fresh] = next_id + np.arange(fresh.size)
        next_id += fresh.size
        matched = g[bidx]
        global_maps.append(g)
        seen_pts.append(images[r][bidx])
        seen_ids.append(matched)

    _check_shared_sets(bases, global_maps)
    interfaces = _detect_interfaces(geom, bases, global_maps, atol)
    if geom.interfaces:
        declared = {tuple(int(v) for v in i) for i in geom.interfaces}
        found = {i.as_tuple() for i in interfaces}
        if declared != found:
            raise ConformityError(
                f"declared interfaces {sorted(declared)} differ from detected {sorted(found)}"
            )
    return MultipatchSpace(geom, bases, quads, global_maps, next_id, interfaces)


def _subface_sets(basis, g):
    """Global ids on every boundary vertex, edge and face of a patch."""
    shape = basis.shape
    idx = [a.ravel(order="F") for a in np.indices(shape)]
    out = []
    for fix in itertools.product([None, 0, 1], repeat=len(shape)):
        if all(f is None for f in fix):
            continue
        mask = np.ones(basis.num_dofs, dtype=bool)
        for k, f in enumerate(fix):
            if f is not None:
                mask &= idx[k] == (0 if f == 0 else shape[k] - 1)
        out.append(frozenset(g[mask].tolist()))
    return set(out)


def _check_shared_sets(bases, global_maps):
    # shared functions of two patches must fill a whole vertex, edge or face of both
    subfaces = [_subface_sets(b, g) for b, g in zip(bases, global_maps)]
    for r, s in itertools.combinations(range(len(bases)), 2):
        shared = frozenset(np.intersect1d(global_maps[r], global_maps[s]).tolist())
        if shared and (shared not in subfaces[r] or shared not in subfaces[s]):
            raise ConformityError(
                f"patches {r} and {s} share only part of a boundary face (non-conforming interface)"
            )


def _detect_interfaces(geom, bases, global_maps, atol):
    dim = geom.dim
    table = _orientation_table(dim - 1)
    found = []
    for r, s in itertools.combinations(range(len(bases)), 2):
        pr, ps = geom.patches[r], geom.patches[s]
        for fa in range(2 * dim):
            ca = _face_corners(pr, fa)
            for fb in range(2 * dim):
                cb = _face_corners(ps, fb)
                dists = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=-1)
                if not np.all(dists.min(axis=1) <= atol):
                    continue
                perm = dists.argmin(axis=1)
                if np.unique(perm).size != perm.size:
                    continue  # degenerate (collapsed) face
                ga = global_maps[r][_face_function_mask(bases[r].shape, fa)]
                gb = global_maps[s][_face_function_mask(bases[s].shape, fb)]
                ka = [kv for k, kv in enumerate(bases[r].kvs) if k != fa // 2]
                kb = [kv for k, kv in enumerate(bases[s].kvs) if k != fb // 2]
                if ga.size != gb.size or set(ga.tolist()) != set(gb.tolist()) or sorted(
                    map(hash, ka)
                ) != sorted(map(hash, kb)):
                    raise ConformityError(
                        f"non-conforming interface between patch {r} (face {fa}) and patch {s} (face {fb})"
                    )
                code = next(
                    (i for i, t in enumerate(table) if np.array_equal(t, perm)), -1
                )
                found.append(Interface(r, fa, s, fb, code))
    return found


def restriction_matrix(ms, r):
    """Sparse ``R^(r)`` of shape (N_r, N): picks the patch-local coefficients."""
    g = ms.global_maps[r]
    n_r = g.size
    return sp.csr_matrix((np.ones(n_r), (np.arange(n_r), g)), shape=(n_r, ms.num_dofs))


def assemble_local_masses(ms):
    """Physical mass of every patch in its local numbering."""
    out = []
    for patch, basis, quad in zip(ms.patches, ms.bases, ms.quads):
        w = weight_from_geometry(patch, quad)
        out.append(assemble_physical_mass(basis, w))
    return out


def assemble_global_mass(ms, local_masses=None):
    """Global mass ``sum_r R_r^T M_r R_r`` of the multipatch space (CSR)."""
    local_masses = assemble_local_masses(ms) if local_masses is None else local_masses
    rows, cols, vals = [], [], []
    for g, Mr in zip(ms.global_maps, local_masses):
        C = Mr.tocoo()
        rows.append(g[C.row])
        cols.append(g[C.col])
        vals.append(C.data)
    n = ms.num_dofs
    M = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    M.sum_duplicates()
    M.sort_indices()
    return M


class AdditiveSchwarzPreconditioner(_InversePreconditioner):
    """``P^{-1} = sum_r R_r^T P_r^{-1} R_r`` with one :class:`MassPreconditioner` per patch.

    Each local preconditioner uses the diagonal of the patch's own physical mass.
    """

    def __init__(self, unit_diagonal_tol=1e-13):
        self.unit_diagonal_tol = unit_diagonal_tol

    def fit(self, space, local_masses=None):
        self.space_ = space
        self.local_ = []
        for r, (patch, basis, quad) in enumerate(zip(space.patches, space.bases, space.quads)):
            w = weight_from_geometry(patch, quad)
            mass = None if local_masses is None else local_masses[r]
            self.local_.append(
                MassPreconditioner(unit_diagonal_tol=self.unit_diagonal_tol).fit(basis, w, mass=mass)
            )
        self.n_dofs_ = space.num_dofs
        self.flops = FlopCounter()
        self.setup_time_ = sum(P.setup_time_ for P in self.local_)
        return self

    @property
    def flops_per_apply(self):
        return sum(P.flops_per_apply for P in self.local_)

    def apply_inverse(self, z):
        check_is_fitted(self, "n_dofs_")
        z = check_vector(z, self.n_dofs_)
        y = np.zeros_like(z)
        # fixed patch order keeps the scatter-add deterministic
        for g, P in zip(self.space_.global_maps, self.local_):
            y[g] += P.apply_inverse(z[g])
        self.flops.add(self.flops_per_apply)
        return y


def apply_additive_schwarz(P, z):
    return P.apply_inverse(z)
