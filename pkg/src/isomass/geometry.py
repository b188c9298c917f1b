"""Spline geometry maps, their Jacobians, and quadrature-node weight fields."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, DomainError, SingularGeometryError
from .kron import mode_product
from .splines import KnotVector, TensorBasis, basis_matrix

__all__ = [
    "Patch",
    "MultipatchGeometry",
    "WeightField",
    "eval_geometry",
    "eval_geometry_grid",
    "weight_from_geometry",
    "weight_inverse_jacobian",
    "weight_from_function",
    "quadrature_grid",
    "identity_patch",
]


class Patch:
    """Single spline patch ``F(xi) = sum_i C_i B_i(xi)``.

    Parameters
    ----------
    basis : TensorBasis
        Geometry space (kept at its native degree; analysis spaces are separate).
    control_points : array_like, shape (N, d)
        Control points in co-lexicographic order.
    label : str
    singular : bool
        True when det J_F vanishes somewhere (collapsed edges or vertices).
    singular_set : str
        Human-readable description of where the Jacobian vanishes.
    """

    def __init__(self, basis, control_points, label="", singular=False, singular_set="", description=""):
        C = np.asarray(control_points, dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        if C.shape != (basis.num_dofs, basis.dim):
            raise DataError(
                f"control points must have shape ({basis.num_dofs}, {basis.dim}), got {C.shape}"
            )
        self.basis = basis
        self.control_points = C
        self.label = label
        self.singular = bool(singular)
        self.singular_set = singular_set
        self.description = description

    @property
    def dim(self):
        return self.basis.dim

    @property
    def regular(self):
        return not self.singular

    def control_net(self):
        """Control points as a tensor of shape ``basis.shape + (d,)``."""
        return self.control_points.reshape(self.basis.shape + (self.dim,), order="F")

    def affine_copy(self, A=None, b=None, label=None):
        """Patch whose control points are ``A @ C + b`` (spline maps commute with affine maps)."""
        A = np.eye(self.dim) if A is None else np.asarray(A, dtype=float)
        b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float)
        return Patch(self.basis, self.control_points @ A.T + b, label or self.label,
                     self.singular, self.singular_set)

    def corners(self):
        """Images of the 2^d parametric vertices, ordered co-lexicographically."""
        net = self.control_net()
        idx = np.array(np.meshgrid(*[[0, n - 1] for n in self.basis.shape], indexing="ij"))
        idx = idx.reshape(self.dim, -1, order="F")
        return net[tuple(idx)]

    def __repr__(self):
        tag = "singular" if self.singular else "regular"
        return f"Patch({self.label!r}, dim={self.dim}, degree={self.basis.degree}, {tag})"


@dataclass
class MultipatchGeometry:
    """Collection of patches; interfaces are detected when a space is built."""

    patches: list
    label: str = ""
    interfaces: list = field(default_factory=list)
    description: str = ""

    @property
    def dim(self):
        return self.patches[0].dim

    @property
    def singular(self):
        return any(p.singular for p in self.patches)

    def __len__(self):
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def __getitem__(self, r):
        return self.patches[r]


def _check_unit_cube(xi, dim):
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != dim:
        raise DataError(f"parametric point must have {dim} coordinates")
    if np.any(~np.isfinite(xi)) or np.any(xi < 0.0) or np.any(xi > 1.0):
        raise DomainError("parametric point outside the closed unit cube")
    return xi


def eval_geometry_grid(patch, nodes):
    """Evaluate ``F`` on the tensor grid spanned by per-direction 1-D node arrays.

    Returns ``(x, jac, detJ)`` with shapes ``grid + (d,)``, ``grid + (d, d)`` and
    ``grid``, where ``grid = (len(nodes[0]), ..., len(nodes[d-1]))`` and
    ``jac[..., a, k] = dF_a / dxi_k``.
    """
    d = patch.dim
    if len(nodes) != d:
        raise DataError(f"expected {d} node arrays")
    nodes = [np.ravel(np.asarray(t, dtype=float)) for t in nodes]
    for t in nodes:
        if t.size and (t.min() < 0.0 or t.max() > 1.0):
            raise DomainError("parametric nodes outside [0, 1]")
    B = [basis_matrix(kv, t) for kv, t in zip(patch.basis.kvs, nodes)]
    dB = [basis_matrix(kv, t, deriv=1) for kv, t in zip(patch.basis.kvs, nodes)]
    net = patch.control_net()
    grid = tuple(t.size for t in nodes)
    x = np.empty(grid + (d,))
    jac = np.empty(grid + (d, d))
    for a in range(d):
        X = net[..., a]
        vals = X
        for k in range(d):
            vals = mode_product(vals, B[k], k)
        x[..., a] = vals
        for kd in range(d):
            vals = X
            for k in range(d):
                vals = mode_product(vals, dB[k] if k == kd else B[k], k)
            jac[..., a, kd] = vals
    if d == 1:
        det = jac[..., 0, 0]
    elif d == 2:
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    else:
        det = np.linalg.det(jac)
    return x, jac, det


def eval_geometry(patch, xi):
    """Evaluate ``F`` and its Jacobian at a single parametric point.

    Returns ``(x, jacobian, detJ)``.
    """
    xi = _check_unit_cube(np.atleast_1d(xi), patch.dim)
    x, jac, det = eval_geometry_grid(patch, [np.array([t]) for t in xi])
    idx = (0,) * patch.dim
    return x[idx], jac[idx], float(det[idx])


def quadrature_grid(quad):
    """Per-direction flattened quadrature nodes and weights of a tensor rule."""
    return [r.points for r in quad], [r.all_weights for r in quad]


@dataclass(frozen=True, eq=False)
class WeightField:
    """Samples of a weight at tensor quadrature nodes.

    ``values`` has the grid shape ``(len(quad[0]), ..., len(quad[d-1]))``.
    """

    values: np.ndarray
    quad: tuple
    provenance: str = "custom"

    def __post_init__(self):
        grid = tuple(len(r) for r in self.quad)
        if self.values.shape != grid:
            raise DataError(f"weight samples have shape {self.values.shape}, quadrature grid is {grid}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("weight samples must be finite")

    @property
    def dim(self):
        return len(self.quad)

    def integral(self):
        """Quadrature approximation of the integral of the weight over the unit cube."""
        v = self.values
        for k, r in enumerate(self.quad):
            v = mode_product(v, r.all_weights[None, :], k)
        return float(v.reshape(-1)[0])


def weight_from_geometry(patch, quad):
    """``|det J_F|`` sampled at the nodes of ``quad``."""
    quad = tuple(quad)
    nodes, _ = quadrature_grid(quad)
    _, _, det = eval_geometry_grid(patch, nodes)
    if patch.regular and np.any(det <= 0.0):
        raise SingularGeometryError(
            f"patch {patch.label!r} is flagged regular but det J_F <= 0 at a quadrature node"
        )
    return WeightField(np.abs(det), quad, "geometry-Jacobian")


def weight_inverse_jacobian(patch, quad):
    """``|det J_F|^{-1}`` at the nodes of ``quad``; only for regular parametrizations."""
    if patch.singular:
        raise SingularGeometryError(
            f"patch {patch.label!r} is singular ({patch.singular_set}); |J_F|^-1 is unbounded"
        )
    quad = tuple(quad)
    nodes, _ = quadrature_grid(quad)
    _, _, det = eval_geometry_grid(patch, nodes)
    if np.any(det <= 0.0):
        raise SingularGeometryError(f"det J_F <= 0 at a quadrature node of patch {patch.label!r}")
    return WeightField(1.0 / np.abs(det), quad, "inverse-Jacobian")


def weight_from_function(func, quad, provenance="custom"):
    """Sample ``func(*coords)`` (vectorized over parametric coordinates) on the quadrature grid."""
    quad = tuple(quad)
    nodes, _ = quadrature_grid(quad)
    grids = np.meshgrid(*nodes, indexing="ij")
    vals = np.broadcast_to(np.asarray(func(*grids), dtype=float), grids[0].shape).copy()
    return WeightField(vals, quad, provenance)


def identity_patch(dim, label=None):
    """Degree-1 patch realizing the identity map on the unit cube."""
    kv = KnotVector([0.0, 0.0, 1.0, 1.0], 1)
    basis = TensorBasis([kv] * dim)
    return Patch(basis, basis.greville(), label or f"unit_{'square' if dim == 2 else 'cube' if dim == 3 else 'interval'}")
