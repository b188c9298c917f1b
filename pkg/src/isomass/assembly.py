"""Mass matrix assembly: univariate banded factors, parametric Kronecker mass, weighted physical mass.

The physical mass is assembled by contracting the weight samples with
per-direction "pair" matrices ``P_k[q, (i, o)] = w_q b_i(x_q) b_{i+o}(x_q)``
(``|o| <= p``), one direction at a time.  This evaluates exactly the same sums
as an element loop over nonempty spans, only grouped per direction, and yields
every band entry ``M[(i_1..i_d), (i_1+o_1..i_d+o_d)]`` at once.
"""

import numpy as np
import scipy.sparse as sp

from .exceptions import AssemblyError, DataError, FactorizationError
from .geometry import WeightField
from .kron import Banded, KronOperator, banded_cholesky, mode_product
from .splines import basis_funs, basis_matrix, gauss_rule, tensor_gauss_rule

__all__ = [
    "assemble_univariate_mass",
    "assemble_parametric_mass",
    "assemble_physical_mass",
    "assemble_physical_diagonal",
    "assemble_load_vector",
    "diagonal_of",
    "check_spd",
]


def assemble_univariate_mass(kv, quad=None, check=True):
    """``[M]_ij = int_0^1 b_i b_j`` as a :class:`~isomass.kron.Banded` matrix of bandwidth p."""
    quad = gauss_rule(kv) if quad is None else quad
    B = basis_matrix(kv, quad.points)
    M = (B.T @ sp.diags(quad.all_weights) @ B).tocsr()
    # mirror the upper triangle so the band is exactly symmetric
    U = sp.triu(M, k=1)
    M = (U + U.T + sp.diags(M.diagonal())).tocsr()
    band = Banded.from_sparse(M, kv.degree)
    if check:
        try:
            banded_cholesky(band)
        except FactorizationError as exc:
            raise AssemblyError(
                f"univariate mass (p={kv.degree}, q={quad.q}) is not SPD; quadrature too weak?"
            ) from exc
    return band


def assemble_parametric_mass(tb, quad=None):
    """Univariate factors ``(M_1, ..., M_d)`` with ``M_hat = M_d ⊗ ... ⊗ M_1`` (never materialized)."""
    quad = tensor_gauss_rule(tb) if quad is None else tuple(quad)
    return [assemble_univariate_mass(kv, r) for kv, r in zip(tb.kvs, quad)]


def _pair_matrix(kv, rule, squared_only=False):
    """Sparse ``(n_nodes, m*(2p+1))`` matrix of weighted basis products.

    Column ``i*(2p+1) + (o+p)`` holds ``w_q b_i(x_q) b_{i+o}(x_q)``.  With
    ``squared_only`` the result is ``(n_nodes, m)`` with ``w_q b_i(x_q)^2``.
    """
    x = rule.points
    w = rule.all_weights
    p = kv.degree
    first, vals = basis_funs(kv, x)
    nq = x.size
    if squared_only:
        rows = np.repeat(np.arange(nq), p + 1)
        cols = (first[:, None] + np.arange(p + 1)).ravel()
        data = (w[:, None] * vals**2).ravel()
        return sp.csr_matrix((data, (rows, cols)), shape=(nq, kv.num_basis))
    a = np.arange(p + 1)
    ia = first[:, None, None] + a[None, :, None]          # row function
    ib = first[:, None, None] + a[None, None, :]          # column function
    prod = w[:, None, None] * vals[:, :, None] * vals[:, None, :]
    cols = ia * (2 * p + 1) + (ib - ia + p)
    rows = np.broadcast_to(np.arange(nq)[:, None, None], cols.shape)
    return sp.csr_matrix(
        (prod.ravel(), (rows.ravel(), cols.ravel())), shape=(nq, kv.num_basis * (2 * p + 1))
    )


def _check_weight(tb, weight, quad):
    if not isinstance(weight, WeightField):
        raise DataError("weight must be a WeightField")
    quad = weight.quad if quad is None else tuple(quad)
    if len(quad) != tb.dim:
        raise DataError(f"quadrature has {len(quad)} directions, basis has {tb.dim}")
    grid = tuple(len(r) for r in quad)
    if weight.values.shape != grid:
        raise DataError("weight was sampled on a different quadrature grid")
    for kv, r in zip(tb.kvs, quad):
        bp = kv.breakpoints
        if r.num_spans != bp.size - 1 or np.any(r.nodes <= bp[:-1, None]) or np.any(r.nodes >= bp[1:, None]):
            raise DataError("quadrature nodes do not follow the knot spans of the basis")
    return quad


def assemble_physical_mass(tb, weight, quad=None, allow_negative=False):
    """Weighted mass ``[M]_ij = int B_i B_j omega`` as a symmetric CSR matrix.

    ``weight`` must be sampled on ``quad`` (defaults to ``weight.quad``).
    Negative samples raise :class:`DataError` unless ``allow_negative``.
    """
    quad = _check_weight(tb, weight, quad)
    if not allow_negative and np.any(weight.values < 0.0):
        raise DataError("negative weight sample")
    d = tb.dim
    E = weight.values
    for k, (kv, r) in enumerate(zip(tb.kvs, quad)):
        E = mode_product(E, _pair_matrix(kv, r).T.tocsr(), k)

    # decode (i_k, o_k) pairs per direction and keep valid, upper-triangular entries
    shape = tb.shape
    band = [2 * kv.degree + 1 for kv in tb.kvs]
    idx_i, idx_j = [], []
    for k in range(d):
        m, b, p = shape[k], band[k], tb.kvs[k].degree
        i = np.repeat(np.arange(m), b)
        j = i + np.tile(np.arange(b) - p, m)
        idx_i.append(i)
        idx_j.append(j)
    grids_i = np.meshgrid(*idx_i, indexing="ij")
    grids_j = np.meshgrid(*idx_j, indexing="ij")
    valid = np.ones(E.shape, dtype=bool)
    for k in range(d):
        valid &= (grids_j[k] >= 0) & (grids_j[k] < shape[k])
    rows = np.ravel_multi_index(tuple(g[valid] for g in grids_i), shape, order="F")
    cols = np.ravel_multi_index(tuple(g[valid] for g in grids_j), shape, order="F")
    vals = E[valid]
    upper = cols >= rows
    rows, cols, vals = rows[upper], cols[upper], vals[upper]
    nz = vals != 0.0
    rows, cols, vals = rows[nz], cols[nz], vals[nz]
    n = tb.num_dofs
    U = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    strict = sp.triu(U, k=1)
    M = (U + strict.T).tocsr()
    M.sort_indices()
    return M


def assemble_physical_diagonal(tb, weight, quad=None):
    """Diagonal of the weighted mass, ``int B_i^2 omega``, without assembling the matrix."""
    quad = _check_weight(tb, weight, quad)
    D = weight.values
    for k, (kv, r) in enumerate(zip(tb.kvs, quad)):
        D = mode_product(D, _pair_matrix(kv, r, squared_only=True).T.tocsr(), k)
    return D.reshape(-1, order="F")


def assemble_load_vector(tb, values, quad):
    """``b_i = int B_i g`` for ``g`` sampled on the tensor quadrature grid (e.g. ``f(F) * |J_F|``)."""
    quad = tuple(quad)
    G = np.asarray(values, dtype=float)
    for k, (kv, r) in enumerate(zip(tb.kvs, quad)):
        Bw = (sp.diags(r.all_weights) @ basis_matrix(kv, r.points)).T.tocsr()
        G = mode_product(G, Bw, k)
    return G.reshape(-1, order="F")


def diagonal_of(matrix):
    """Diagonal of a matrix as a positive vector.

    Accepts a :class:`~isomass.kron.Banded`, a list/tuple of Banded factors or a
    :class:`~isomass.kron.KronOperator` (diagonal of ``M_d ⊗ ... ⊗ M_1`` as the
    Kronecker product of factor diagonals, co-lexicographic), a scipy sparse
    matrix, or a dense array.
    """
    if isinstance(matrix, (list, tuple)):
        matrix = KronOperator(matrix)
    if isinstance(matrix, (Banded, KronOperator)):
        d = matrix.diagonal()
    elif sp.issparse(matrix):
        d = matrix.diagonal()
    else:
        d = np.diag(np.asarray(matrix, dtype=float)).copy()
    if np.any(d <= 0.0):
        raise AssemblyError("diagonal has non-positive entries; matrix is not SPD")
    return np.asarray(d, dtype=float)


def check_spd(M):
    """Attempt a Cholesky factorization of a (small, dense-able) symmetric matrix; raises on failure."""
    A = M.toarray() if sp.issparse(M) else np.asarray(M)
    if not np.allclose(A, A.T, rtol=1e-13, atol=0.0):
        raise AssemblyError("matrix is not symmetric")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("matrix is not positive definite") from exc
    return True
