"""Kronecker-structured linear algebra.

Tensors use the vec convention with the first index running fastest, so a
vector ``v`` of length ``n_1 * ... * n_d`` is viewed as a tensor with
``v.reshape(shape, order="F")``.  With factors listed as ``(M_1, ..., M_d)``
the operator ``M_d ⊗ ... ⊗ M_1`` acts on ``v`` through mode products
``X ×_1 M_1 ×_2 ... ×_d M_d``.  Directions are 0-based in code.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .exceptions import DataError, FactorizationError

__all__ = [
    "FlopCounter",
    "Banded",
    "BandedCholesky",
    "KronOperator",
    "mode_product",
    "kron_matvec",
    "kron_solve",
    "banded_cholesky",
    "banded_solve",
    "dense_kron",
    "DENSE_GUARD",
]

#: Largest order for which Kronecker products are ever materialized densely.
DENSE_GUARD = 4096


class FlopCounter:
    """Accumulates analytic floating-point operation counts."""

    def __init__(self):
        self.count = 0

    def add(self, n):
        self.count += int(n)

    def reset(self):
        self.count = 0

    def __repr__(self):
        return f"FlopCounter({self.count})"


@dataclass(frozen=True, eq=False)
class Banded:
    """Symmetric banded matrix in LAPACK lower band storage.

    ``bands[k, j] = A[j + k, j]`` for ``k = 0..bandwidth``; entries that fall
    outside the matrix are zero.
    """

    bands: np.ndarray

    @property
    def order(self):
        return self.bands.shape[1]

    @property
    def bandwidth(self):
        return self.bands.shape[0] - 1

    @property
    def shape(self):
        return (self.order, self.order)

    def diagonal(self):
        return self.bands[0].copy()

    @classmethod
    def from_dense(cls, A, bandwidth=None):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        if bandwidth is None:
            nz = np.nonzero(A)
            bandwidth = int(np.max(np.abs(nz[0] - nz[1]))) if nz[0].size else 0
        bands = np.zeros((bandwidth + 1, n))
        for k in range(bandwidth + 1):
            bands[k, : n - k] = np.diagonal(A, -k)
        return cls(bands)

    @classmethod
    def from_sparse(cls, A, bandwidth):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        bands = np.zeros((bandwidth + 1, n))
        for k in range(bandwidth + 1):
            bands[k, : n - k] = A.diagonal(-k)
        return cls(bands)

    def to_dense(self):
        n, b = self.order, self.bandwidth
        A = np.zeros((n, n))
        for k in range(b + 1):
            d = self.bands[k, : n - k]
            A += np.diag(d, -k)
            if k:
                A += np.diag(d, k)
        return A

    def to_sparse(self):
        n, b = self.order, self.bandwidth
        diags = [self.bands[k, : n - k] for k in range(b + 1)]
        offs = list(range(0, -b - 1, -1))
        L = sp.diags(diags, offs, shape=(n, n), format="csr")
        return (L + sp.triu(L.T, k=1)).tocsr()

    def scaled(self, s):
        """Symmetric diagonal scaling ``diag(s) A diag(s)``."""
        s = np.asarray(s, dtype=float)
        n = self.order
        bands = self.bands.copy()
        for k in range(self.bandwidth + 1):
            bands[k, : n - k] *= s[k:] * s[: n - k]
        return Banded(bands)

    def matmat(self, X):
        """``A @ X`` for X of shape (n, k), using the band (2b+1 multiply-adds per entry)."""
        X = np.asarray(X, dtype=float)
        n = self.order
        Y = self.bands[0][:, None] * X
        for k in range(1, self.bandwidth + 1):
            d = self.bands[k, : n - k][:, None]
            Y[k:] += d * X[: n - k]
            Y[: n - k] += d * X[k:]
        return Y

    def __matmul__(self, X):
        X = np.asarray(X)
        return self.matmat(X[:, None])[:, 0] if X.ndim == 1 else self.matmat(X)

    def matvec_flops(self, ncols=1):
        """Flop count of :meth:`matmat` for ``ncols`` right-hand sides (about 2(2b+1) per entry)."""
        n, b = self.order, self.bandwidth
        off = sum(n - k for k in range(1, b + 1))
        return ncols * (n + 4 * off)


@dataclass(frozen=True, eq=False)
class BandedCholesky:
    """Lower band Cholesky factor ``L`` with ``A = L L^T``, LAPACK lower band storage."""

    factor: np.ndarray

    @property
    def order(self):
        return self.factor.shape[1]

    @property
    def bandwidth(self):
        return self.factor.shape[0] - 1

    def lower_dense(self):
        return Banded(self.factor).to_dense() * np.tri(self.order)

    def solve_flops(self, ncols=1):
        """Forward plus backward substitution operation count for ``ncols`` right-hand sides.

        Row ``i`` of each sweep costs ``min(i, b)`` multiply-adds and one division.
        """
        n, b = self.order, self.bandwidth
        i = np.arange(n)
        sweep = int(np.sum(2 * np.minimum(i, b) + 1))
        return 2 * sweep * ncols


def banded_cholesky(B):
    """Factor a symmetric positive definite :class:`Banded` matrix."""
    try:
        cb = sla.cholesky_banded(B.bands, lower=True, check_finite=True)
    except sla.LinAlgError as exc:
        raise FactorizationError(f"banded matrix of order {B.order} is not positive definite") from exc
    return BandedCholesky(cb)


def banded_solve(F, rhs):
    """Solve ``L L^T y = rhs``; ``rhs`` may be a vector or an (n, k) block."""
    return sla.cho_solve_banded((F.factor, True), rhs, check_finite=False)


def _as_tensor(v, shape):
    v = np.asarray(v)
    if v.shape == tuple(shape):
        return v
    if v.ndim != 1 or v.size != int(np.prod(shape)):
        raise DataError(f"vector of length {v.size} does not match Kronecker shape {tuple(shape)}")
    return v.reshape(shape, order="F")


def mode_product(X, M, m):
    """m-mode product ``X ×_m M``: contract axis ``m`` of ``X`` with the columns of ``M``.

    ``M`` (shape k × n_m) may be a dense array, a scipy sparse matrix or a
    :class:`Banded` matrix.  The result replaces axis ``m`` by an axis of length k.
    """
    X = np.asarray(X)
    if not 0 <= m < X.ndim:
        raise ValueError(f"mode {m} out of range for a {X.ndim}-way tensor")
    n_m = X.shape[m]
    if M.shape[1] != n_m:
        raise DataError(f"factor has {M.shape[1]} columns, tensor axis {m} has length {n_m}")
    Xm = np.moveaxis(X, m, 0).reshape(n_m, -1)
    if isinstance(M, Banded):
        Ym = M.matmat(Xm)
    else:
        Ym = M @ Xm
    Ym = np.asarray(Ym)
    rest = X.shape[:m] + X.shape[m + 1:]
    return np.moveaxis(Ym.reshape((M.shape[0],) + rest), 0, m)


class KronOperator:
    """Lazy ``M_d ⊗ ... ⊗ M_1`` built from square factors ``(M_1, ..., M_d)``."""

    def __init__(self, factors):
        self.factors = tuple(factors)
        if not self.factors:
            raise ValueError("need at least one factor")
        for F in self.factors:
            if F.shape[0] != F.shape[1]:
                raise DataError("Kronecker factors must be square")

    @property
    def orders(self):
        return tuple(F.shape[0] for F in self.factors)

    @property
    def shape(self):
        n = int(np.prod(self.orders))
        return (n, n)

    @property
    def dim(self):
        return len(self.factors)

    def matvec(self, v, flops=None):
        X = _as_tensor(v, self.orders)
        for k, F in enumerate(self.factors):
            X = mode_product(X, F, k)
            if flops is not None:
                ncols = X.size // F.shape[0]
                if isinstance(F, Banded):
                    flops.add(F.matvec_flops(ncols))
                elif sp.issparse(F):
                    flops.add(2 * F.nnz * ncols)
                else:
                    flops.add(2 * F.shape[0] * F.shape[1] * ncols)
        return X.reshape(-1, order="F")

    def __matmul__(self, v):
        return self.matvec(v)

    def diagonal(self):
        d = np.ones(1)
        for F in self.factors:
            fd = F.diagonal() if hasattr(F, "diagonal") else np.diag(F)
            d = np.kron(np.asarray(fd).ravel(), d)
        return d

    def to_dense(self):
        return dense_kron(self.factors)


def kron_matvec(K, v, flops=None):
    """``(M_d ⊗ ... ⊗ M_1) v`` via successive mode products."""
    if not isinstance(K, KronOperator):
        K = KronOperator(K)
    return K.matvec(v, flops=flops)


def kron_solve(factors, v, flops=None):
    """Solve ``(M_d ⊗ ... ⊗ M_1) y = v`` given Cholesky factors of every ``M_k``."""
    shape = tuple(F.order for F in factors)
    X = _as_tensor(np.asarray(v, dtype=float), shape)
    for k, F in enumerate(factors):
        Xm = np.moveaxis(X, k, 0).reshape(shape[k], -1)
        Ym = banded_solve(F, Xm)
        X = np.moveaxis(Ym.reshape((shape[k],) + X.shape[:k] + X.shape[k + 1:]), 0, k)
        if flops is not None:
            flops.add(F.solve_flops(Xm.shape[1]))
    return X.reshape(-1, order="F")


def _dense(F):
    if isinstance(F, Banded):
        return F.to_dense()
    if sp.issparse(F):
        return F.toarray()
    return np.asarray(F, dtype=float)


def dense_kron(factors, guard=DENSE_GUARD):
    """Materialize ``M_d ⊗ ... ⊗ M_1``; refuses orders above ``guard``."""
    n = int(np.prod([F.shape[0] for F in factors]))
    if n > guard:
        raise MemoryError(f"dense Kronecker product of order {n} exceeds guard {guard}")
    K = np.ones((1, 1))
    for F in factors:
        K = np.kron(_dense(F), K)
    return K
