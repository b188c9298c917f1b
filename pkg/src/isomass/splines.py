"""Univariate and tensor-product B-spline bases and Gauss quadrature.

Everything here uses 0-based indices.  A tensor-product basis is linearized
co-lexicographically (first direction fastest), which is NumPy's ``order="F"``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .exceptions import DomainError, KnotVectorError

__all__ = [
    "KnotVector",
    "TensorBasis",
    "QuadRule",
    "make_uniform_knots",
    "eval_basis",
    "eval_basis_deriv",
    "basis_funs",
    "basis_matrix",
    "gauss_rule",
    "tensor_gauss_rule",
]


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Open knot vector on [0, 1] together with its degree."""

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        kv = np.asarray(self.knots, dtype=float)
        if kv.ndim != 1:
            raise KnotVectorError("knots must be a 1-D sequence")
        p = int(self.degree)
        if p < 0:
            raise KnotVectorError(f"degree must be non-negative, got {p}")
        if kv.size < 2 * p + 2:
            raise KnotVectorError(f"need at least {2 * p + 2} knots for degree {p}, got {kv.size}")
        if np.any(np.diff(kv) < 0):
            raise KnotVectorError("knots must be non-decreasing")
        if not (np.all(kv[: p + 1] == 0.0) and np.all(kv[-(p + 1):] == 1.0)):
            raise KnotVectorError("knot vector must be open on [0, 1] (p+1 repeated end knots)")
        interior = kv[p + 1: kv.size - p - 1]
        if interior.size:
            if interior[0] <= 0.0 or interior[-1] >= 1.0:
                raise KnotVectorError("end knots may not exceed multiplicity p+1")
            _, counts = np.unique(interior, return_counts=True)
            if counts.max() > max(p, 1):
                raise KnotVectorError(f"interior knot multiplicity exceeds p={p}")
        kv.setflags(write=False)
        object.__setattr__(self, "knots", kv)
        object.__setattr__(self, "degree", p)

    @property
    def p(self):
        return self.degree

    @property
    def num_basis(self):
        return self.knots.size - self.degree - 1

    def __len__(self):
        return self.num_basis

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.degree == other.degree
            and self.knots.shape == other.knots.shape
            and np.array_equal(self.knots, other.knots)
        )

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))

    def __repr__(self):
        return f"KnotVector(degree={self.degree}, num_basis={self.num_basis}, spans={self.num_spans})"

    @cached_property
    def breakpoints(self):
        return np.unique(self.knots)

    @cached_property
    def span_indices(self):
        """Knot indices ``s`` with ``knots[s] < knots[s+1]`` (nonempty spans)."""
        s = np.nonzero(np.diff(self.knots) > 0)[0]
        s.setflags(write=False)
        return s

    @property
    def num_spans(self):
        return self.span_indices.size

    @cached_property
    def span_lengths(self):
        return np.diff(self.breakpoints)

    @property
    def h(self):
        """Maximal mesh size."""
        return float(self.span_lengths.max())

    @property
    def alpha(self):
        """Quasi-uniformity ratio (min nonempty span) / h."""
        return float(self.span_lengths.min() / self.span_lengths.max())

    @cached_property
    def greville(self):
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        idx = np.arange(self.num_basis)[:, None] + np.arange(1, p + 1)[None, :]
        return self.knots[idx].mean(axis=1)

    def find_span(self, x):
        """Knot index of the nonempty span containing each ``x`` (right end belongs to the last span)."""
        x = np.asarray(x, dtype=float)
        s = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(s, self.span_indices[0], self.span_indices[-1])


def make_uniform_knots(p, n_sub):
    """Open uniform knot vector of degree ``p`` with ``n_sub`` spans and maximal smoothness."""
    if int(n_sub) != n_sub or n_sub < 1:
        raise ValueError(f"n_sub must be a positive integer, got {n_sub!r}")
    if int(p) != p or p < 0:
        raise ValueError(f"degree must be a non-negative integer, got {p!r}")
    p, n_sub = int(p), int(n_sub)
    inner = np.linspace(0.0, 1.0, n_sub + 1)
    return KnotVector(np.concatenate([np.zeros(p), inner, np.ones(p)]), p)


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("evaluation point outside [0, 1]")
    return x


def _basis_on_span(knots, p, s, x):
    """Cox-de Boor triangle for arrays: values of the p+1 functions active on span ``s``.

    ``s`` and ``x`` are 1-D arrays of equal length; returns shape (len(x), p+1).
    """
    n = x.shape[0]
    N = np.zeros((n, p + 1))
    N[:, 0] = 1.0
    left = np.empty((n, p + 1))
    right = np.empty((n, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - knots[s + 1 - j]
        right[:, j] = knots[s + j] - x
        saved = np.zeros(n)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = np.divide(N[:, r], denom, out=np.zeros(n), where=denom != 0.0)
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    return N


def basis_funs(kv, x, deriv=False):
    """Vectorized evaluation of the active functions at points ``x``.

    Returns ``(first, values)`` or ``(first, values, derivatives)`` where ``first``
    has shape (n,) and ``values`` shape (n, p+1); column ``k`` belongs to basis
    function ``first + k``.
    """
    x = _check_domain(np.atleast_1d(x))
    p = kv.degree
    s = kv.find_span(x)
    vals = _basis_on_span(kv.knots, p, s, x)
    first = s - p
    if not deriv:
        return first, vals
    ders = np.zeros_like(vals)
    if p > 0:
        low = _basis_on_span(kv.knots, p - 1, s, x)  # functions s-p+1 .. s
        t = kv.knots
        for k in range(p + 1):
            i = s - p + k
            if k >= 1:
                d1 = t[i + p] - t[i]
                ders[:, k] += np.divide(p * low[:, k - 1], d1, out=np.zeros(x.size), where=d1 != 0.0)
            if k <= p - 1:
                d2 = t[i + p + 1] - t[i + 1]
                ders[:, k] -= np.divide(p * low[:, k], d2, out=np.zeros(x.size), where=d2 != 0.0)
    return first, vals, ders


def eval_basis(kv, x):
    """Values of the p+1 functions that may be nonzero at the scalar ``x``.

    Returns ``(first_index, values)``.
    """
    first, vals = basis_funs(kv, np.array([x], dtype=float))
    return int(first[0]), vals[0]


def eval_basis_deriv(kv, x):
    """Like :func:`eval_basis`, additionally returning first derivatives."""
    first, vals, ders = basis_funs(kv, np.array([x], dtype=float), deriv=True)
    return int(first[0]), vals[0], ders[0]


def basis_matrix(kv, x, deriv=0):
    """Sparse collocation matrix ``B[q, i] = b_i(x_q)`` (or its derivative), CSR, shape (len(x), m)."""
    x = np.ravel(np.asarray(x, dtype=float))
    p = kv.degree
    if deriv == 0:
        first, vals = basis_funs(kv, x)
    elif deriv == 1:
        first, _, vals = basis_funs(kv, x, deriv=True)
    else:
        raise ValueError("only deriv in {0, 1} is supported")
    rows = np.repeat(np.arange(x.size), p + 1)
    cols = (first[:, None] + np.arange(p + 1)[None, :]).ravel()
    return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(x.size, kv.num_basis))


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Gauss-Legendre rule on each nonempty span of a knot vector.

    ``nodes`` and ``weights`` have shape (n_spans, q); ``points``/``all_weights``
    are the flattened (span-major) versions.
    """

    nodes: np.ndarray
    weights: np.ndarray
    spans: np.ndarray = field(repr=False)

    @property
    def q(self):
        return self.nodes.shape[1]

    @property
    def num_spans(self):
        return self.nodes.shape[0]

    @property
    def points(self):
        return self.nodes.ravel()

    @property
    def all_weights(self):
        return self.weights.ravel()

    def __len__(self):
        return self.nodes.size

    def integrate(self, f):
        """Integrate a vectorized callable over [0, 1]."""
        return float(np.dot(self.all_weights, f(self.points)))


def gauss_rule(kv, q=None):
    """q-point Gauss-Legendre rule per nonempty span (default ``q = p + 1``)."""
    q = kv.degree + 1 if q is None else int(q)
    if q < 1:
        raise ValueError("q must be at least 1")
    xg, wg = np.polynomial.legendre.leggauss(q)
    a = kv.breakpoints[:-1]
    b = kv.breakpoints[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * xg[None, :]
    weights = half[:, None] * wg[None, :]
    return QuadRule(nodes, weights, np.arange(a.size))


def tensor_gauss_rule(tb, q=None):
    """Tuple of per-direction :class:`QuadRule` for a tensor basis."""
    return tuple(gauss_rule(kv, q) for kv in tb.kvs)


class TensorBasis:
    """Tensor product of univariate B-spline bases (d = 1, 2 or 3)."""

    def __init__(self, kvs):
        kvs = tuple(kvs)
        if not 1 <= len(kvs) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(kvs)}")
        if not all(isinstance(kv, KnotVector) for kv in kvs):
            raise TypeError("TensorBasis expects KnotVector instances")
        self.kvs = kvs

    @classmethod
    def uniform(cls, p, n_sub, dim):
        return cls([make_uniform_knots(p, n_sub)] * dim)

    @property
    def dim(self):
        return len(self.kvs)

    @property
    def shape(self):
        return tuple(kv.num_basis for kv in self.kvs)

    @property
    def num_dofs(self):
        return int(np.prod(self.shape))

    @property
    def degree(self):
        return tuple(kv.degree for kv in self.kvs)

    @property
    def h(self):
        return max(kv.h for kv in self.kvs)

    def __repr__(self):
        return f"TensorBasis(shape={self.shape}, degree={self.degree})"

    def __eq__(self, other):
        return isinstance(other, TensorBasis) and self.kvs == other.kvs

    def __hash__(self):
        return hash(self.kvs)

    def linear_index(self, multi):
        """Co-lexicographic linear index of a multi-index (or array of them, last axis = direction)."""
        multi = np.asarray(multi)
        return np.ravel_multi_index(tuple(np.moveaxis(multi, -1, 0)), self.shape, order="F")

    def multi_index(self, lin):
        """Inverse of :meth:`linear_index`; returns array with last axis = direction."""
        return np.stack(np.unravel_index(lin, self.shape, order="F"), axis=-1)

    def greville(self):
        """Greville points, shape (N, d), co-lexicographic order."""
        grids = np.meshgrid(*[kv.greville for kv in self.kvs], indexing="ij")
        return np.stack([g.ravel(order="F") for g in grids], axis=-1)
