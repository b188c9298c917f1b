"""Single-patch mass preconditioners.

:class:`MassPreconditioner` is the diagonally scaled Kronecker preconditioner

    P = D^{1/2} Dhat^{-1/2} Mhat Dhat^{-1/2} D^{1/2},

where ``Mhat = Mhat_d ⊗ ... ⊗ Mhat_1`` is the parametric (unweighted) mass,
``Dhat = diag(Mhat)`` and ``D = diag(M)`` is the diagonal of the physical mass.
Its inverse factors as ``D^{-1/2} (⊗_k Dhat_k^{-1/2} Mhat_k Dhat_k^{-1/2})^{-1} D^{-1/2}``,
so one application costs two diagonal scalings and ``d`` banded solves per fiber.

All preconditioners follow the scikit-learn estimator protocol: hyper-parameters
go to ``__init__``, ``fit`` builds the factorizations and returns ``self``, and
``transform`` applies the inverse to each row of a batch.
"""

import time

import numpy as np
from scipy.sparse.linalg import LinearOperator
from sklearn.base import BaseEstimator

from ._validation import check_batch, check_is_fitted, check_vector
from .assembly import (
    assemble_parametric_mass,
    assemble_physical_diagonal,
    assemble_physical_mass,
)
from .exceptions import AssemblyError, DataError
from .geometry import weight_from_geometry, weight_inverse_jacobian
from .kron import FlopCounter, banded_cholesky, dense_kron, kron_matvec, kron_solve
from .splines import tensor_gauss_rule

__all__ = [
    "MassPreconditioner",
    "ChanEvansPreconditioner",
    "JacobiPreconditioner",
    "IdentityPreconditioner",
    "setup_mass_preconditioner",
    "apply_inverse",
    "apply_inverse_chan_evans",
    "make_preconditioner",
]


class _InversePreconditioner(BaseEstimator):
    """Shared surface: ``apply_inverse`` on vectors, ``transform`` on row batches."""

    _fitted_attr = "n_dofs_"

    def apply_inverse(self, z):
        raise NotImplementedError

    def transform(self, X):
        """Apply the inverse to every row of ``X`` (shape (n_samples, n_dofs) or (n_dofs,))."""
        check_is_fitted(self, self._fitted_attr)
        X, was_1d = check_batch(X, self.n_dofs_)
        Y = np.stack([self.apply_inverse(x) for x in X])
        return Y[0] if was_1d else Y

    def aslinearoperator(self):
        """The inverse as a :class:`scipy.sparse.linalg.LinearOperator`."""
        check_is_fitted(self, self._fitted_attr)
        n = self.n_dofs_
        return LinearOperator((n, n), matvec=self.apply_inverse, rmatvec=self.apply_inverse, dtype=float)

    def __call__(self, z):
        return self.apply_inverse(z)


class MassPreconditioner(_InversePreconditioner):
    """Diagonally scaled Kronecker preconditioner for a weighted single-patch mass matrix.

    Parameters
    ----------
    unit_diagonal_tol : float
        Tolerance for the check that every scaled univariate factor has unit diagonal.

    Attributes
    ----------
    scale_ : ndarray
        ``D^{-1/2}``.
    parametric_factors_ : list of Banded
        Univariate parametric masses ``Mhat_k``.
    scaled_factors_ : list of Banded
        ``Dhat_k^{-1/2} Mhat_k Dhat_k^{-1/2}``.
    cholesky_ : list of BandedCholesky
        Factorizations of ``scaled_factors_``.
    flops : FlopCounter
        Analytic operation count accumulated over all applications.
    setup_time_ : float
        Seconds spent in :meth:`fit`.
    """

    def __init__(self, unit_diagonal_tol=1e-13):
        self.unit_diagonal_tol = unit_diagonal_tol

    def fit(self, basis, weight=None, *, mass=None, diagonal=None, quad=None):
        """Assemble and factor the scaled univariate masses and record ``D``.

        ``D`` is taken from ``diagonal`` if given, otherwise from ``mass``
        (the assembled physical mass), otherwise it is integrated directly from
        ``weight`` (``int B_i^2 omega``).
        """
        t0 = time.perf_counter()
        if quad is None:
            quad = weight.quad if weight is not None else tensor_gauss_rule(basis)
        self.basis_ = basis
        self.parametric_factors_ = assemble_parametric_mass(basis, quad)
        self.scaled_factors_ = []
        self.cholesky_ = []
        for Mk in self.parametric_factors_:
            s = 1.0 / np.sqrt(Mk.diagonal())
            Sk = Mk.scaled(s)
            err = np.max(np.abs(Sk.diagonal() - 1.0))
            if err > self.unit_diagonal_tol:
                raise AssemblyError(f"scaled univariate factor deviates from unit diagonal by {err:.2e}")
            self.scaled_factors_.append(Sk)
            self.cholesky_.append(banded_cholesky(Sk))

        if diagonal is not None:
            D = np.asarray(diagonal, dtype=float)
        elif mass is not None:
            D = np.asarray(mass.diagonal(), dtype=float)
        elif weight is not None:
            D = assemble_physical_diagonal(basis, weight, quad)
        else:
            raise DataError("need one of weight, mass or diagonal to set the physical scaling")
        if D.shape != (basis.num_dofs,):
            raise DataError(f"physical diagonal has shape {D.shape}, expected ({basis.num_dofs},)")
        if np.any(~(D > 0.0)):
            raise AssemblyError(
                "non-positive physical diagonal entry: the weight vanishes on a whole basis support"
            )
        self.diagonal_ = D
        self.scale_ = 1.0 / np.sqrt(D)
        self.n_dofs_ = basis.num_dofs
        self.flops = FlopCounter()
        self.setup_time_ = time.perf_counter() - t0
        return self

    @property
    def flops_per_apply(self):
        """Analytic cost of one application: ``2N`` for the scalings plus the banded solves."""
        check_is_fitted(self, "n_dofs_")
        n = self.n_dofs_
        total = 2 * n
        for F in self.cholesky_:
            total += F.solve_flops(n // F.order)
        return total

    def apply_inverse(self, z):
        """``P^{-1} z``: scale by ``D^{-1/2}``, Kronecker solve, scale again."""
        check_is_fitted(self, "n_dofs_")
        z = check_vector(z, self.n_dofs_)
        s = self.scale_
        zt = s * z
        yt = kron_solve(self.cholesky_, zt, flops=self.flops)
        self.flops.add(2 * self.n_dofs_)
        return s * yt

    def matvec(self, v):
        """Forward product ``P v`` (used by Lanczos and dense oracles)."""
        check_is_fitted(self, "n_dofs_")
        v = check_vector(v, self.n_dofs_)
        s = self.scale_
        return kron_matvec(self.scaled_factors_, v / s) / s

    def to_dense(self):
        """Materialize ``P`` (guarded against large orders)."""
        check_is_fitted(self, "n_dofs_")
        K = dense_kron(self.scaled_factors_)
        r = 1.0 / self.scale_
        return r[:, None] * K * r[None, :]


class ChanEvansPreconditioner(_InversePreconditioner):
    """``P^{-1} = Mhat^{-1} M_{|J_F|^{-1}} Mhat^{-1}``: two parametric Kronecker solves and one sparse product."""

    def __init__(self):
        pass

    def fit(self, basis, patch=None, *, inverse_weight=None, quad=None):
        t0 = time.perf_counter()
        if inverse_weight is None:
            if patch is None:
                raise DataError("need a patch or an inverse-Jacobian weight")
            quad = tensor_gauss_rule(basis) if quad is None else quad
            inverse_weight = weight_inverse_jacobian(patch, quad)
        quad = inverse_weight.quad
        self.parametric_factors_ = assemble_parametric_mass(basis, quad)
        self.cholesky_ = [banded_cholesky(Mk) for Mk in self.parametric_factors_]
        self.inverse_weighted_mass_ = assemble_physical_mass(basis, inverse_weight)
        self.n_dofs_ = basis.num_dofs
        self.flops = FlopCounter()
        self.setup_time_ = time.perf_counter() - t0
        return self

    def apply_inverse(self, z):
        check_is_fitted(self, "n_dofs_")
        z = check_vector(z, self.n_dofs_)
        y = kron_solve(self.cholesky_, z, flops=self.flops)
        y = self.inverse_weighted_mass_ @ y
        self.flops.add(2 * self.inverse_weighted_mass_.nnz)
        return kron_solve(self.cholesky_, y, flops=self.flops)


class JacobiPreconditioner(_InversePreconditioner):
    """``P = diag(M)``."""

    def __init__(self):
        pass

    def fit(self, M):
        d = np.asarray(M.diagonal(), dtype=float)
        if np.any(~(d > 0.0)):
            raise AssemblyError("Jacobi preconditioner needs a positive diagonal")
        self.inv_diagonal_ = 1.0 / d
        self.n_dofs_ = d.size
        self.flops = FlopCounter()
        return self

    def apply_inverse(self, z):
        check_is_fitted(self, "n_dofs_")
        z = check_vector(z, self.n_dofs_)
        self.flops.add(self.n_dofs_)
        return self.inv_diagonal_ * z


class IdentityPreconditioner(_InversePreconditioner):
    """No preconditioning."""

    def __init__(self):
        pass

    def fit(self, M):
        self.n_dofs_ = M.shape[0] if hasattr(M, "shape") else int(M)
        self.flops = FlopCounter()
        return self

    def apply_inverse(self, z):
        check_is_fitted(self, "n_dofs_")
        return check_vector(z, self.n_dofs_).copy()


def setup_mass_preconditioner(tb, patch, quad=None, mass=None):
    """Fit a :class:`MassPreconditioner` for the analysis basis ``tb`` on ``patch``.

    With ``mass`` the physical diagonal is read from the assembled matrix,
    otherwise it is integrated from ``|det J_F|`` directly.
    """
    quad = tensor_gauss_rule(tb) if quad is None else tuple(quad)
    weight = weight_from_geometry(patch, quad)
    return MassPreconditioner().fit(tb, weight, mass=mass)


def apply_inverse(P, z):
    return P.apply_inverse(z)


def apply_inverse_chan_evans(P, z):
    if not isinstance(P, ChanEvansPreconditioner):
        raise TypeError("expected a fitted ChanEvansPreconditioner")
    return P.apply_inverse(z)


def make_preconditioner(name, basis, patch, mass, weight=None):
    """Build and fit a preconditioner by CLI name for a single patch problem."""
    if name == "mass":
        return MassPreconditioner().fit(basis, weight, mass=mass)
    if name == "chan-evans":
        quad = weight.quad if weight is not None else None
        return ChanEvansPreconditioner().fit(basis, patch, quad=quad)
    if name == "jacobi":
        return JacobiPreconditioner().fit(mass)
    if name == "none":
        return IdentityPreconditioner().fit(mass)
    raise ValueError(f"unknown single-patch preconditioner {name!r}")
