"""Preconditioned conjugate gradient, condition-number estimation and the CG reduction factor."""

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ._validation import check_vector
from .exceptions import BreakdownError, ConvergenceError, DataError
from .kron import DENSE_GUARD

__all__ = [
    "PcgReport",
    "pcg",
    "condition_number_dense",
    "extreme_eigenvalues_dense",
    "condition_number_lanczos",
    "reduction_factor",
]

RESIDUAL_REPLACEMENT = 50


@dataclass
class PcgReport:
    iterations: int
    relative_residual: float
    residuals: list = field(repr=False)
    converged: bool = True
    wall_time: float = 0.0
    flops: int = 0
    kappa: float = None
    ritz_min: float = None
    ritz_max: float = None


def _matvec(A):
    if A is None:
        return lambda v: v
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return lambda v: A @ v
    if hasattr(A, "apply_inverse"):
        return A.apply_inverse
    if hasattr(A, "matvec"):
        return A.matvec
    if callable(A):
        return A
    raise TypeError(f"cannot use {type(A).__name__} as a linear operator")


def _matvec_flops(A):
    if sp.issparse(A):
        return 2 * A.nnz
    if isinstance(A, np.ndarray):
        return 2 * A.size
    return 0


def _cg_ritz(alphas, betas):
    """Extreme eigenvalues of the Lanczos tridiagonal recovered from CG coefficients."""
    k = len(alphas)
    if k == 0:
        return None, None
    diag = np.empty(k)
    off = np.empty(max(k - 1, 0))
    for j in range(k):
        diag[j] = 1.0 / alphas[j] + (betas[j - 1] / alphas[j - 1] if j else 0.0)
        if j < k - 1:
            off[j] = math.sqrt(betas[j]) / alphas[j]
    ev = sla.eigvalsh_tridiagonal(diag, off) if k > 1 else diag
    return float(ev.min()), float(ev.max())


def pcg(A, P_inv, b, tol=1e-8, max_iter=None, estimate_kappa=False):
    """Solve ``A x = b`` by preconditioned CG from the zero initial guess.

    Convergence is declared when the true residual satisfies
    ``||b - A x|| <= tol ||b||``.  The recurred residual is replaced by the true
    one every 50 iterations and whenever it signals convergence.

    Parameters
    ----------
    A : sparse matrix, ndarray or object with ``matvec``
    P_inv : fitted preconditioner (``apply_inverse``), callable, or None
    b : ndarray
    tol : float
    max_iter : int, optional
        Defaults to ``10 * len(b)``.
    estimate_kappa : bool
        Also return extreme Ritz values from the CG coefficients.

    Returns
    -------
    x : ndarray
    report : PcgReport

    Raises
    ------
    BreakdownError
        ``<r, P^{-1} r> <= 0`` or ``<p, A p> <= 0``.
    ConvergenceError
        Tolerance not reached within ``max_iter`` (carries ``x`` and ``report``).
    """
    b = check_vector(b, name="b")
    n = b.size
    max_iter = 10 * n if max_iter is None else int(max_iter)
    Amv = _matvec(A)
    Pmv = _matvec(P_inv)
    flops_A = _matvec_flops(A)
    counter = getattr(P_inv, "flops", None)
    flops_start = counter.count if counter is not None else 0

    t0 = time.perf_counter()
    x = np.zeros(n)
    bnorm = float(np.linalg.norm(b))
    history = [1.0]
    if bnorm == 0.0:
        return x, PcgReport(0, 0.0, [0.0], True, 0.0, 0)
    r = b.copy()
    z = Pmv(r)
    rz = float(r @ z)
    if not rz > 0.0:
        raise BreakdownError("preconditioner is not positive definite (<r, P^-1 r> <= 0)")
    d = z.copy()
    alphas, betas = [], []
    iterations = 0
    converged = False
    res = 1.0
    while iterations < max_iter:
        q = Amv(d)
        dq = float(d @ q)
        if not dq > 0.0:
            raise BreakdownError("operator is not positive definite (<p, A p> <= 0)")
        alpha = rz / dq
        x += alpha * d
        r -= alpha * q
        iterations += 1
        alphas.append(alpha)
        if iterations % RESIDUAL_REPLACEMENT == 0:
            r = b - Amv(x)
        res = float(np.linalg.norm(r)) / bnorm
        if res <= tol:
            r = b - Amv(x)
            res = float(np.linalg.norm(r)) / bnorm
            if res <= tol:
                history.append(res)
                converged = True
                break
        history.append(res)
        z = Pmv(r)
        rz_new = float(r @ z)
        if not rz_new > 0.0:
            raise BreakdownError("preconditioner is not positive definite (<r, P^-1 r> <= 0)")
        beta = rz_new / rz
        betas.append(beta)
        d = z + beta * d
        rz = rz_new

    wall = time.perf_counter() - t0
    pflops = (counter.count - flops_start) if counter is not None else 0
    report = PcgReport(
        iterations=iterations,
        relative_residual=res,
        residuals=history,
        converged=converged,
        wall_time=wall,
        flops=iterations * flops_A + pflops,
    )
    if estimate_kappa:
        lo, hi = _cg_ritz(alphas, betas)
        report.ritz_min, report.ritz_max = lo, hi
        report.kappa = hi / lo if lo else None
    if not converged:
        raise ConvergenceError(
            f"PCG did not converge in {max_iter} iterations (relative residual {res:.3e})",
            x=x,
            report=report,
        )
    return x, report


def _dense(A, n=None):
    if sp.issparse(A):
        return A.toarray()
    if isinstance(A, np.ndarray):
        return np.asarray(A, dtype=float)
    if hasattr(A, "to_dense"):
        return A.to_dense()
    mv = _matvec(A)
    return np.column_stack([mv(e) for e in np.eye(n)])


def extreme_eigenvalues_dense(A, P_inv=None, P=None, guard=DENSE_GUARD):
    """``(lambda_min, lambda_max)`` of ``P^{-1} A`` by a dense symmetric eigensolve.

    Pass either ``P`` (the preconditioner itself, solved as the generalized
    problem ``A v = lambda P v``) or ``P_inv`` (an operator applying the
    inverse; it is materialized and Cholesky-factored, ``L^T A L``).
    """
    n = A.shape[0]
    if n > guard:
        raise MemoryError(f"order {n} exceeds dense guard {guard}")
    Ad = _dense(A, n)
    Ad = 0.5 * (Ad + Ad.T)
    if P is not None:
        Pd = _dense(P, n)
        ev = sla.eigh(Ad, 0.5 * (Pd + Pd.T), eigvals_only=True)
    elif P_inv is not None:
        Q = _dense(P_inv, n) if not hasattr(P_inv, "apply_inverse") else np.column_stack(
            [P_inv.apply_inverse(e) for e in np.eye(n)]
        )
        L = np.linalg.cholesky(0.5 * (Q + Q.T))
        ev = np.linalg.eigvalsh(L.T @ Ad @ L)
    else:
        ev = np.linalg.eigvalsh(Ad)
    return float(ev[0]), float(ev[-1])


def condition_number_dense(A, P_inv=None, P=None, guard=DENSE_GUARD):
    """``lambda_max / lambda_min`` of the (preconditioned) operator, by dense eigensolve."""
    lo, hi = extreme_eigenvalues_dense(A, P_inv=P_inv, P=P, guard=guard)
    if not lo > 0.0:
        raise DataError("operator is not positive definite")
    return hi / lo


def condition_number_lanczos(A, P_inv=None, iters=200, tol=None, seed=0):
    """Lanczos estimate of the extreme eigenvalues of ``P^{-1} A``.

    Runs the preconditioned Lanczos recurrence (inner product ``<x, P^{-1} y>``)
    with full reorthogonalization from a seeded random start.  With ``tol`` the
    iteration stops once both extreme Ritz values change by less than ``tol``
    (relative) over 10 steps.

    Returns ``(kappa, lambda_min, lambda_max)``.
    """
    Amv = _matvec(A)
    Pmv = _matvec(P_inv)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(n)
    z = Pmv(r)
    beta = math.sqrt(float(r @ z))
    V, Z = [], []
    alphas, betas = [], []
    v_prev = np.zeros(n)
    beta_prev = 0.0
    history = []
    iters = min(int(iters), n)
    for j in range(iters):
        v = r / beta
        zv = z / beta
        V.append(v)
        Z.append(zv)
        w = Amv(zv)
        alpha = float(zv @ w)
        w = w - alpha * v - beta_prev * v_prev
        Vm = np.array(V)
        Zm = np.array(Z)
        for _ in range(2):
            w -= Vm.T @ (Zm @ w)
        alphas.append(alpha)
        z = Pmv(w)
        beta_new = float(w @ z)
        T_ev = (
            sla.eigvalsh_tridiagonal(np.array(alphas), np.array(betas))
            if len(alphas) > 1
            else np.array(alphas)
        )
        history.append((T_ev[0], T_ev[-1]))
        if beta_new <= (1e-14 * max(abs(alpha), 1.0)) ** 2:
            break
        if tol is not None and j >= 10:
            lo0, hi0 = history[-11]
            if abs(T_ev[0] - lo0) <= tol * abs(T_ev[0]) and abs(T_ev[-1] - hi0) <= tol * abs(T_ev[-1]):
                break
        beta_prev = math.sqrt(beta_new)
        betas.append(beta_prev)
        v_prev = v
        r, beta = w, beta_prev
    lo, hi = history[-1]
    return hi / lo, float(lo), float(hi)


def reduction_factor(kappa):
    """CG error-bound reduction per iteration, ``(sqrt(kappa) - 1) / (sqrt(kappa) + 1)``."""
    kappa = float(kappa)
    if kappa < 1.0:
        if kappa < 1.0 - 1e-10:
            raise ValueError(f"condition number must be >= 1, got {kappa}")
        kappa = 1.0
    s = math.sqrt(kappa)
    return (s - 1.0) / (s + 1.0)
