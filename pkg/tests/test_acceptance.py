"""Acceptance checks.  Each test prints one ``PASS``/``FAIL`` line; the lines are
repeated in the pytest terminal summary.  Run standalone with
``python3 tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest
from scipy.spatial import cKDTree
from threadpoolctl import threadpool_limits

from isomass.assembly import assemble_parametric_mass, assemble_physical_mass
from isomass.bench import build_problem, fit_preconditioner
from isomass.catalog import catalog
from isomass.geometry import MultipatchGeometry, eval_geometry_grid, identity_patch, weight_from_geometry
from isomass.kron import Banded, banded_cholesky, dense_kron, kron_matvec, kron_solve
from isomass.multipatch import assemble_global_mass, build_multipatch_space
from isomass.precond import setup_mass_preconditioner
from isomass.solver import condition_number_lanczos, pcg, reduction_factor
from isomass.splines import KnotVector, TensorBasis, make_uniform_knots, tensor_gauss_rule

RESULTS = []


def report(num, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def kappa_of(prob, P):
    kappa, _, _ = condition_number_lanczos(prob.M, P, iters=200, tol=1e-11)
    return kappa


def solve_iterations(prob, P):
    _, rep = pcg(prob.M, P, prob.b, tol=1e-8)
    return rep.iterations


def test_criterion_01_identity_geometry_is_exact():
    t0 = time.perf_counter()
    worst_dev, worst_its = 0.0, 0
    patch = identity_patch(2)
    for p in range(1, 7):
        for n_sub in (4, 8, 16, 32, 64):
            prob = build_problem(patch, p, n_sub)
            P = fit_preconditioner("mass", prob)
            worst_dev = max(worst_dev, abs(kappa_of(prob, P) - 1.0))
            worst_its = max(worst_its, solve_iterations(prob, P))
    elapsed = time.perf_counter() - t0
    ok = worst_dev <= 1e-10 and worst_its == 1 and elapsed < 5.0
    report(1, ok, f"max |kappa-1| = {worst_dev:.1e}, max iterations = {worst_its}, {elapsed:.1f} s")


def kite_kappas(p, sizes):
    patch = catalog("kite_like")
    out = []
    for n_sub in sizes:
        prob = build_problem(patch, p, n_sub)
        out.append(kappa_of(prob, fit_preconditioner("mass", prob)))
    return np.array(out)


@pytest.mark.slow
def test_criterion_02_kappa_tends_to_one():
    t0 = time.perf_counter()
    sizes = (16, 32, 64, 128)
    ok = True
    parts = []
    for p in (2, 3, 4):
        excess = kite_kappas(p, sizes) - 1.0
        ratios = excess[:-1] / excess[1:]
        ok &= bool(np.all(excess > 0) and np.all((ratios >= 1.5) & (ratios <= 3.0)))
        parts.append(f"p={p} ratios " + "/".join(f"{r:.2f}" for r in ratios))
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120.0
    report(2, ok, "; ".join(parts) + f" ({elapsed:.0f} s)")


@pytest.mark.slow
def test_criterion_03_degree_trend():
    degrees = np.arange(2, 7)
    excess = np.array([kite_kappas(int(p), (64,))[0] - 1.0 for p in degrees])
    slope = np.polyfit(np.log(degrees), np.log(excess), 1)[0]
    report(3, 0.7 <= slope <= 1.3, f"fitted exponent of kappa-1 in p = {slope:.3f}")


def test_criterion_04_parametric_eigenvalue_bounds():
    # lambda_min scales like h^d, so the ratio is normalized by (2^d)^2 relative to the raw product
    worst_max = 0.0
    scaled, raw, offenders = [], [], []
    for d in (1, 2):
        for p in (1, 2, 3):
            lmins = {}
            for n_sub in (4, 8, 16, 32):
                ev = np.linalg.eigvalsh(dense_kron(assemble_parametric_mass(TensorBasis.uniform(p, n_sub, d))))
                lmins[n_sub] = ev[0]
                if n_sub <= 16:
                    worst_max = max(worst_max, ev[-1] * n_sub**d)
            for n_sub in (4, 8, 16):
                r = lmins[n_sub] * 2**d / lmins[2 * n_sub]
                raw.append(r)
                scaled.append(r / 4**d)
                if not 0.8 <= r / 4**d <= 1.25:
                    offenders.append(f"d={d},p={p},n={n_sub}:{r / 4**d:.3f}")
    ok = worst_max <= 1.0 and not offenders
    report(
        4,
        ok,
        f"max lambda_max/h^d = {worst_max:.4f}; lambda_min(h)/(2^d lambda_min(h/2)) in "
        f"[{min(scaled):.3f}, {max(scaled):.3f}] (raw 2^d product in [{min(raw):.2f}, {max(raw):.2f}]); "
        f"outside [0.8, 1.25]: {', '.join(offenders) or 'none'}",
    )


def test_criterion_05_reduction_factor_values():
    q2 = reduction_factor(1.157) ** 2
    q1 = reduction_factor(1.049)
    ok = f"{q2:.2e}" == "1.33e-03" and f"{q1:.2e}" == "1.20e-02"
    report(5, ok, f"q(1.157)^2 = {q2:.3e}, q(1.049) = {q1:.3e}")


def random_spd_banded(rng, n, bw):
    A = rng.standard_normal((n, n))
    A = np.triu(np.tril(A, bw), -bw)
    A = A + A.T
    # strict diagonal dominance makes the factor SPD
    np.fill_diagonal(A, np.abs(A).sum(axis=1) + rng.uniform(0.5, 2.0, n))
    return Banded.from_dense(A, bw)


def test_criterion_06_kronecker_randomized():
    rng = np.random.default_rng(2024)
    worst_mv = worst_solve = worst_prod = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 4))
        orders = [int(rng.integers(1, 6)) for _ in range(d)]
        bws = [int(rng.integers(0, n)) if n > 1 else 0 for n in orders]
        factors = [random_spd_banded(rng, n, b) for n, b in zip(orders, bws)]
        K = dense_kron(factors)
        v = rng.standard_normal(K.shape[0])
        ref = K @ v
        worst_mv = max(worst_mv, np.abs(kron_matvec(factors, v) - ref).max() / np.abs(ref).max())
        y = kron_solve([banded_cholesky(F) for F in factors], v)
        worst_solve = max(worst_solve, np.abs(K @ y - v).max() / np.abs(v).max())
        others = [rng.standard_normal((n, n)) for n in orders]
        lhs = K @ dense_kron(others)
        rhs = dense_kron([F.to_dense() @ G for F, G in zip(factors, others)])
        worst_prod = max(worst_prod, np.abs(lhs - rhs).max() / np.abs(rhs).max())
    ok = worst_mv <= 1e-10 and worst_solve <= 1e-10 and worst_prod <= 1e-12
    report(6, ok, f"matvec {worst_mv:.1e}, solve {worst_solve:.1e}, product identity {worst_prod:.1e}")


def test_criterion_07_application_cost():
    d = 2
    n_target = 10**4
    worst = 0.0
    times = {}
    with threadpool_limits(limits=1):
        for p in (2, 4, 6):
            n_sub = 100 - p
            tb = TensorBasis.uniform(p, n_sub, d)
            assert tb.num_dofs == n_target
            P = setup_mass_preconditioner(tb, identity_patch(d))
            z = np.random.default_rng(p).standard_normal(tb.num_dofs)
            P.flops.reset()
            P.apply_inverse(z)
            model = 2 * (d * (2 * p + 1) + 1) * n_target
            worst = max(worst, abs(P.flops.count - model) / model)
            runs = []
            for _ in range(30):
                t = time.perf_counter()
                P.apply_inverse(z)
                runs.append(time.perf_counter() - t)
            times[p] = float(np.median(runs))
    ratio = times[6] / times[2]
    ok = worst <= 0.25 and ratio <= 4.0
    report(7, ok, f"max flop deviation {100 * worst:.1f}%, time(p=6)/time(p=2) = {ratio:.2f}")


@pytest.mark.slow
def test_criterion_08_multipatch_h_robustness():
    parts, ok = [], True
    for name in ("multipatch_square_2x2", "multipatch_star_5"):
        geom = catalog(name)
        for p in (2, 3):
            kappas, its = [], []
            for n_sub in (8, 16, 32, 64):
                prob = build_problem(geom, p, n_sub)
                P = fit_preconditioner("additive-schwarz", prob)
                kappas.append(kappa_of(prob, P))
                its.append(solve_iterations(prob, P))
            spread = max(kappas) / min(kappas) - 1.0
            ok &= spread <= 0.20 and max(its) <= 25
            parts.append(f"{name} p={p}: kappa {min(kappas):.1f}-{max(kappas):.1f}, its <= {max(its)}")
    report(8, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_09_singular_geometries_bounded():
    parts, ok = [], True
    for name in ("disc_one_singularity", "disc_four_singularities"):
        patch = catalog(name)
        for p in (2, 3, 4):
            kappas, its = [], []
            for n_sub in (16, 32, 64, 128):
                prob = build_problem(patch, p, n_sub)
                P = fit_preconditioner("mass", prob)
                kappas.append(kappa_of(prob, P))
                its.append(solve_iterations(prob, P))
            spread = max(kappas) / min(kappas)
            ok &= spread <= 1.15 and max(its) <= 8
            parts.append(f"{name} p={p}: max/min {spread:.3f}, its <= {max(its)}")
    report(9, ok, "; ".join(parts))


def test_criterion_10_strip_matches_merged_patch():
    worst = 0.0
    for p, n_sub in ((1, 4), (2, 6), (3, 5), (4, 8)):
        box = lambda x0: identity_patch(2).affine_copy(np.eye(2), [x0, 0.0])  # noqa: E731
        ms = build_multipatch_space(MultipatchGeometry([box(0.0), box(1.0)]), p, n_sub)
        M = assemble_global_mass(ms)

        half = np.linspace(0, 0.5, n_sub + 1)[1:-1]
        knots = np.concatenate([[0.0] * (p + 1), half, [0.5] * p, 0.5 + half, [1.0] * (p + 1)])
        tb = TensorBasis([KnotVector(knots, p), make_uniform_knots(p, n_sub)])
        merged = identity_patch(2).affine_copy(np.diag([2.0, 1.0]))
        Mref = assemble_physical_mass(tb, weight_from_geometry(merged, tensor_gauss_rule(tb)))

        ref_pts, _, _ = eval_geometry_grid(merged, [kv.greville for kv in tb.kvs])
        pts = np.empty((ms.num_dofs, 2))
        for patch, basis, g in zip(ms.patches, ms.bases, ms.global_maps):
            x, _, _ = eval_geometry_grid(patch, [kv.greville for kv in basis.kvs])
            pts[g] = x.reshape(-1, 2, order="F")
        _, perm = cKDTree(ref_pts.reshape(-1, 2, order="F")).query(pts)
        assert np.unique(perm).size == ms.num_dofs == Mref.shape[0]
        worst = max(worst, abs(M - Mref[perm][:, perm]).max())
    report(10, worst <= 1e-12, f"max entrywise difference {worst:.1e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
