"""Benchmark harness: L2-projection sweeps over (p, n_sub), condition numbers, preconditioner comparison.

Each row assembles the mass matrix on the chosen geometry, fits the
preconditioner (timed as setup), solves the projection of
``f(x) = prod_k cos(pi x_k)`` by PCG from the zero guess (median wall time of
``repeats`` solves) and optionally estimates the condition number of the
preconditioned operator (dense within the guard, Lanczos above it).
"""

import configparser
import csv
import dataclasses
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .assembly import assemble_load_vector, assemble_physical_mass
from .catalog import catalog, list_geometries
from .exceptions import ConfigError
from .geometry import MultipatchGeometry, Patch, eval_geometry_grid, weight_from_geometry
from .io import load_geometry
from .kron import DENSE_GUARD
from .multipatch import (
    AdditiveSchwarzPreconditioner,
    assemble_global_mass,
    assemble_local_masses,
    build_multipatch_space,
)
from .precond import (
    ChanEvansPreconditioner,
    IdentityPreconditioner,
    JacobiPreconditioner,
    MassPreconditioner,
)
from .solver import (
    condition_number_dense,
    condition_number_lanczos,
    extreme_eigenvalues_dense,
    pcg,
    reduction_factor,
)
from .splines import TensorBasis, tensor_gauss_rule

__all__ = [
    "PRECONDITIONERS",
    "BenchmarkConfig",
    "Problem",
    "build_problem",
    "fit_preconditioner",
    "estimate_kappa",
    "run_benchmark",
    "kappa_table",
    "compare_preconditioners",
    "RowWriter",
]

PRECONDITIONERS = ("mass", "chan-evans", "jacobi", "none", "additive-schwarz")
FORMATS = ("csv", "markdown")


def _int_list(value, name):
    if isinstance(value, str):
        parts = [v for v in value.replace(",", " ").split() if v]
        try:
            return [int(v) for v in parts]
        except ValueError as exc:
            raise ConfigError(f"{name}: expected a list of integers, got {value!r}") from exc
    if isinstance(value, int):
        return [value]
    return [int(v) for v in value]


def _bool(value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


@dataclass
class BenchmarkConfig:
    """Settings of one sweep.  ``geometry`` is a catalog name or a path to a JSON file."""

    geometry: str = "kite_like"
    dim: int = None
    degrees: list = field(default_factory=lambda: [2, 3, 4])
    n_sub: list = field(default_factory=lambda: [16, 32, 64])
    precond: str = "mass"
    tol: float = 1e-8
    kappa: bool = False
    out: str = None
    format: str = "csv"
    threads: int = 1
    repeats: int = 3
    nnz_cap: int = 50_000_000
    dense_guard: int = DENSE_GUARD
    lanczos_iters: int = 200
    max_iter: int = None

    _coerce = {
        "dim": int,
        "degrees": lambda v: _int_list(v, "degrees"),
        "n_sub": lambda v: _int_list(v, "n_sub"),
        "tol": float,
        "kappa": _bool,
        "threads": int,
        "repeats": int,
        "nnz_cap": lambda v: int(float(v)),
        "dense_guard": int,
        "lanczos_iters": int,
        "max_iter": int,
    }

    @classmethod
    def field_names(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, values, base=None):
        """Overlay ``values`` (None entries ignored) on ``base`` or the defaults."""
        cfg = dataclasses.replace(base) if base is not None else cls()
        names = cls.field_names()
        for key, value in values.items():
            key = key.replace("-", "_")
            if key == "nsub":
                key = "n_sub"
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}; valid keys: {', '.join(names)}")
            if value is None:
                continue
            conv = cls._coerce.get(key)
            try:
                setattr(cfg, key, conv(value) if conv else value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
        return cfg

    @classmethod
    def from_file(cls, path, base=None):
        """Read ``key = value`` lines (``#`` comments; lists comma separated)."""
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            parser.read_string("[bench]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        return cls.from_mapping(dict(parser["bench"]), base)

    def validate(self):
        if self.precond not in PRECONDITIONERS:
            raise ConfigError(f"unknown preconditioner {self.precond!r}; choose from {', '.join(PRECONDITIONERS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; choose from {', '.join(FORMATS)}")
        if not self.degrees or min(self.degrees) < 1:
            raise ConfigError("degrees must be >= 1")
        if not self.n_sub or min(self.n_sub) < 4:
            raise ConfigError("n_sub values must be >= 4")
        if not self.tol > 0.0:
            raise ConfigError("tol must be positive")
        if self.threads < 1 or self.repeats < 1:
            raise ConfigError("threads and repeats must be >= 1")
        return self

    def load_geometry(self):
        g = self.geometry
        if g in list_geometries():
            geom = catalog(g, self.dim)
        elif Path(g).is_file():
            geom = load_geometry(g)
        else:
            raise ConfigError(
                f"geometry {g!r} is neither a file nor a catalog entry; valid names: {', '.join(list_geometries())}"
            )
        if self.dim is not None and geom.dim != self.dim:
            raise ConfigError(f"geometry has dimension {geom.dim}, config asks for {self.dim}")
        multi = isinstance(geom, MultipatchGeometry) and len(geom.patches) > 1
        if multi and self.precond in ("mass", "chan-evans"):
            raise ConfigError(f"{self.precond!r} is single-patch; use additive-schwarz on multipatch geometries")
        if self.precond == "chan-evans":
            if geom.singular:
                raise ConfigError("chan-evans needs a regular geometry (|J_F|^-1 is unbounded here)")
        return geom


class Problem:
    """Assembled mass system ``M x = b`` for one (geometry, p, n_sub)."""

    def __init__(self, geometry, p, n_sub, M, b, space=None, basis=None, weight=None, local_masses=None):
        self.geometry = geometry
        self.p = p
        self.n_sub = n_sub
        self.M = M
        self.b = b
        self.space = space
        self.basis = basis
        self.weight = weight
        self.local_masses = local_masses

    @property
    def num_dofs(self):
        return self.M.shape[0]

    @property
    def multipatch(self):
        return self.space is not None


def _cosine_load(patch, basis, quad):
    """``int B_i f |J_F|`` with ``f = prod_k cos(pi x_k)`` evaluated at the physical nodes."""
    x, _, det = eval_geometry_grid(patch, [r.points for r in quad])
    f = np.prod(np.cos(np.pi * x), axis=-1)
    return assemble_load_vector(basis, f * np.abs(det), quad)


def build_problem(geom, p, n_sub):
    """Assemble the mass matrix and the projection load for ``geom``."""
    if isinstance(geom, Patch):
        basis = TensorBasis.uniform(p, n_sub, geom.dim)
        quad = tensor_gauss_rule(basis)
        w = weight_from_geometry(geom, quad)
        M = assemble_physical_mass(basis, w)
        b = _cosine_load(geom, basis, quad)
        return Problem(geom, p, n_sub, M, b, basis=basis, weight=w)
    space = build_multipatch_space(geom, p, n_sub)
    local = assemble_local_masses(space)
    M = assemble_global_mass(space, local)
    b = np.zeros(space.num_dofs)
    for patch, basis, quad, g in zip(space.patches, space.bases, space.quads, space.global_maps):
        b[g] += _cosine_load(patch, basis, quad)
    return Problem(geom, p, n_sub, M, b, space=space, local_masses=local)


def fit_preconditioner(name, problem):
    if name == "mass":
        return MassPreconditioner().fit(problem.basis, problem.weight, mass=problem.M)
    if name == "chan-evans":
        return ChanEvansPreconditioner().fit(problem.basis, problem.geometry, quad=problem.weight.quad)
    if name == "jacobi":
        return JacobiPreconditioner().fit(problem.M)
    if name == "none":
        return IdentityPreconditioner().fit(problem.M)
    if name == "additive-schwarz":
        space = problem.space
        if space is None:
            space = build_multipatch_space(problem.geometry, problem.p, problem.n_sub)
            return AdditiveSchwarzPreconditioner().fit(space, [problem.M])
        return AdditiveSchwarzPreconditioner().fit(space, problem.local_masses)
    raise ConfigError(f"unknown preconditioner {name!r}")


def estimate_kappa(M, P, guard=DENSE_GUARD, lanczos_iters=200):
    """``(kappa, method)``: dense eigensolve up to ``guard`` unknowns, Lanczos above."""
    if M.shape[0] <= guard:
        if isinstance(P, MassPreconditioner):
            return condition_number_dense(M, P=P.to_dense(), guard=guard), "dense"
        return condition_number_dense(M, P_inv=P, guard=guard), "dense"
    kappa, _, _ = condition_number_lanczos(M, P, iters=lanczos_iters, tol=1e-9)
    return kappa, "lanczos"


def _estimated_nnz(geom, p, n_sub):
    d = geom.dim
    npatch = 1 if isinstance(geom, Patch) else len(geom.patches)
    return npatch * (n_sub + p) ** d * (2 * p + 1) ** d


COLUMNS = ["geometry", "p", "n_sub", "dofs", "precond", "iterations", "rel_residual",
           "setup_s", "solve_s", "flops", "kappa", "kappa_method"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


class RowWriter:
    """Writes rows as they are produced (CSV or fixed-width Markdown), flushing each line."""

    def __init__(self, columns, fmt="csv", stream=None):
        self.columns = list(columns)
        self.fmt = fmt
        self.stream = stream if stream is not None else sys.stdout
        self._csv = csv.writer(self.stream, lineterminator="\n") if fmt == "csv" else None
        self.width = max(12, max(len(c) for c in self.columns))
        self._header()

    def _line(self, cells):
        return "| " + " | ".join(f"{c:>{self.width}}" for c in cells) + " |\n"

    def _header(self):
        if self._csv:
            self._csv.writerow(self.columns)
        else:
            self.stream.write(self._line(self.columns))
            self.stream.write("|" + "|".join(["-" * (self.width + 1) + ":"] * len(self.columns)) + "|\n")
        self.stream.flush()

    def write(self, row):
        cells = [_fmt(row.get(c)) for c in self.columns]
        if self._csv:
            self._csv.writerow(cells)
        else:
            self.stream.write(self._line(cells))
        self.stream.flush()


def _bench_row(cfg, geom, p, n_sub, timed):
    label = getattr(geom, "label", "") or cfg.geometry
    row = {"geometry": label, "p": p, "n_sub": n_sub, "precond": cfg.precond}
    if _estimated_nnz(geom, p, n_sub) > cfg.nnz_cap:
        row.update({c: "*" for c in ("dofs", "iterations", "setup_s", "solve_s", "kappa")})
        return row
    prob = build_problem(geom, p, n_sub)
    P = fit_preconditioner(cfg.precond, prob)
    times = []
    for _ in range(cfg.repeats):
        P.flops.reset()
        _, rep = pcg(prob.M, P, prob.b, tol=cfg.tol, max_iter=cfg.max_iter)
        times.append(rep.wall_time)
    row.update(
        dofs=prob.num_dofs,
        iterations=rep.iterations,
        rel_residual=rep.relative_residual,
        setup_s=P.setup_time_ if timed and hasattr(P, "setup_time_") else None,
        solve_s=statistics.median(times) if timed else None,
        flops=rep.flops,
    )
    if cfg.kappa:
        row["kappa"], row["kappa_method"] = estimate_kappa(prob.M, P, cfg.dense_guard, cfg.lanczos_iters)
    return row


def _sweep(cfg, func, columns, stream):
    pairs = [(p, n) for p in cfg.degrees for n in cfg.n_sub]
    geom = cfg.load_geometry()
    writer = RowWriter(columns, cfg.format, stream) if stream is not None else None
    rows = []
    with threadpool_limits(limits=1):
        if cfg.threads == 1:
            for p, n in pairs:
                row = func(cfg, geom, p, n, True)
                rows.append(row)
                if writer:
                    writer.write(row)
        else:
            # concurrent rows: timings would be distorted, so they are left blank
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                for row in pool.map(lambda pn: func(cfg, geom, pn[0], pn[1], False), pairs):
                    rows.append(row)
                    if writer:
                        writer.write(row)
    return rows


def run_benchmark(cfg, stream=None):
    """Iterations, timings and (optionally) kappa per (p, n_sub).  Rows are streamed to ``stream``."""
    cfg.validate()
    return _sweep(cfg, _bench_row, COLUMNS, stream)


KAPPA_COLUMNS = ["geometry", "p", "n_sub", "dofs", "precond", "kappa", "lambda_min", "lambda_max", "kappa_method"]


def _kappa_row(cfg, geom, p, n_sub, timed):
    label = getattr(geom, "label", "") or cfg.geometry
    row = {"geometry": label, "p": p, "n_sub": n_sub, "precond": cfg.precond}
    if _estimated_nnz(geom, p, n_sub) > cfg.nnz_cap:
        row.update(dofs="*", kappa="*")
        return row
    prob = build_problem(geom, p, n_sub)
    P = fit_preconditioner(cfg.precond, prob)
    if prob.num_dofs <= cfg.dense_guard:
        if isinstance(P, MassPreconditioner):
            lo, hi = extreme_eigenvalues_dense(prob.M, P=P.to_dense(), guard=cfg.dense_guard)
        else:
            lo, hi = extreme_eigenvalues_dense(prob.M, P_inv=P, guard=cfg.dense_guard)
        method = "dense"
    else:
        _, lo, hi = condition_number_lanczos(prob.M, P, iters=cfg.lanczos_iters, tol=1e-9)
        method = "lanczos"
    row.update(dofs=prob.num_dofs, kappa=hi / lo, lambda_min=lo, lambda_max=hi, kappa_method=method)
    return row


def kappa_table(cfg, stream=None):
    """Extreme eigenvalues and kappa of the preconditioned mass per (p, n_sub)."""
    cfg.validate()
    return _sweep(cfg, _kappa_row, KAPPA_COLUMNS, stream)


COMPARE_COLUMNS = ["geometry", "p", "n_sub", "dofs", "kappa_mass", "kappa_ce", "q_ce", "q_mass_sq"]


def _compare_row(cfg, geom, p, n_sub, timed):
    label = getattr(geom, "label", "") or cfg.geometry
    row = {"geometry": label, "p": p, "n_sub": n_sub}
    if _estimated_nnz(geom, p, n_sub) > cfg.nnz_cap:
        row.update(dofs="*", kappa_mass="*", kappa_ce="*")
        return row
    prob = build_problem(geom, p, n_sub)
    k_mass, _ = estimate_kappa(prob.M, fit_preconditioner("mass", prob), cfg.dense_guard, cfg.lanczos_iters)
    k_ce, _ = estimate_kappa(prob.M, fit_preconditioner("chan-evans", prob), cfg.dense_guard, cfg.lanczos_iters)
    row.update(
        dofs=prob.num_dofs,
        kappa_mass=k_mass,
        kappa_ce=k_ce,
        q_ce=reduction_factor(k_ce),
        q_mass_sq=reduction_factor(k_mass) ** 2,
    )
    return row


def compare_preconditioners(cfg, stream=None):
    """kappa of the scaled Kronecker and Chan-Evans preconditioners and their reduction factors.

    ``q_mass_sq`` squares the factor because one Chan-Evans application costs
    about two Kronecker solves.
    """
    cfg = dataclasses.replace(cfg, precond="chan-evans").validate()
    return _sweep(cfg, _compare_row, COMPARE_COLUMNS, stream)

