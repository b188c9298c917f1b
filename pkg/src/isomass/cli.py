"""Command-line entry point: ``isomass {bench,compare,kappa,geometries}``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

import argparse
import csv
import logging
import sys
from contextlib import nullcontext

from . import __version__
from .bench import PRECONDITIONERS, BenchmarkConfig, compare_preconditioners, kappa_table, run_benchmark
from .catalog import catalog, list_geometries
from .exceptions import BreakdownError, ConfigError, ConvergenceError, FactorizationError, IsoMassError
from .geometry import Patch

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

log = logging.getLogger("isomass")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_sweep_args(sp, with_precond=True):
    sp.add_argument("--config", help="key = value file; command-line flags override it")
    sp.add_argument("--geometry", help="catalog name or path to a geometry JSON file")
    sp.add_argument("--dim", type=int, help="expected dimension of the geometry")
    sp.add_argument("--degrees", help="spline degrees, e.g. 2,3,4")
    sp.add_argument("--nsub", help="subdivisions per direction, e.g. 16,32,64")
    if with_precond:
        sp.add_argument("--precond", choices=PRECONDITIONERS)
    sp.add_argument("--tol", type=float, help="relative residual tolerance (default 1e-8)")
    sp.add_argument("--kappa", action="store_const", const=True, default=None,
                    help="also estimate the preconditioned condition number")
    sp.add_argument("--out", help="output file (default: standard output)")
    sp.add_argument("--format", choices=("csv", "markdown"))
    sp.add_argument("--threads", type=int, help="rows evaluated concurrently; >1 blanks timings")
    sp.add_argument("--repeats", type=int, help="solve repetitions per row (median time)")
    sp.add_argument("--nnz-cap", dest="nnz_cap", type=float, help="skip rows (marked *) above this nnz estimate")


def build_parser():
    parser = _Parser(prog="isomass", description="Kronecker mass preconditioner benchmarks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_sweep_args(sub.add_parser("bench", help="PCG iterations and timings per (p, n_sub)"))
    _add_sweep_args(sub.add_parser("kappa", help="condition numbers per (p, n_sub)"))
    _add_sweep_args(sub.add_parser("compare", help="scaled Kronecker vs Chan-Evans"), with_precond=False)
    g = sub.add_parser("geometries", help="list the built-in geometries")
    g.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    return parser


def config_from_args(args):
    cfg = BenchmarkConfig()
    if getattr(args, "config", None):
        cfg = BenchmarkConfig.from_file(args.config, cfg)
    overrides = {
        k: getattr(args, k, None)
        for k in ("geometry", "dim", "degrees", "nsub", "precond", "tol", "kappa", "out",
                  "format", "threads", "repeats", "nnz_cap")
    }
    return BenchmarkConfig.from_mapping(overrides, cfg).validate()


def _list_geometries(fmt, stream):
    rows = []
    for name in list_geometries():
        g = catalog(name)
        patches = 1 if isinstance(g, Patch) else len(g.patches)
        kind = "singular" if g.singular else "regular"
        rows.append((name, str(g.dim), str(patches), kind, g.description))
    header = ("name", "dim", "patches", "kind", "description")
    if fmt == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    line = lambda r: "| " + " | ".join(c.ljust(wd) for c, wd in zip(r, widths)) + " |\n"  # noqa: E731
    stream.write(line(header))
    stream.write("|" + "|".join("-" * (wd + 2) for wd in widths) + "|\n")
    for r in rows:
        stream.write(line(r))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "geometries":
            _list_geometries(args.format, sys.stdout)
            return EXIT_OK
        cfg = config_from_args(args)
        runner = {"bench": run_benchmark, "kappa": kappa_table, "compare": compare_preconditioners}[args.command]
        ctx = open(cfg.out, "w", newline="") if cfg.out else nullcontext(sys.stdout)
        with ctx as stream:
            runner(cfg, stream=stream)
        if cfg.out:
            log.info("wrote %s", cfg.out)
    except (ConfigError, OSError) as exc:
        print(f"isomass: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, BreakdownError, FactorizationError) as exc:
        print(f"isomass: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IsoMassError as exc:
        print(f"isomass: error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
