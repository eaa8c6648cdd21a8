"""Command-line front end.

``gpe-ground run`` solves one problem and writes ``<prefix>_summary.csv`` and
``<prefix>_history.csv``. ``gpe-ground reproduce <target>`` reruns a
published experiment grid and writes ``<prefix>_<target>.csv`` with the
published value, the computed value and the pass/fail verdict per cell.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import PotentialSpec, build_problem
from .nepv import quadratic_ratios
from .oracle import OracleError, projected_gradient_ground_state
from .solvers import (IntervalSearchError, LambdaBelowMuError, PositivityLostError, SolverError,
                      SolverOptions, find_initial_interval, inner_newton, nbi, nni)

log = logging.getLogger("gpe_ground")

SOLVERS = ("nbi", "nni", "nni-inexact", "projected-gradient")
POTENTIALS = ("harmonic", "harmonic_lattice", "zero")
SUMMARY_COLUMNS = ("solver", "dim", "n", "beta", "a", "b", "outer_iters", "lambda", "residual",
                   "wall_seconds", "status")
HISTORY_COLUMNS = ("k", "lambda_k", "residual_k", "step_or_inner_count", "norm_u")
REPORT_COLUMNS = ("experiment", "quantity", "published", "computed", "abs_diff", "tolerance", "required",
                  "pass")
TARGETS = ("table1", "table2", "table3", "table4", "fig1", "fig2", "fig3")

_ERROR_STATUS = {
    LambdaBelowMuError: "lambda_below_mu",
    PositivityLostError: "positivity_lost",
    IntervalSearchError: "interval_search_failed",
    OracleError: "oracle_failed",
}


def fmt(x) -> str:
    """CSV cell: ints verbatim, floats with 10 significant digits, None empty."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.10g" % x
    return str(x)


def _write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


# ---------------------------------------------------------------------------
# run


@dataclass
class RunConfig:
    dim: int = 2
    sizes: tuple[int, ...] = (15, 15)
    beta: float = 1.0
    potential: str = "harmonic"
    solver: str = "nbi"
    tol_outer: float = 1e-7
    tol_inner: float = 1e-10
    max_outer: int = 100
    interval: tuple[float, float] | None = None
    warm_start: bool = True
    inexact_tol: float = 1e-6
    inexact_maxit: int = 200
    out: str = "gpe"

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.potential not in POTENTIALS:
            raise ValueError(f"potential must be one of {POTENTIALS}, got {self.potential!r}")
        if self.interval is not None:
            a, b = self.interval
            if not a < b:
                raise ValueError(f"interval requires a < b, got [{a}, {b}]")
        if len(self.sizes) != self.dim:
            raise ValueError(f"{self.dim} grid sizes expected, got {self.sizes}")
        self.options()

    def options(self) -> SolverOptions:
        return SolverOptions(tol_outer=self.tol_outer, tol_inner=self.tol_inner, max_outer=self.max_outer,
                             inexact=self.solver == "nni-inexact", bicgstab_tol=self.inexact_tol,
                             bicgstab_maxit=self.inexact_maxit, warm_start=self.warm_start)

    def problem(self):
        n = math.prod(self.sizes)
        spec = PotentialSpec.zero(n) if self.potential == "zero" else PotentialSpec(self.potential)
        return build_problem(self.dim, self.sizes, self.beta, spec)


def execute(cfg: RunConfig):
    """Solve the configured problem.

    Returns ``(summary_row, history_rows)``; failures are reported through
    the ``status`` field rather than raised.
    """
    p = cfg.problem()
    opts = cfg.options()
    summary = {"solver": cfg.solver, "dim": cfg.dim, "n": p.n, "beta": cfg.beta, "a": None, "b": None,
               "outer_iters": 0, "lambda": None, "residual": None, "wall_seconds": 0.0, "status": ""}
    history = []
    t0 = time.perf_counter()
    try:
        if cfg.solver == "nbi":
            a, b = cfg.interval if cfg.interval is not None else find_initial_interval(p)
            summary["a"], summary["b"] = a, b
            res = nbi(p, a, b, opts=opts)
        elif cfg.solver in ("nni", "nni-inexact"):
            res = nni(p, opts=opts)
        else:
            res = None
            pg_hist = []

            def record(k, lam, rn, u):
                pg_hist.append({"k": k, "lambda_k": lam, "residual_k": rn, "step_or_inner_count": None,
                                "norm_u": float(np.linalg.norm(u))})

            lam, u = projected_gradient_ground_state(p, tol=max(cfg.tol_inner * p.n, 1e-12),
                                                     callback=record)
            history = pg_hist
            summary.update(outer_iters=len(pg_hist), status="converged", **{"lambda": lam})
            summary["residual"] = pg_hist[-1]["residual_k"] if pg_hist else 0.0
        if res is not None:
            history = [{"k": h.k, "lambda_k": h.lam, "residual_k": h.residual,
                        "step_or_inner_count": h.step_or_inner_count, "norm_u": h.norm_u}
                       for h in res.history]
            summary.update(outer_iters=res.outer_iterations, residual=res.residual_norm,
                           status=str(res.status), **{"lambda": res.lam})
    except (SolverError, OracleError, np.linalg.LinAlgError) as exc:
        summary["status"] = next((v for k, v in _ERROR_STATUS.items() if isinstance(exc, k)),
                                 "solver_error")
        log.error("%s failed: %s", cfg.solver, exc)
    summary["wall_seconds"] = time.perf_counter() - t0
    return summary, history


def run(cfg: RunConfig) -> int:
    summary, history = execute(cfg)
    _write_csv(Path(f"{cfg.out}_summary.csv"), SUMMARY_COLUMNS, [summary])
    _write_csv(Path(f"{cfg.out}_history.csv"), HISTORY_COLUMNS, history)
    log.info("%s: lambda=%s status=%s", cfg.solver, fmt(summary["lambda"]), summary["status"])
    return 0 if summary["status"] == "converged" else 1


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


_RUN_DEFAULTS = {"dim": "2", "n": "15", "beta": "1", "potential": "harmonic", "solver": "nbi",
                 "tol_outer": "1e-7", "tol_inner": "1e-10", "max_outer": "100", "warm_start": "on",
                 "inexact_tol": "1e-6", "inexact_maxit": "200", "out": "gpe", "auto_interval": "false"}
_RUN_KEYS = set(_RUN_DEFAULTS) | {"nx", "ny", "nz", "a", "b"}


def _truthy(v) -> bool:
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    """Merge built-in defaults, the optional config file, then explicit flags."""
    merged = dict(_RUN_DEFAULTS)
    if getattr(ns, "config", None):
        filed = read_config_file(ns.config)
        unknown = set(filed) - _RUN_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(filed)
    flags = {k: v for k, v in vars(ns).items() if k in _RUN_KEYS and v is not None}
    if ("a" in flags or "b" in flags) and "auto_interval" not in flags:
        merged["auto_interval"] = "false"
    merged.update(flags)

    dim = int(merged["dim"])
    n = int(merged["n"])
    sizes = tuple(int(merged.get(ax) or n) for ax in ("nx", "ny", "nz")[:dim])
    a, b = merged.get("a"), merged.get("b")
    if _truthy(merged["auto_interval"]):
        interval = None
    elif a is None and b is None:
        interval = None
    elif a is None or b is None:
        raise ValueError("give both --a and --b, or --auto-interval")
    else:
        interval = (float(a), float(b))
    return RunConfig(dim=dim, sizes=sizes, beta=float(merged["beta"]), potential=merged["potential"],
                     solver=merged["solver"], tol_outer=float(merged["tol_outer"]),
                     tol_inner=float(merged["tol_inner"]), max_outer=int(merged["max_outer"]),
                     interval=interval, warm_start=_truthy(merged["warm_start"]),
                     inexact_tol=float(merged["inexact_tol"]), inexact_maxit=int(merged["inexact_maxit"]),
                     out=str(merged["out"]))


# ---------------------------------------------------------------------------
# reproduce


@dataclass
class Cell:
    experiment: str
    quantity: str
    published: str | float | None
    computed: float | str | None
    tolerance: str = ""
    required: bool = True
    passed: bool | None = None
    abs_diff: float | None = field(default=None)

    def row(self) -> dict:
        return {"experiment": self.experiment, "quantity": self.quantity, "published": self.published,
                "computed": self.computed, "abs_diff": self.abs_diff, "tolerance": self.tolerance,
                "required": self.required, "pass": "" if self.passed is None else self.passed}


def _near(exp, qty, ref, computed, tol, required=True) -> Cell:
    ok = computed is not None and np.isfinite(computed) and abs(computed - ref) <= tol
    diff = None if computed is None else abs(computed - ref)
    return Cell(exp, qty, ref, computed, f"abs<={fmt(tol)}", required, bool(ok), diff)


def _at_most(exp, qty, ref, computed, bound, required=True) -> Cell:
    ok = computed is not None and computed <= bound
    return Cell(exp, qty, ref, computed, f"<={fmt(bound)}", required, bool(ok))


def _info(exp, qty, ref, computed) -> Cell:
    return Cell(exp, qty, ref, computed, "", False, None)


def _sizes_label(sizes) -> str:
    return "x".join(str(s) for s in sizes)


def _solve_cell(exp, dim, sizes, beta, lam_ref, lam_tol, interval, potential="harmonic"):
    """NBI and NNI on one configuration: eigenvalue, residual and iteration cells."""
    cells = []
    for solver in ("nbi", "nni"):
        cfg = RunConfig(dim=dim, sizes=sizes, beta=beta, potential=potential, solver=solver,
                        interval=interval)
        summary, _ = execute(cfg)
        lam = summary["lambda"]
        tag = f"{solver} n={_sizes_label(sizes)} beta={fmt(beta)}"
        cells.append(_near(exp, f"{tag} lambda", lam_ref, lam, lam_tol))
        if summary["residual"] is not None:
            cells.append(_at_most(exp, f"{tag} residual", None, summary["residual"], 1e-10 * summary["n"]))
        cells.append(_info(exp, f"{tag} outer_iters", None, summary["outer_iters"]))
        cells.append(Cell(exp, f"{tag} status", "converged", summary["status"], "", True,
                          summary["status"] == "converged"))
        cells.append(_info(exp, f"{tag} wall_seconds", None, summary["wall_seconds"]))
    return cells


def _table1(large: bool):
    rows = [(15, 18, 12, True), (63, 16, 15, False)]
    if large:
        rows.append((127, 17, 17, False))
    cells = []
    for N, bi_ref, first_ref, required in rows:
        p = build_problem(2, N, 1.0)
        res = nbi(p, 22.0, 23.0)
        counts = res.inner_counts
        tag = f"n={p.n}"
        cells.append(_near("table1", f"{tag} bi_iter", bi_ref, res.outer_iterations, 2, required))
        cells.append(_near("table1", f"{tag} first_newton", first_ref, counts[0] if counts else None, 3,
                           required))
        cells.append(_at_most("table1", f"{tag} max_later_newton", 5, max(counts[1:], default=0), 5, required))
        cells.append(_at_most("table1", f"{tag} violate", 2, res.max_violations, 4, required))
        cells.append(_at_most("table1", f"{tag} residual", None, res.residual_norm, 1e-10 * p.n, required))
        cells.append(_info("table1", f"{tag} newton_iters", None, " ".join(map(str, counts))))
    return cells


def _table2(large: bool):
    sizes = [15, 31, 63] + ([127] if large else [])
    published = {(50, 15): 100.4052, (50, 31): 100.8487, (50, 63): 100.9569, (50, 127): 100.9838,
             (100, 15): 166.0699, (100, 31): 167.0551, (100, 63): 167.2938, (100, 127): 167.3528}
    intervals = {50: (80.9598, 161.9196), 100: (166.0, 170.0)}
    cells = []
    for beta in (50, 100):
        for N in sizes:
            cells += _solve_cell("table2", 2, (N, N), beta, published[beta, N], 2e-4, intervals[beta])
    return cells


def _table3(large: bool):
    presets = [(1, (34.4188, 68.8377), 36.9082, 36.9121, 2e-4),
               (50, (68.8377, 137.6753), 117.4751, 117.5013, 2e-4),
               (100, (137.6753, 275.3506), 184.1856, 184.2434, 2e-4),
               (1000, (1101.4, 2202.8), 1205.3, 1206.5, 0.1)]
    cells = []
    for beta, interval, lam63, lam127, tol in presets:
        cells += _solve_cell("table3", 2, (63, 63), beta, lam63, tol, interval, "harmonic_lattice")
        if large:
            cells += _solve_cell("table3", 2, (127, 127), beta, lam127, tol, interval, "harmonic_lattice")
    return cells


def _table4(large: bool):
    cells = []
    for sizes, lam in (((17, 17, 33), 19.7394), ((17, 33, 33), 19.7574)):
        cells += _solve_cell("table4", 3, sizes, 1.0, lam, 2e-4, None)
    return cells


def _fig1(large: bool):
    p = build_problem(2, 15, 1.0)
    cells = []
    newton = inner_newton(p, 22.5, np.ones(p.n))
    for k, r in enumerate(newton.residuals, 1):
        cells.append(_info("fig1", f"newton lambda=22.5 k={k} residual", None, r))
    outer = nni(p)
    nni_res = [h.residual for h in outer.history]
    for k, r in enumerate(nni_res, 1):
        cells.append(_info("fig1", f"nni k={k} residual", None, r))
    for name, res in (("newton", newton.residuals), ("nni", nni_res)):
        ratios = quadratic_ratios(res)
        for i, q in enumerate(ratios):
            cells.append(_info("fig1", f"{name} tail ratio {i + 1}", None, q))
        spread = float(ratios.max() / ratios.min()) if len(ratios) >= 2 else math.inf
        cells.append(_at_most("fig1", f"{name} tail ratio spread", None, spread, 10.0))
    return cells


def fit_slope(x, y) -> float:
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def _sweep_cells(exp, xlabel, xs, counts, totals):
    cells = []
    for x, c, t in zip(xs, counts, totals):
        cells.append(_info(exp, f"{xlabel}={fmt(x)} outer_iters", None, c))
        cells.append(_info(exp, f"{xlabel}={fmt(x)} total_newton", None, t))
    nondecreasing = all(b >= a for a, b in zip(counts, counts[1:]))
    cells.append(Cell(exp, "outer_iters nondecreasing", None, None, "", True, nondecreasing))
    slope = fit_slope(xs, counts)
    cells.append(_near(exp, "fitted slope per doubling", 1.0, slope, 1.0))
    # distance of the counts from the best slope-1 line y = x + c
    offsets = np.asarray(counts, float) - np.asarray(xs, float)
    dev = float((offsets.max() - offsets.min()) / 2)
    cells.append(_at_most(exp, "max deviation from slope-1 line", None, dev, 2.0))
    return cells


def fig2_counts(N: int = 31, tols=None):
    tols = tols if tols is not None else [10.0 ** -e for e in range(3, 11)]
    p = build_problem(2, N, 1.0)
    out = []
    for tol in tols:
        res = nbi(p, 22.0, 23.0, opts=SolverOptions(tol_outer=tol))
        out.append((tol, res.outer_iterations, sum(res.inner_counts)))
    return out


def fig3_counts(N: int = 31, widths=None):
    widths = widths if widths is not None else [2.0 ** j for j in range(7)]
    p = build_problem(2, N, 1.0)
    out = []
    for w in widths:
        res = nbi(p, 22.0, 22.0 + w)
        out.append((w, res.outer_iterations, sum(res.inner_counts)))
    return out


def _fig2(large: bool):
    data = fig2_counts(63 if large else 31)
    xs = [math.log2(1.0 / t) for t, _, _ in data]
    return _sweep_cells("fig2", "log2(1/tol)", xs, [c for _, c, _ in data], [t for _, _, t in data])


def _fig3(large: bool):
    data = fig3_counts(63 if large else 31)
    xs = [math.log2(w) for w, _, _ in data]
    return _sweep_cells("fig3", "log2(b-a)", xs, [c for _, c, _ in data], [t for _, _, t in data])


_REPRODUCERS = {"table1": _table1, "table2": _table2, "table3": _table3, "table4": _table4,
                "fig1": _fig1, "fig2": _fig2, "fig3": _fig3}


def reproduce(target: str, out: str = "reproduce", large: bool = False) -> int:
    if target not in _REPRODUCERS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    cells = _REPRODUCERS[target](large)
    path = Path(f"{out}_{target}.csv")
    _write_csv(path, REPORT_COLUMNS, [c.row() for c in cells])
    failed = [c for c in cells if c.required and c.passed is False]
    for c in failed:
        log.warning("FAILED %s: %s published=%s computed=%s", c.experiment, c.quantity, fmt(c.published),
                    fmt(c.computed))
    log.info("%s: %d cells, %d required failures -> %s", target, len(cells), len(failed), path)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpe-ground",
                                     description="Positive ground states of the discretized GPE.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve one problem and write summary/history CSVs")
    r.add_argument("--config", help="key=value file; explicit flags take precedence")
    r.add_argument("--dim", type=int, choices=(1, 2, 3))
    r.add_argument("--n", type=int, help="interior points per direction")
    r.add_argument("--nx", type=int)
    r.add_argument("--ny", type=int)
    r.add_argument("--nz", type=int)
    r.add_argument("--beta", type=float)
    r.add_argument("--potential", choices=POTENTIALS)
    r.add_argument("--solver", choices=SOLVERS)
    r.add_argument("--a", type=float, help="left end of the NBI interval")
    r.add_argument("--b", type=float, help="right end of the NBI interval")
    r.add_argument("--auto-interval", action="store_const", const="true", default=None,
                   help="search the NBI interval automatically")
    r.add_argument("--tol-outer", type=float)
    r.add_argument("--tol-inner", type=float)
    r.add_argument("--max-outer", type=int)
    r.add_argument("--warm-start", choices=("on", "off"))
    r.add_argument("--inexact-tol", type=float)
    r.add_argument("--inexact-maxit", type=int)
    r.add_argument("--out", help="output path prefix (default: gpe)")

    rp = sub.add_parser("reproduce", help="rerun a published table or figure and compare")
    rp.add_argument("target", choices=TARGETS)
    rp.add_argument("--large", action="store_true", help="include the n=127^2 cells")
    rp.add_argument("--out", default="reproduce", help="output path prefix (default: reproduce)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if ns.command == "run":
        try:
            cfg = config_from_args(ns)
        except (ValueError, OSError) as exc:
            parser.error(str(exc))
        return run(cfg)
    return reproduce(ns.target, ns.out, ns.large)


if __name__ == "__main__":
    sys.exit(main())
