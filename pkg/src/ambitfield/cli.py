"""Command-line front end.

Subcommands::

    ambitfield exponents   analytic tau / mu tables
    ambitfield volume      overlap volume V(dx, dt)
    ambitfield correlate   analytic two-point correlator
    ambitfield simulate    lattice realisations (binary + JSON header)
    ambitfield estimate    empirical correlators and coarse moments
    ambitfield fit         log-log power-law fit of a CSV column
    ambitfield appendix    large-scale integral F_n and its bound
    ambitfield verify      end-to-end pipeline with pass/fail report

Every subcommand reads the same TOML configuration (``--config``) with
environment overrides (see :mod:`ambitfield.config`). Analytic
subcommands print CSV to stdout unless ``--out`` names a directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .ambit import ambit_mask, overlap_volume
from .config import ENV_PREFIX, RunConfig, load_document, run_config
from .correlators import (
    appendix_Fn,
    appendix_Fn_bound,
    check_multifractal_condition,
    critical_order,
    exponent_table,
    h_increment,
    mean_field,
    mu_exponent,
    n_point,
    tau_exponent,
)
from .estimate import (
    TEMPORAL,
    CoarseMomentAccumulator,
    FiniteSampleWarning,
    MeanAccumulator,
    PowerLawFit,
    TwoPointAccumulator,
    fit_powerlaw,
)
from .levy import CumulantDomainError, basis_to_dict
from .simulate import (
    discrete_mean_field,
    field_header,
    generate_one,
    header_lattice,
    load_realization,
    read_header,
    write_header,
    write_realization,
)

log = logging.getLogger("ambitfield")

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad configuration or arguments; reported without a traceback."""


# --- CSV ----------------------------------------------------------------------


def fmt(value) -> str:
    """12 significant digits, widened to the shortest round-trip form when needed."""
    if value is None:
        return "undefined"
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if not math.isfinite(x):
        return repr(x)
    text = f"{x:.12g}"
    return text if float(text) == x else repr(x)


def write_csv(target, header, rows) -> None:
    """Write ``rows`` to a path, or to an open text stream."""
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            write_csv(fh, header, rows)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def _emit(args, name: str, header, rows) -> Optional[Path]:
    if args.out is None:
        write_csv(sys.stdout, header, rows)
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    write_csv(path, header, rows)
    print(path)
    return path


# --- configuration ------------------------------------------------------------


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        n = int(os.environ.get(ENV_PREFIX + "THREADS", "1"))
    if n < 1:
        raise UsageError(f"--threads must be >= 1, got {n}")
    return n


def _config(args, doc: Optional[dict] = None) -> RunConfig:
    try:
        if doc is None:
            doc = load_document(args.config)
        return run_config(doc, seed=args.seed, out=args.out)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"configuration: {exc}") from exc


def _require_valid(cfg: RunConfig, analytic_only: bool) -> None:
    problems = cfg.validate(analytic_only=analytic_only)
    if problems:
        raise UsageError("invalid configuration:\n  " + "\n  ".join(problems))


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _lag_grid(cfg: RunConfig, args) -> list:
    """Explicit ``--dx``/``--dt`` cross product, or one temporal and one spatial decade."""
    if args.dx is not None or args.dt is not None:
        dxs = _floats(args.dx) if args.dx is not None else [0.0]
        dts = _floats(args.dt) if args.dt is not None else [0.0]
        return [(x, t) for t in dts for x in dxs]
    spec = cfg.boundary().spec
    n = int(args.points or cfg.analytic["n_grid"])
    rows = [(0.0, float(t)) for t in np.geomspace(spec.t_scal, spec.T_scal, n)]
    rows += [(float(x), 0.0) for x in np.geomspace(spec.l_scal, spec.L_scal, n)]
    return rows


# --- analytic subcommands -----------------------------------------------------


def _tau_rows(cfg: RunConfig, max_order: int) -> list:
    tau2 = cfg.scaling["tau2"]
    rows = []
    for n1 in range(1, max_order + 1):
        for n2 in range(n1, max_order + 1):
            try:
                rows.append((n1, n2, tau_exponent(cfg.basis, tau2, n1, n2)))
            except CumulantDomainError:
                rows.append((n1, n2, math.nan))
    return rows


def _mu_rows(cfg: RunConfig, max_order: int) -> list:
    tau2 = cfg.scaling["tau2"]
    rows = []
    for n in range(1, max_order + 1):
        try:
            mu = mu_exponent(cfg.basis, tau2, n)
        except CumulantDomainError:
            mu = math.nan
        rows.append((n, mu, check_multifractal_condition(cfg.basis, tau2, n)))
    return rows


TAU_HEADER = ("n1", "n2", "tau")
MU_HEADER = ("n", "mu", "condition_ok")


def cmd_exponents(args) -> int:
    cfg = _config(args)
    _require_valid(cfg, analytic_only=True)
    max_order = args.max_order or int(cfg.analytic["max_order"])
    if args.table in ("tau", "all"):
        _emit(args, "exponents_tau.csv", TAU_HEADER, _tau_rows(cfg, max_order))
    if args.table == "all" and args.out is None:
        sys.stdout.write("\n")
    if args.table in ("mu", "all"):
        _emit(args, "exponents_mu.csv", MU_HEADER, _mu_rows(cfg, max_order))
    return EXIT_OK


def cmd_volume(args) -> int:
    cfg = _config(args)
    boundary = cfg.boundary()
    rows = [(dx, dt, overlap_volume(boundary, dx, dt, args.quad_tol)) for dx, dt in _lag_grid(cfg, args)]
    _emit(args, "volume.csv", ("dx", "dt", "volume"), rows)
    return EXIT_OK


def _analytic_two_point(cfg: RunConfig, lags, orders, quad_tol) -> list:
    boundary = cfg.boundary()
    n1, n2 = orders
    return [(dx, dt, n_point(cfg.basis, boundary, [(0.0, 0.0), (dx, dt)], (n1, n2), quad_tol)) for dx, dt in lags]


def cmd_correlate(args) -> int:
    cfg = _config(args)
    orders = tuple(int(v) for v in _floats(args.orders))
    if len(orders) != 2:
        raise UsageError(f"--orders takes two integers, got {args.orders!r}")
    try:
        rows = _analytic_two_point(cfg, _lag_grid(cfg, args), orders, args.quad_tol)
    except CumulantDomainError as exc:
        raise UsageError(f"orders {orders}: {exc}") from exc
    _emit(args, "correlate.csv", ("dx", "dt", "analytic"), rows)
    return EXIT_OK


APPENDIX_HEADER = ("n", "l", "Fn", "stderr", "bound")


def _appendix_rows(cfg: RunConfig, samples: Optional[int] = None) -> list:
    an = cfg.analytic
    tau2 = cfg.scaling["tau2"]
    samples = int(samples or an["appendix_samples"])
    rows = []
    for n in an["appendix_orders"]:
        n = int(n)
        bound = appendix_Fn_bound(cfg.basis, tau2, n)
        for ratio in an["appendix_ratios"]:
            value, se = appendix_Fn(n, 1.0, 1.0 / float(ratio), cfg.basis, tau2, samples, rng=cfg.seed)
            rows.append((n, float(ratio), value, se, bound))
    return rows


def cmd_appendix(args) -> int:
    cfg = _config(args)
    _require_valid(cfg, analytic_only=True)
    try:
        rows = _appendix_rows(cfg, args.samples)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(args, "appendix.csv", APPENDIX_HEADER, rows)
    return EXIT_OK


FIT_HEADER = ("slope", "intercept", "r2", "lo", "hi", "npoints")
_X_COLUMNS = ("lag", "l", "dt", "dx")
_Y_COLUMNS = ("estimate", "Mn", "analytic", "volume")


def _fit_row(fit: PowerLawFit) -> tuple:
    return (fit.slope, fit.intercept, fit.r_squared, fit.lo, fit.hi, fit.npoints)


def cmd_fit(args) -> int:
    with open(args.csv, newline="") as fh:
        records = list(csv.DictReader(fh))
    if not records:
        raise UsageError(f"{args.csv}: no data rows")
    columns = records[0].keys()
    xcol = args.x or next((c for c in _X_COLUMNS if c in columns), None)
    ycol = args.y or next((c for c in _Y_COLUMNS if c in columns), None)
    if xcol not in columns or ycol not in columns:
        raise UsageError(f"cannot pick x/y columns from {list(columns)}; pass --x and --y")
    for cond in args.where:
        key, _, want = cond.partition("=")
        if key not in columns:
            raise UsageError(f"--where: no column {key!r}")
        records = [r for r in records if float(r[key]) == float(want)]
    points = [(float(r[xcol]), float(r[ycol])) for r in records]
    try:
        fit = fit_powerlaw(points, tuple(args.range) if args.range else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(args, "fit.csv", FIT_HEADER, [_fit_row(fit)])
    return EXIT_OK


# --- simulation pipeline ------------------------------------------------------


@dataclass
class Accumulators:
    """Every estimator requested by a plan, for one or more realisations."""

    mean: MeanAccumulator
    two_point: dict = field(default_factory=dict)
    moments: dict = field(default_factory=dict)

    @classmethod
    def for_plan(cls, cfg: RunConfig) -> "Accumulators":
        plan = cfg.plan
        two_point = {tuple(o): TwoPointAccumulator(TEMPORAL, plan.temporal_lags, o) for o in plan.two_point_orders}
        moments = {
            axis: CoarseMomentAccumulator(axis, plan.moment_orders, plan.windows(axis)[0]) for axis in plan.moment_axes
        }
        return cls(MeanAccumulator(), two_point, moments)

    def update(self, real) -> "Accumulators":
        self.mean.update(real)
        for acc in self.two_point.values():
            acc.update(real)
        for acc in self.moments.values():
            acc.update(real)
        return self

    def merge(self, other: "Accumulators") -> "Accumulators":
        self.mean.merge(other.mean)
        for key, acc in self.two_point.items():
            acc.merge(other.two_point[key])
        for key, acc in self.moments.items():
            acc.merge(other.moments[key])
        return self


def _ordered_map(fn, count: int, threads: int):
    """``fn(0), ..., fn(count - 1)`` in order, at most ``threads`` in flight."""
    if threads <= 1:
        for i in range(count):
            yield fn(i)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending: deque = deque()
        nxt = 0
        while nxt < count or pending:
            while nxt < count and len(pending) < threads:
                pending.append(pool.submit(fn, nxt))
                nxt += 1
            yield pending.popleft().result()


def run_estimation(cfg: RunConfig, threads: int = 1, fields_dir=None, store_dir=None) -> Accumulators:
    """Generate (or load) each realisation, estimate, and merge.

    Each worker owns its realisation and a fresh set of accumulators, so
    merged results do not depend on ``threads``.
    """
    boundary = cfg.boundary()
    lattice = cfg.lattice
    mask = ambit_mask(boundary, lattice.dx, lattice.dt) if fields_dir is None else None
    header = read_header(fields_dir) if fields_dir is not None else field_header(cfg.basis, boundary, lattice)
    if store_dir is not None:
        Path(store_dir).mkdir(parents=True, exist_ok=True)

    def work(index: int) -> Accumulators:
        if fields_dir is not None:
            real = load_realization(fields_dir, index, header)
        else:
            real = generate_one(cfg.basis, boundary, lattice, index, mask=mask)
        if store_dir is not None:
            write_realization(store_dir, real, header)
        return Accumulators.for_plan(cfg).update(real)

    total = Accumulators.for_plan(cfg)
    count = len(header["files"])
    for i, part in enumerate(_ordered_map(work, count, threads)):
        total.merge(part)
        log.info("realisation %d/%d done", i + 1, count)
    if store_dir is not None:
        write_header(store_dir, header)
    return total


def _config_from_fields(args, fields_dir) -> RunConfig:
    """Configuration whose model and lattice are those of a stored run."""
    header = read_header(fields_dir)
    doc = load_document(args.config)
    doc["basis"] = dict(header["basis"])
    bd = header["boundary"]
    doc["scaling"] = {k: bd[k] for k in ("tau2", "t_scal", "T_scal", "T")}
    lat = header_lattice(header)
    doc["lattice"] = {
        "dx": lat.dx,
        "dt": lat.dt,
        "nx": lat.nx,
        "nt": lat.nt,
        "realizations": lat.realizations,
        "burn_in_depth": lat.burn_in_depth,
    }
    doc["seed"] = lat.seed
    return _config(args, doc)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    _require_valid(cfg, analytic_only=False)
    threads = _threads(args)
    boundary = cfg.boundary()
    lattice = cfg.lattice
    mask = ambit_mask(boundary, lattice.dx, lattice.dt)

    if args.no_store:

        def summary(index: int):
            v = generate_one(cfg.basis, boundary, lattice, index, mask=mask).values
            return (index, float(v.mean()), float(v.var()), float(v.min()), float(v.max()))

        rows = _ordered_map(summary, lattice.realizations, threads)
        write_csv(sys.stdout, ("realization", "mean", "variance", "min", "max"), rows)
        return EXIT_OK

    header = field_header(cfg.basis, boundary, lattice)
    cfg.out.mkdir(parents=True, exist_ok=True)

    def store(index: int):
        real = generate_one(cfg.basis, boundary, lattice, index, mask=mask)
        return write_realization(cfg.out, real, header)

    for path in _ordered_map(store, lattice.realizations, threads):
        log.info("wrote %s", path)
    print(write_header(cfg.out, header))
    return EXIT_OK


def _estimate_tables(cfg: RunConfig, accs: Accumulators, caught: list) -> dict:
    """CSV name -> (header, rows) for every estimator, recording warnings in ``caught``."""
    tables = {}
    with warnings.catch_warnings(record=True) as record:
        warnings.simplefilter("always", FiniteSampleWarning)
        for (n1, n2), acc in accs.two_point.items():
            tables[f"two_point_temporal_{n1}_{n2}.csv"] = (("lag", "estimate", "stderr"), acc.result())
        for axis, acc in accs.moments.items():
            tables[f"moments_{axis}.csv"] = (("l", "n", "Mn", "stderr"), acc.result())
    for w in record:
        log.warning("%s", w.message)
        caught.append(str(w.message))
    return tables


def cmd_estimate(args) -> int:
    if args.fields is not None:
        cfg = _config_from_fields(args, args.fields)
    else:
        cfg = _config(args)
    _require_valid(cfg, analytic_only=False)
    accs = run_estimation(cfg, _threads(args), fields_dir=args.fields)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in _estimate_tables(cfg, accs, []).items():
        write_csv(cfg.out / name, header, rows)
        print(cfg.out / name)
    return EXIT_OK


# --- verify ---------------------------------------------------------------------


def _check(name: str, value, target, tolerance, passed: bool, detail: str = "") -> dict:
    return {
        "name": name,
        "value": value,
        "target": target,
        "tolerance": tolerance,
        "passed": bool(passed),
        "detail": detail,
    }


def _relative_check(name: str, value: float, target: float, rel_tol: float) -> dict:
    ok = math.isfinite(value) and abs(value - target) <= rel_tol * abs(target)
    return _check(name, value, target, rel_tol, ok, "relative")


def _safe_fit(points, bounds):
    try:
        return fit_powerlaw(points, bounds), None
    except ValueError as exc:
        return None, str(exc)


def _slope_stderr(lags, per_realization, bounds) -> float:
    """Standard error of the slope from one fit per realisation."""
    slopes = []
    for row in per_realization:
        fit, err = _safe_fit(list(zip(lags, row)), bounds)
        if fit is None:
            return math.nan
        slopes.append(fit.slope)
    if len(slopes) < 2:
        return math.nan
    return float(np.std(slopes, ddof=1) / math.sqrt(len(slopes)))


def _fit_record(quantity: str, fit: Optional[PowerLawFit], slope_se: float, error: Optional[str]) -> dict:
    if fit is None:
        return {"quantity": quantity, "error": error}
    return {
        "quantity": quantity,
        "slope": fit.slope,
        "slope_stderr": slope_se,
        "intercept": fit.intercept,
        "r2": fit.r_squared,
        "lo": fit.lo,
        "hi": fit.hi,
        "npoints": fit.npoints,
    }


def _analytic_section(cfg: RunConfig, out: Path, files: list, checks: list) -> dict:
    tau2 = cfg.scaling["tau2"]
    boundary = cfg.boundary()
    spec = boundary.spec
    max_order = int(cfg.analytic["max_order"])

    for name, header, rows in (
        ("exponents_tau.csv", TAU_HEADER, _tau_rows(cfg, max_order)),
        ("exponents_mu.csv", MU_HEADER, _mu_rows(cfg, max_order)),
    ):
        write_csv(out / name, header, rows)
        files.append(name)

    table = exponent_table(cfg.basis, tau2, max_order)
    identity = 0.0
    for n, mu in table.mu.items():
        hsum = math.fsum(h_increment(cfg.basis, tau2, k) for k in range(2, n + 1))
        identity = max(identity, abs(hsum + mu))
    checks.append(_check("exponent_identity_sum_h", identity, 0.0, 1e-12, identity <= 1e-12, "max |sum h(k) + mu(n)|"))

    plan = cfg.plan
    lags = [(0.0, t) for t in plan.temporal_lags]
    analytic_rows = _analytic_two_point(cfg, lags, (1, 1), 1e-10)
    write_csv(out / "two_point_analytic.csv", ("dx", "dt", "analytic"), analytic_rows)
    files.append("two_point_analytic.csv")
    fit, err = _safe_fit([(dt, c) for _, dt, c in analytic_rows], plan.temporal_fit_range)
    target = -tau_exponent(cfg.basis, tau2, 1, 1)
    if fit is None:
        checks.append(_check("analytic_two_point_slope", None, target, 1e-3, False, err))
    else:
        ok = abs(fit.slope - target) <= 1e-3
        checks.append(_check("analytic_two_point_slope", fit.slope, target, 1e-3, ok, "absolute"))

    return {
        "L_scal": spec.L_scal,
        "l_scal": spec.l_scal,
        "T": spec.T,
        "kappa": spec.kappa,
        "ambit_volume": boundary.volume,
        "mean_field": mean_field(cfg.basis, boundary),
        "critical_order": critical_order(cfg.basis, tau2),
        "tau": [{"n1": n1, "n2": n2, "tau": v} for (n1, n2), v in sorted(table.tau.items()) if n1 <= n2],
        "orders": [
            {"n": n, "mu": table.mu.get(n), "h": table.h.get(n), "condition_ok": table.condition[n]}
            for n in sorted(table.condition)
        ],
    }


def _simulation_section(cfg: RunConfig, threads: int, out: Path, files: list, checks: list) -> dict:
    tau2 = cfg.scaling["tau2"]
    boundary = cfg.boundary()
    plan = cfg.plan
    tol = cfg.checks
    accs = run_estimation(cfg, threads)
    caught: list = []
    tables = _estimate_tables(cfg, accs, caught)
    for name, (header, rows) in tables.items():
        write_csv(out / name, header, rows)
        files.append(name)

    fits = []
    for (n1, n2), acc in accs.two_point.items():
        rows = tables[f"two_point_temporal_{n1}_{n2}.csv"][1]
        fit, err = _safe_fit([(r.lag, r.estimate) for r in rows], plan.temporal_fit_range)
        se = _slope_stderr(acc.lags, acc.per_realization(), plan.temporal_fit_range)
        fits.append(_fit_record(f"two_point_temporal_{n1}_{n2}", fit, se, err))
        target = -tau_exponent(cfg.basis, tau2, n1, n2)
        name = f"two_point_temporal_{n1}_{n2}_slope"
        if fit is None:
            checks.append(_check(name, None, target, tol["two_point_slope_tol"], False, err))
        else:
            checks.append(_relative_check(name, fit.slope, target, tol["two_point_slope_tol"]))

    mean, mean_se = accs.mean.result()
    mf = mean_field(cfg.basis, boundary)
    k = float(tol["mean_sigmas"])
    checks.append(_check("field_mean", mean, mf, k, abs(mean - mf) <= k * mean_se, f"within {k:g} standard errors"))

    for axis, acc in accs.moments.items():
        rows = tables[f"moments_{axis}.csv"][1]
        windows, bounds = plan.windows(axis)
        per_real = acc.per_realization()
        for j, n in enumerate(acc.orders):
            if n < 2:
                continue
            pts = [(r.l, r.Mn) for r in rows if r.n == n]
            fit, err = _safe_fit(pts, bounds)
            series = [row[j :: len(acc.orders)] for row in per_real]
            se = _slope_stderr(acc.window_sizes, series, bounds)
            fits.append(_fit_record(f"moments_{axis}_{n}", fit, se, err))
            target = -mu_exponent(cfg.basis, tau2, n)
            name = f"moments_{axis}_{n}_slope"
            if fit is None:
                checks.append(_check(name, None, target, tol["moment_slope_tol"], False, err))
            else:
                checks.append(_relative_check(name, fit.slope, target, tol["moment_slope_tol"]))

    write_csv(
        out / "fits.csv",
        ("quantity",) + FIT_HEADER + ("slope_stderr",),
        [
            (f["quantity"], f["slope"], f["intercept"], f["r2"], f["lo"], f["hi"], f["npoints"], f["slope_stderr"])
            for f in fits
            if "slope" in f
        ],
    )
    files.append("fits.csv")
    return {
        "realizations": cfg.lattice.realizations,
        "field_mean": mean,
        "field_mean_stderr": mean_se,
        "discrete_mean_field": discrete_mean_field(cfg.basis, boundary, cfg.lattice),
        "fits": fits,
        "warnings": caught,
    }


def _config_record(cfg: RunConfig) -> dict:
    lat = cfg.lattice
    return {
        "basis": basis_to_dict(cfg.basis),
        "scaling": dict(sorted(cfg.scaling.items())),
        "lattice": {"dx": lat.dx, "dt": lat.dt, "nx": lat.nx, "nt": lat.nt, "realizations": lat.realizations},
        "seed": cfg.seed,
    }


def _render_text(report: dict) -> str:
    lines = [f"ambitfield verify (schema {report['schema']}, seed {report['config']['seed']})", ""]
    an = report["analytic"]
    lines.append(f"L_scal = {fmt(an['L_scal'])}, l_scal = {fmt(an['l_scal'])}, Vol(S0) = {fmt(an['ambit_volume'])}")
    lines.append(f"mean field = {fmt(an['mean_field'])}, critical order = {fmt(an['critical_order'])}")
    lines.append("mu(n): " + ", ".join(f"{o['n']}:{fmt(o['mu'])}" for o in an["orders"]))
    sim = report.get("simulation")
    if sim is not None:
        lines.append("")
        lines.append(f"realisations: {sim['realizations']}")
        for f in sim["fits"]:
            if "slope" in f:
                lines.append(
                    f"  {f['quantity']}: slope {fmt(f['slope'])} +/- {fmt(f['slope_stderr'])} "
                    f"(r2 {fmt(f['r2'])}, {f['npoints']} points in [{fmt(f['lo'])}, {fmt(f['hi'])}])"
                )
            else:
                lines.append(f"  {f['quantity']}: fit failed: {f['error']}")
        for w in sim["warnings"]:
            lines.append(f"  warning: {w}")
    lines.append("")
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        lines.append(f"{status} {c['name']}: value {fmt(c['value'])}, target {fmt(c['target'])}, tol {fmt(c['tolerance'])}")
    lines.append("")
    lines.append("ALL CHECKS PASSED" if report["passed"] else "SOME CHECKS FAILED")
    return "\n".join(lines) + "\n"


def run_verify(cfg: RunConfig, threads: int = 1, analytic_only: bool = False) -> dict:
    """Analytic tables, optional simulation and estimation, and checks.

    Writes CSVs plus ``report.json`` / ``report.txt`` under ``cfg.out`` and
    returns the report. File paths in the report are relative to ``cfg.out``.
    """
    _require_valid(cfg, analytic_only)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    files: list = []
    checks: list = []
    report = {"schema": 1, "version": __version__, "config": _config_record(cfg)}
    report["analytic"] = _analytic_section(cfg, out, files, checks)
    if not analytic_only:
        report["simulation"] = _simulation_section(cfg, threads, out, files, checks)
    report["checks"] = checks
    report["passed"] = all(c["passed"] for c in checks)
    report["files"] = files
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n")
    (out / "report.txt").write_text(_render_text(report))
    return report


def cmd_verify(args) -> int:
    cfg = _config(args)
    report = run_verify(cfg, _threads(args), args.analytic_only)
    sys.stdout.write(_render_text(report))
    return EXIT_OK if report["passed"] else EXIT_CHECKS_FAILED


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--threads", type=int, help=f"worker threads (default ${ENV_PREFIX}THREADS or 1)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--dx", help="comma-separated spatial lags")
    grid.add_argument("--dt", help="comma-separated temporal lags")
    grid.add_argument("--points", type=int, help="log-spaced points per default decade")
    grid.add_argument("--quad-tol", type=float, default=1e-9, help="quadrature tolerance (default 1e-9)")

    parser = argparse.ArgumentParser(prog="ambitfield", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", parents=[common], help="tau(n1, n2) and mu(n) tables")
    p.add_argument("--max-order", type=int, help="largest order (default from config)")
    p.add_argument("--table", choices=("tau", "mu", "all"), default="all")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("volume", parents=[common, grid], help="overlap volume V(dx, dt)")
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("correlate", parents=[common, grid], help="analytic two-point correlator")
    p.add_argument("--orders", default="1,1", help="moment orders n1,n2 (default 1,1)")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("simulate", parents=[common], help="generate lattice realisations")
    p.add_argument("--no-store", action="store_true", help="print per-realisation summaries instead of storing fields")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="empirical correlators and coarse moments")
    p.add_argument("--fields", metavar="DIR", help="stored run from `simulate` (default: simulate in memory)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fit", parents=[common], help="power-law fit of two CSV columns")
    p.add_argument("csv", help="CSV with a lag column and a value column")
    p.add_argument("--x", help="lag column (default: first of lag, l, dt, dx)")
    p.add_argument("--y", help="value column (default: first of estimate, Mn, analytic, volume)")
    p.add_argument("--where", action="append", default=[], metavar="COL=VALUE", help="keep matching rows only")
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"), help="fit range for the lag")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("appendix", parents=[common], help="large-scale integral F_n(1, l_scal/l) and bound")
    p.add_argument("--samples", type=int, help="Monte Carlo samples per row")
    p.set_defaults(func=cmd_appendix)

    p = sub.add_parser("verify", parents=[common], help="end-to-end pipeline with pass/fail report")
    p.add_argument("--analytic-only", action="store_true", help="skip simulation and estimation")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ambitfield {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
