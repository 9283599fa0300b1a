"""Run configuration: a versioned TOML document with nested tables.

Example::

    schema = 1
    seed = 2024

    [basis]
    kind = "gaussian"
    a = 0.0
    b = 1.0

    [scaling]
    tau2 = 0.2
    t_scal = 0.01
    T_scal = 1.0
    T = 1.2

    [lattice]
    dx = 0.01
    dt = 0.01
    nx = 10000
    nt = 1000
    realizations = 50

Any scalar can be overridden from the environment as
``AMBITFIELD_<SECTION>__<KEY>`` (or ``AMBITFIELD_<KEY>`` for top-level
keys); the value is parsed as a TOML literal.
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .ambit import AmbitBoundary, build_boundary
from .correlators import check_multifractal_condition
from .estimate import in_range
from .levy import CumulantDomainError, LevyBasisSpec, basis_from_dict, cumulant
from .simulate import LatticeConfig

SCHEMA_VERSION = 1
ENV_PREFIX = "AMBITFIELD_"

DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "seed": 2024,
    "out": "ambitfield-out",
    "basis": {"kind": "gaussian", "a": 0.0, "b": 1.0},
    "scaling": {"tau2": 0.2, "t_scal": 0.01, "T_scal": 1.0, "T": 1.2},
    "lattice": {"dx": 0.01, "dt": 0.01, "nx": 10000, "nt": 1000, "realizations": 50},
    "estimate": {
        "two_point_orders": [[1, 1]],
        "n_lags": 12,
        "temporal_lags": [],
        "temporal_fit_range": [],
        "moment_orders": [1, 2, 3],
        "moment_axes": ["spatial"],
        "n_windows": 10,
        "spatial_windows": [],
        "temporal_windows": [],
        "spatial_fit_range": [],
        "temporal_moment_fit_range": [],
    },
    "checks": {"two_point_slope_tol": 0.15, "moment_slope_tol": 0.20, "mean_sigmas": 3.0},
    "analytic": {
        "max_order": 6,
        "n_grid": 50,
        "appendix_orders": [2, 3, 4],
        "appendix_ratios": [10.0, 100.0, 1000.0],
        "appendix_samples": 200000,
    },
}


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_literal(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out: dict = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX) :].lower().split("__")
        if path[0] in ("threads", "config"):
            continue
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = _parse_literal(raw)
    return out


def load_document(path: Optional[str] = None, environ=None) -> dict:
    """Defaults, then the TOML file, then environment overrides."""
    doc = copy.deepcopy(DEFAULTS)
    layers = []
    if path is not None:
        with open(path, "rb") as fh:
            layers.append(tomllib.load(fh))
    layers.append(env_overrides(environ))
    for layer in layers:
        basis = layer.get("basis", {})
        if "kind" in basis and basis["kind"] != doc["basis"].get("kind"):
            # A new basis kind starts from an empty parameter table.
            doc["basis"] = {}
        doc = _merge(doc, layer)
    return doc


def _cell_grid(lo: float, hi: float, spacing: float, count: int, min_cells: int = 1) -> list:
    """Up to ``count`` log-spaced multiples of ``spacing`` in ``[lo, hi]``."""
    a = max(min_cells, int(math.ceil(lo / spacing - 1e-9)))
    b = int(math.floor(hi / spacing + 1e-9))
    if b < a:
        return []
    cells = np.unique(np.round(np.geomspace(a, b, count)).astype(int))
    return [float(c * spacing) for c in cells]


def _count_in(values, bounds) -> int:
    return sum(1 for v in values if in_range(v, *bounds))


@dataclass
class EstimationPlan:
    two_point_orders: list
    temporal_lags: list
    temporal_fit_range: tuple
    moment_orders: list
    moment_axes: list
    spatial_windows: list
    temporal_windows: list
    spatial_fit_range: tuple
    temporal_moment_fit_range: tuple

    def windows(self, axis: str):
        """``(window sizes, fit range)`` for coarse moments along ``axis``."""
        if axis == "spatial":
            return self.spatial_windows, self.spatial_fit_range
        return self.temporal_windows, self.temporal_moment_fit_range


@dataclass
class RunConfig:
    basis: LevyBasisSpec
    scaling: dict
    lattice: LatticeConfig
    plan: EstimationPlan
    out: Path
    seed: int
    checks: dict = field(default_factory=dict)
    analytic: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)

    def boundary(self) -> AmbitBoundary:
        s = self.scaling
        return build_boundary(s["tau2"], self.basis, s["t_scal"], s["T_scal"], s.get("T"))

    def validate(self, analytic_only: bool = False) -> list:
        """Every cross-field problem, not just the first."""
        problems = []
        try:
            boundary = self.boundary()
        except ValueError as exc:
            return [f"scaling: {exc}"]
        tau2 = self.scaling["tau2"]
        for n in self.plan.moment_orders:
            try:
                cumulant(self.basis, n)
            except CumulantDomainError as exc:
                problems.append(f"moment order {n}: moment does not exist ({exc.bound} violated)")
                continue
            if n >= 2 and not check_multifractal_condition(self.basis, tau2, n):
                problems.append(f"moment order {n}: multifractality condition mu(n) - mu(n-1) < 1 fails")
        for n1, n2 in self.plan.two_point_orders:
            try:
                cumulant(self.basis, n1 + n2)
            except CumulantDomainError as exc:
                problems.append(f"two-point orders ({n1},{n2}): moment does not exist ({exc.bound} violated)")
        if analytic_only:
            return problems
        lat = self.lattice
        max_lag = max(self.plan.spatial_windows, default=0.0)
        problems.extend(f"lattice: {p}" for p in lat.validate(boundary, max_lag))
        if not self.plan.temporal_lags:
            problems.append("estimate: no temporal lags fall inside the lattice and fit range")
        if any(l >= lat.nt * lat.dt for l in self.plan.temporal_lags):
            problems.append("estimate: temporal lags exceed the retained slices")
        if any(w > lat.nt * lat.dt for w in self.plan.temporal_windows):
            problems.append("estimate: temporal windows exceed the retained slices")
        if _count_in(self.plan.temporal_lags, self.plan.temporal_fit_range) < 5:
            problems.append("estimate: fewer than 5 temporal lags inside the temporal fit range")
        for axis in self.plan.moment_axes:
            if axis not in ("spatial", "temporal"):
                problems.append(f"estimate: unknown moment axis {axis!r}")
                continue
            windows, fit_range = self.plan.windows(axis)
            if _count_in(windows, fit_range) < 5:
                problems.append(f"estimate: fewer than 5 {axis} windows inside the {axis} fit range")
        if lat.realizations < 2:
            problems.append("lattice: at least 2 realizations are needed for standard errors")
        return problems


def run_config(doc: dict, seed: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    """Resolve a document into a :class:`RunConfig`, deriving default lags and windows."""
    if doc.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported config schema {doc.get('schema')!r}; expected {SCHEMA_VERSION}")
    seed = int(doc["seed"] if seed is None else seed)
    basis = basis_from_dict(doc["basis"])
    scaling = {k: float(v) for k, v in doc["scaling"].items()}
    lat_doc = dict(doc["lattice"])
    lattice = LatticeConfig(
        dx=float(lat_doc["dx"]),
        dt=float(lat_doc["dt"]),
        nx=int(lat_doc["nx"]),
        nt=int(lat_doc["nt"]),
        burn_in_depth=lat_doc.get("burn_in_depth"),
        seed=seed,
        realizations=int(lat_doc["realizations"]),
    )
    est = doc["estimate"]
    tau2, t_scal, T_scal = scaling["tau2"], scaling["t_scal"], scaling["T_scal"]
    kappa = cumulant(basis, 2.0) - 2 * cumulant(basis, 1.0)
    L_scal, l_scal = tau2 / (kappa * t_scal), tau2 / (kappa * T_scal)

    t_range = tuple(est["temporal_fit_range"]) or (3 * t_scal, T_scal / 3)
    s_range = tuple(est["spatial_fit_range"]) or (3 * l_scal, L_scal / 3)
    tm_range = tuple(est["temporal_moment_fit_range"]) or t_range
    span_t = lattice.nt * lattice.dt
    lags = [float(x) for x in est["temporal_lags"]] or _cell_grid(
        t_range[0], min(t_range[1], span_t / 2), lattice.dt, int(est["n_lags"])
    )
    swin = [float(x) for x in est["spatial_windows"]] or _cell_grid(
        s_range[0], s_range[1], lattice.dx, int(est["n_windows"]), min_cells=2
    )
    twin = [float(x) for x in est["temporal_windows"]] or _cell_grid(
        tm_range[0], min(tm_range[1], span_t / 2), lattice.dt, int(est["n_windows"]), min_cells=2
    )
    plan = EstimationPlan(
        two_point_orders=[tuple(int(n) for n in o) for o in est["two_point_orders"]],
        temporal_lags=lags,
        temporal_fit_range=t_range,
        moment_orders=[int(n) for n in est["moment_orders"]],
        moment_axes=list(est["moment_axes"]),
        spatial_windows=swin,
        temporal_windows=twin,
        spatial_fit_range=s_range,
        temporal_moment_fit_range=tm_range,
    )
    return RunConfig(
        basis=basis,
        scaling=scaling,
        lattice=lattice,
        plan=plan,
        out=Path(out if out is not None else doc["out"]),
        seed=seed,
        checks=dict(doc["checks"]),
        analytic=dict(doc["analytic"]),
        document=doc,
    )
