"""Causal ambit sets built from a prescribed two-point scaling exponent.

The ambit set attached to ``(x, t)`` is ``(x, t) + S0`` with

    S0 = {(x', t') : -T <= t' <= 0, |x'| <= g(t' + T)}

so the half-width ``g(s)`` is largest at the deep past (``s = 0``) and
closes to a point at the observation time (``g(T) = 0``). Inside the
temporal scaling range the boundary is the hyperbola
``g(s) = tau2 / (2 kappa s)`` with ``kappa = K[2] - 2 K[1]``; below
``t_scal`` it is held flat and above ``T_scal`` it tapers linearly to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .levy import LevyBasisSpec, cumulant_gap
from .quadrature import integrate_pieces

DEFAULT_QUAD_TOL = 1e-8
DEFAULT_T_FACTOR = 1.2


@dataclass(frozen=True)
class ScalingSpec:
    tau2: float
    t_scal: float
    T_scal: float
    T: float
    kappa: float

    def __post_init__(self):
        for name in ("tau2", "t_scal", "T_scal", "T", "kappa"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not self.t_scal < self.T_scal:
            raise ValueError(f"empty scaling range: need t_scal < T_scal, got {self.t_scal} >= {self.T_scal}")
        if not self.T_scal < self.T:
            raise ValueError(
                f"need T_scal < T so the boundary can close continuously, got T_scal={self.T_scal}, T={self.T}"
            )

    @property
    def L_scal(self) -> float:
        return self.tau2 / (self.kappa * self.t_scal)

    @property
    def l_scal(self) -> float:
        return self.tau2 / (self.kappa * self.T_scal)


@dataclass(frozen=True)
class AmbitBoundary:
    """Half-width function ``g`` on ``[0, T]`` for a given :class:`ScalingSpec`."""

    spec: ScalingSpec

    @property
    def T(self) -> float:
        return self.spec.T

    @property
    def L(self) -> float:
        """Decorrelation length ``2 g(0)``."""
        return 2.0 * self.g(0.0)

    @property
    def breakpoints(self) -> tuple:
        sp = self.spec
        return (0.0, sp.t_scal, sp.T_scal, sp.T)

    def g(self, s: float) -> float:
        """Scalar half-width; 0 outside ``[0, T]``."""
        sp = self.spec
        if s < 0.0 or s >= sp.T:
            return 0.0
        if s <= sp.t_scal:
            return 0.5 * sp.L_scal
        if s <= sp.T_scal:
            return sp.tau2 / (2.0 * sp.kappa * s)
        return 0.5 * sp.l_scal * (sp.T - s) / (sp.T - sp.T_scal)

    def g_array(self, s) -> np.ndarray:
        sp = self.spec
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            hyper = sp.tau2 / (2.0 * sp.kappa * np.where(s > 0, s, 1.0))
        out = np.where(
            s <= sp.t_scal,
            0.5 * sp.L_scal,
            np.where(s <= sp.T_scal, hyper, 0.5 * sp.l_scal * (sp.T - s) / (sp.T - sp.T_scal)),
        )
        return np.where((s < 0) | (s >= sp.T), 0.0, out)

    @cached_property
    def volume(self) -> float:
        """Closed-form ``Vol(S0)`` of the piecewise boundary."""
        sp = self.spec
        return (
            sp.t_scal * sp.L_scal
            + (sp.tau2 / sp.kappa) * math.log(sp.T_scal / sp.t_scal)
            + 0.5 * (sp.T - sp.T_scal) * sp.l_scal
        )


def build_boundary(
    tau2: float, basis: LevyBasisSpec, t_scal: float, T_scal: float, T: float | None = None
) -> AmbitBoundary:
    """Construct the ambit boundary whose overlap volume yields ``dt**-tau2`` scaling.

    ``T`` defaults to ``1.2 * T_scal``. Raises ``ValueError`` for an empty or
    misordered scaling range and for bases with ``K[2] - 2K[1] <= 0``.
    """
    kappa = cumulant_gap(basis, 1.0, 1.0)
    if not kappa > 0:
        raise ValueError(f"degenerate basis: K[2] - 2K[1] = {kappa} must be positive")
    if T is None:
        T = DEFAULT_T_FACTOR * T_scal
    return AmbitBoundary(ScalingSpec(float(tau2), float(t_scal), float(T_scal), float(T), kappa))


def half_width(boundary: AmbitBoundary, s: float) -> float:
    return boundary.g(float(s))


def _smooth_roots(fun, pieces, samples: int = 24) -> list:
    """Roots of ``fun`` located by sign changes on a sample grid per piece."""
    roots = []
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        if hi - lo <= 0:
            continue
        grid = np.linspace(lo, hi, samples)
        vals = [fun(x) for x in grid]
        for k in range(samples - 1):
            if vals[k] == 0.0:
                roots.append(grid[k])
            elif vals[k] * vals[k + 1] < 0:
                roots.append(brentq(fun, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots


def overlap_volume(boundary: AmbitBoundary, dx: float, dt: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """Area ``V(dx, dt)`` of ``S(0, 0) ∩ S(dx, dt)``.

    On the slice at ``s`` (measured from the bottom of the earlier ambit) the
    earlier set has half-width ``a = g(s)`` and the later one ``b = g(s - dt)
    >= a``; the intersection length is ``max(0, min(2a, a + b - |dx|))``.
    """
    dx, dt = abs(float(dx)), abs(float(dt))
    g = boundary.g
    T = boundary.T
    if dt >= T or dx >= g(dt) + g(0.0):
        return 0.0

    def length(s):
        a = g(s)
        return max(0.0, min(2.0 * a, a + g(s - dt) - dx))

    pts = {dt, T}
    for b in boundary.breakpoints[1:-1]:
        for p in (b, b + dt):
            if dt < p < T:
                pts.add(p)
    pieces = sorted(pts)
    if dx > 0:
        pts.update(_smooth_roots(lambda s: g(s) + g(s - dt) - dx, pieces))
        if dt > 0:
            pts.update(_smooth_roots(lambda s: g(s - dt) - g(s) - dx, pieces))
    value, _ = integrate_pieces(length, sorted(pts), quad_tol)
    return float(value)


@dataclass(frozen=True)
class MultiplicityProfile:
    """Area covered with each total coverage weight.

    ``entries`` is a sorted tuple of ``(weight, area)``; ``regions`` maps the
    bitmask of covering ambits (bit ``i`` for point ``i`` after merging
    coincident points) to the area covered by exactly that subset.
    """

    entries: tuple
    regions: dict = field(default_factory=dict)
    orders: tuple = ()

    @property
    def total_area(self) -> float:
        return sum(area for _, area in self.entries)

    def as_dict(self) -> dict:
        return dict(self.entries)


def _merge_points(points, orders):
    merged: dict = {}
    for (x, t), n in zip(points, orders):
        key = (float(x), float(t))
        merged[key] = merged.get(key, 0) + n
    return list(merged.keys()), list(merged.values())


@dataclass(frozen=True)
class AmbitRegion:
    """One translated ambit set ``(x, t) + S0``."""

    boundary: AmbitBoundary
    x: float
    t: float

    def interval(self, tau: float):
        """``(lo, hi)`` extent at absolute time ``tau``, or ``None`` if empty."""
        if tau > self.t or tau < self.t - self.boundary.T:
            return None
        w = self.boundary.g(tau - self.t + self.boundary.T)
        if w <= 0.0:
            return None
        return self.x - w, self.x + w

    def time_breakpoints(self) -> list:
        base = self.t - self.boundary.T
        return [base + b for b in self.boundary.breakpoints]


def _sweep_breakpoints(regions: Sequence[AmbitRegion]) -> list:
    """Times at which the piecewise slice structure of the union can change."""
    pts = sorted({p for r in regions for p in r.time_breakpoints()})
    extra = []
    for i, ri in enumerate(regions):
        for rj in regions[i + 1 :]:
            gi, gj = ri.boundary.g, rj.boundary.g
            si, sj = ri.t - ri.boundary.T, rj.t - rj.boundary.T
            lo, hi = max(ri.t - ri.boundary.T, rj.t - rj.boundary.T), min(ri.t, rj.t)
            if lo >= hi:
                continue
            sub = [lo] + [p for p in pts if lo < p < hi] + [hi]
            for si_sign in (-1.0, 1.0):
                for sj_sign in (-1.0, 1.0):

                    def diff(tau, si_sign=si_sign, sj_sign=sj_sign):
                        return (ri.x + si_sign * gi(tau - si)) - (rj.x + sj_sign * gj(tau - sj))

                    extra.extend(_smooth_roots(diff, sub, samples=12))
    return sorted(set(pts).union(extra))


def _slice_coverage(intervals, n_masks: int) -> np.ndarray:
    """Length covered by exactly each subset, given ``(lo, hi, bit)`` intervals."""
    out = np.zeros(n_masks)
    events = []
    for lo, hi, bit in intervals:
        events.append((lo, bit))
        events.append((hi, -bit))
    if not events:
        return out
    events.sort(key=lambda e: e[0])
    mask = 0
    prev = events[0][0]
    for pos, bit in events:
        if mask and pos > prev:
            out[mask] += pos - prev
        prev = pos
        if bit > 0:
            mask |= bit
        else:
            mask &= ~(-bit)
    return out


def multiplicity_profile(
    boundary: AmbitBoundary,
    points: Sequence,
    orders: Sequence[int],
    quad_tol: float = DEFAULT_QUAD_TOL,
) -> MultiplicityProfile:
    """Area covered with each coverage weight ``sum(orders[i] for covering i)``.

    Time is integrated by adaptive quadrature between structural breakpoints;
    each time slice is resolved exactly by sorting interval endpoints.
    Coincident points are merged by summing their orders.
    """
    if len(points) != len(orders) or not points:
        raise ValueError("points and orders must be non-empty and of equal length")
    if any(int(n) != n or n <= 0 for n in orders):
        raise ValueError(f"orders must be positive integers, got {orders!r}")
    pts, ords = _merge_points(points, [int(n) for n in orders])
    regions = [AmbitRegion(boundary, x, t) for x, t in pts]
    n_masks = 1 << len(regions)

    def integrand(tau):
        intervals = []
        for k, r in enumerate(regions):
            iv = r.interval(tau)
            if iv is not None:
                intervals.append((iv[0], iv[1], 1 << k))
        return _slice_coverage(intervals, n_masks)

    areas, _ = integrate_pieces(integrand, _sweep_breakpoints(regions), quad_tol)
    by_mask = {}
    by_weight: dict = {}
    for mask in range(1, n_masks):
        area = float(max(areas[mask], 0.0))
        if area == 0.0:
            continue
        by_mask[mask] = area
        w = sum(ords[k] for k in range(len(ords)) if mask >> k & 1)
        by_weight[w] = by_weight.get(w, 0.0) + area
    return MultiplicityProfile(tuple(sorted(by_weight.items())), by_mask, tuple(ords))


@dataclass(frozen=True)
class AmbitMask:
    """Lattice stencil of ``S0``: row ``j`` covers offsets ``-w_j..w_j``.

    Row ``j`` sits at time offset ``-(j + 1/2) dt`` behind the observation
    point; ``half_widths[j]`` is the number of cells on either side of the
    centre column whose centres lie inside ``S0``.
    """

    half_widths: np.ndarray
    dx: float
    dt: float

    @property
    def depth(self) -> int:
        return int(self.half_widths.size)

    @property
    def cell_count(self) -> int:
        return int(np.sum(2 * self.half_widths + 1))

    @property
    def area(self) -> float:
        return self.cell_count * self.dx * self.dt

    def offsets(self) -> np.ndarray:
        """All ``(i, j)`` offsets as an ``(n, 2)`` integer array."""
        rows = [
            np.column_stack([np.arange(-w, w + 1), np.full(2 * w + 1, j)])
            for j, w in enumerate(self.half_widths)
        ]
        if not rows:
            return np.zeros((0, 2), dtype=int)
        return np.vstack(rows).astype(int)


def ambit_mask(boundary: AmbitBoundary, dx: float, dt: float) -> AmbitMask:
    """Cells with centres ``(i dx, -(j + 1/2) dt)`` inside ``S0``."""
    if not (dx > 0 and dt > 0 and math.isfinite(dx) and math.isfinite(dt)):
        raise ValueError(f"lattice spacings must be positive, got dx={dx!r}, dt={dt!r}")
    T = boundary.T
    depth = int(math.floor(T / dt + 0.5))
    s = T - (np.arange(depth) + 0.5) * dt
    widths = np.floor(boundary.g_array(s) / dx * (1 + 1e-12)).astype(np.int64)
    return AmbitMask(widths, float(dx), float(dt))
