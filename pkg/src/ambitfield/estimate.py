"""Empirical correlators, coarse-grained moments and log-log power-law fits.

Accumulators keep one summary value per realisation and combine them with
exactly rounded sums, so results do not depend on the order in which
realisations (or merged partitions) arrive. Standard errors come from the
spread between realisations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .simulate import FieldRealization

SPATIAL = "spatial"
TEMPORAL = "temporal"

_DIAG_SAMPLE = 1 << 16


class FiniteSampleWarning(UserWarning):
    """A handful of extreme samples dominate a moment estimate."""


class EstimateRow(NamedTuple):
    lag: float
    estimate: float
    stderr: float


class MomentRow(NamedTuple):
    l: float
    n: int
    Mn: float
    stderr: float


def _check_axis(axis: str) -> str:
    if axis not in (SPATIAL, TEMPORAL):
        raise ValueError(f"axis must be {SPATIAL!r} or {TEMPORAL!r}, got {axis!r}")
    return axis


def _to_cells(value: float, spacing: float, what: str) -> int:
    cells = value / spacing
    k = int(round(cells))
    if abs(cells - k) > 1e-6 * max(1.0, abs(cells)):
        raise ValueError(f"{what} {value} is not an integer multiple of the lattice spacing {spacing}")
    return k


def _subsample(samples: np.ndarray) -> np.ndarray:
    flat = samples.ravel()
    if flat.size > _DIAG_SAMPLE:
        flat = flat[:: flat.size // _DIAG_SAMPLE]
    return flat


def _top_share(samples: np.ndarray, fraction: float = 0.01) -> float:
    """Share of the sum carried by the largest ``fraction`` of samples."""
    flat = _subsample(samples)
    total = flat.sum()
    if not total > 0:
        return 0.0
    k = max(1, int(fraction * flat.size))
    top = np.partition(flat, flat.size - k)[flat.size - k :]
    return float(top.sum() / total)


def _mean_and_stderr(values: Sequence[float]):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, float("nan")
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass
class _PerRealization:
    """Per-realisation summaries keyed by realisation index."""

    keys: tuple
    values: dict = field(default_factory=dict)
    top_share: float = 0.0

    def add(self, index: int, row: Sequence[float]):
        if index in self.values:
            raise ValueError(f"realisation {index} accumulated twice")
        self.values[index] = tuple(row)

    def merge(self, other: "_PerRealization"):
        if other.keys != self.keys:
            raise ValueError("cannot merge accumulators with different keys")
        for index, row in other.values.items():
            self.add(index, row)
        self.top_share = max(self.top_share, other.top_share)
        return self

    def ordered(self) -> list:
        return [self.values[i] for i in sorted(self.values)]

    def summary(self):
        if len(self.values) < 2:
            raise ValueError(f"need at least 2 realisations for standard errors, got {len(self.values)}")
        ordered = self.ordered()
        return [_mean_and_stderr([row[k] for row in ordered]) for k in range(len(self.keys))]


class TwoPointAccumulator:
    """Streaming estimate of ``<eps^n1(p) eps^n2(p + lag)>`` along one axis.

    Spatial pairs wrap periodically; temporal pairs stay inside the
    retained slices.
    """

    def __init__(self, axis: str, lags: Sequence[float], orders=(1, 1), diagnostics: bool = True):
        if not len(lags):
            raise ValueError("empty lag set")
        self.axis = _check_axis(axis)
        self.lags = tuple(float(l) for l in lags)
        self.orders = tuple(int(n) for n in orders)
        self.diagnostics = diagnostics
        self._acc = _PerRealization(self.lags)

    def update(self, real: FieldRealization):
        spacing = real.lattice.dx if self.axis == SPATIAL else real.lattice.dt
        eps = real.values
        n1, n2 = self.orders
        a = eps if n1 == 1 else _power(eps, n1)
        b = eps if n2 == 1 else _power(eps, n2)
        row = []
        for lag in self.lags:
            k = _to_cells(lag, spacing, "lag")
            if self.axis == SPATIAL:
                if not 0 <= k < eps.shape[1]:
                    raise ValueError(f"spatial lag {lag} outside grid of {eps.shape[1]} cells")
                prod = np.empty_like(a)
                np.multiply(a[:, : a.shape[1] - k], b[:, k:], out=prod[:, : a.shape[1] - k])
                np.multiply(a[:, a.shape[1] - k :], b[:, :k], out=prod[:, a.shape[1] - k :])
            else:
                if not 0 <= k < eps.shape[0]:
                    raise ValueError(f"temporal lag {lag} outside {eps.shape[0]} retained slices")
                prod = a[: eps.shape[0] - k] * b[k:]
            row.append(float(prod.mean()))
            if self.diagnostics:
                self._acc.top_share = max(self._acc.top_share, _top_share(prod))
        self._acc.add(real.index, row)
        return self

    def merge(self, other: "TwoPointAccumulator"):
        self._acc.merge(other._acc)
        return self

    def per_realization(self) -> list:
        """One row of raw estimates per realisation, in index order."""
        return self._acc.ordered()

    @property
    def heavy_tailed(self) -> bool:
        return self._acc.top_share > 0.5

    def result(self) -> list:
        if self.heavy_tailed:
            warnings.warn(
                f"top 1% of samples carry {self._acc.top_share:.0%} of a two-point estimate",
                FiniteSampleWarning,
                stacklevel=2,
            )
        return [EstimateRow(lag, m, se) for lag, (m, se) in zip(self.lags, self._acc.summary())]


def _prefix(eps: np.ndarray, axis: str, pad: int = 0) -> np.ndarray:
    """Cumulative sums along ``axis`` with a leading zero; spatial sums wrap by ``pad`` cells."""
    if axis == SPATIAL:
        nt, nx = eps.shape
        c = np.zeros((nt, nx + pad + 1))
        np.cumsum(eps, axis=1, out=c[:, 1 : nx + 1])
        if pad:
            c[:, nx + 1 :] = c[:, nx : nx + 1] + c[:, 1 : pad + 1]
        return c
    c = np.zeros((eps.shape[0] + 1, eps.shape[1]))
    np.cumsum(eps, axis=0, out=c[1:])
    return c


class MeanAccumulator:
    """Streaming estimate of ``<eps>`` from per-realisation field means."""

    def __init__(self):
        self._acc = _PerRealization(("mean",))

    def update(self, real: FieldRealization):
        self._acc.add(real.index, [float(real.values.mean())])
        return self

    def merge(self, other: "MeanAccumulator"):
        self._acc.merge(other._acc)
        return self

    def result(self):
        """``(mean, stderr)``."""
        return self._acc.summary()[0]


def _window_means(eps: np.ndarray, w: int, axis: str, prefix: np.ndarray | None = None) -> np.ndarray:
    if prefix is None:
        prefix = _prefix(eps, axis, w - 1)
    if axis == SPATIAL:
        nx = eps.shape[1]
        out = prefix[:, w : w + nx] - prefix[:, :nx]
    else:
        out = prefix[w:] - prefix[:-w]
    out /= w
    return out


def _power(x: np.ndarray, n: int) -> np.ndarray:
    out = x.copy()
    for _ in range(n - 1):
        out *= x
    return out


def _power_mean(flat: np.ndarray, n: int, powers: dict) -> float:
    # Mean of flat**n, reusing cached lower powers and one dot product.
    half = n // 2
    if half not in powers:
        powers[half] = _power(flat, half)
    if n == 1:
        return float(flat.mean())
    other = powers[half] if n % 2 == 0 else None
    if other is None:
        if half + 1 not in powers:
            powers[half + 1] = powers[half] * flat
        other = powers[half + 1]
    return float(np.dot(powers[half], other)) / flat.size


class CoarseMomentAccumulator:
    """Streaming estimate of ``M_n(l) = <(window mean of eps over length l)^n>``.

    Window means are midpoint Riemann sums of the lattice field; spatial
    windows wrap periodically, temporal windows stay inside the retained
    slices. Several orders share one pass over each window size.
    """

    def __init__(self, axis: str, orders, window_sizes: Sequence[float], diagnostics: bool = True):
        if not len(window_sizes):
            raise ValueError("empty window set")
        self.axis = _check_axis(axis)
        self.orders = (int(orders),) if np.ndim(orders) == 0 else tuple(int(n) for n in orders)
        if not self.orders or min(self.orders) < 1:
            raise ValueError(f"moment orders must be positive, got {orders!r}")
        self.window_sizes = tuple(float(l) for l in window_sizes)
        self.diagnostics = diagnostics
        self._acc = _PerRealization(tuple((l, n) for l in self.window_sizes for n in self.orders))

    def update(self, real: FieldRealization):
        spacing = real.lattice.dx if self.axis == SPATIAL else real.lattice.dt
        extent = real.values.shape[1] if self.axis == SPATIAL else real.values.shape[0]
        cells = []
        for l in self.window_sizes:
            w = _to_cells(l, spacing, "window size")
            if w < 2:
                raise ValueError(f"window {l} spans fewer than 2 cells")
            if w > extent:
                raise ValueError(f"window {l} exceeds the grid ({extent} cells)")
            cells.append(w)
        pad = max(cells) - 1 if self.axis == SPATIAL else 0
        prefix = _prefix(real.values, self.axis, pad)
        row = []
        for w in cells:
            means = _window_means(real.values, w, self.axis, prefix)
            flat = means.ravel()
            powers = {1: flat}
            for n in self.orders:
                row.append(_power_mean(flat, n, powers))
                if self.diagnostics and n > 1:
                    self._acc.top_share = max(self._acc.top_share, _top_share(_power(_subsample(flat), n)))
        self._acc.add(real.index, row)
        return self

    def merge(self, other: "CoarseMomentAccumulator"):
        self._acc.merge(other._acc)
        return self

    def per_realization(self) -> list:
        """One row of raw estimates per realisation, in index order."""
        return self._acc.ordered()

    @property
    def heavy_tailed(self) -> bool:
        return self._acc.top_share > 0.5

    def result(self) -> list:
        """``MomentRow`` per (window, order), windows outermost."""
        if self.heavy_tailed:
            warnings.warn(
                f"top 1% of samples carry {self._acc.top_share:.0%} of a coarse moment",
                FiniteSampleWarning,
                stacklevel=2,
            )
        return [MomentRow(l, n, m, se) for (l, n), (m, se) in zip(self._acc.keys, self._acc.summary())]


def empirical_two_point(
    fields: Iterable[FieldRealization], axis: str, lags: Sequence[float], orders=(1, 1)
) -> list:
    """Average ``eps^n1(p) eps^n2(p + lag)`` over points and realisations.

    Returns ``EstimateRow(lag, estimate, stderr)`` per lag.
    """
    acc = TwoPointAccumulator(axis, lags, orders)
    for real in fields:
        acc.update(real)
    return acc.result()


def coarse_moments(fields: Iterable[FieldRealization], axis: str, n: int, window_sizes: Sequence[float]) -> list:
    """Order-``n`` moments of the window-averaged field; ``MomentRow`` per window."""
    acc = CoarseMomentAccumulator(axis, n, window_sizes)
    for real in fields:
        acc.update(real)
    return acc.result()


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float
    lo: float
    hi: float
    npoints: int

    def predict(self, lag):
        return np.exp(self.intercept) * np.asarray(lag, dtype=float) ** self.slope


def in_range(value: float, lo: float, hi: float, rel: float = 1e-9) -> bool:
    """``lo <= value <= hi`` up to a relative rounding slack (``3 * 0.2 > 0.6``)."""
    return lo - rel * abs(lo) <= value <= hi + rel * abs(hi)


def fit_powerlaw(points: Sequence, range: tuple | None = None) -> PowerLawFit:
    """Least-squares line through ``(ln lag, ln value)`` for lags inside ``range``.

    Raises ``ValueError`` with the offending index for nonpositive lags or
    values, and when fewer than five points fall in range.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    lo, hi = range if range is not None else (-math.inf, math.inf)
    chosen = []
    for i, (lag, val) in enumerate(pts):
        if not in_range(lag, lo, hi):
            continue
        if not lag > 0:
            raise ValueError(f"point {i}: lag {lag} is not positive, log undefined")
        if not val > 0:
            raise ValueError(f"point {i}: value {val} is not positive, log undefined")
        chosen.append((lag, val))
    if len(chosen) < 5:
        raise ValueError(f"need at least 5 points in range, got {len(chosen)}")
    x = np.log([c[0] for c in chosen])
    y = np.log([c[1] for c in chosen])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise ValueError("all lags identical; slope undefined")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    syy = float((y - y.mean()) @ (y - y.mean()))
    r2 = 1.0 if syy == 0 else max(0.0, 1.0 - float(resid @ resid) / syy)
    lags = [c[0] for c in chosen]
    return PowerLawFit(slope, intercept, r2, min(lags), max(lags), len(chosen))
