"""Independent reference computations used by the tests."""

import numpy as np


def raster_regions(boundary, points, n_rows=2000, n_cols=2000):
    """Area covered by exactly each subset of ambits, by rasterisation.

    Rows are midpoints of time slabs; each structural piece of the boundary
    gets rows in proportion to the square root of its length (at least 8),
    so thin pieces are resolved. Each row is split into ``n_cols`` cells
    spanning that row's union extent and every cell centre is classified.
    Returns an array indexed by bitmask (bit ``k`` for ``points[k]``).
    """
    T = boundary.T
    bps = sorted({t - T + b for _, t in points for b in boundary.breakpoints})
    pieces = list(zip(bps[:-1], bps[1:]))
    weight = np.sqrt([max(b - a, 0.0) for a, b in pieces])
    rows = np.maximum(8, np.round(n_rows * weight / weight.sum())).astype(int)
    out = np.zeros(1 << len(points))
    for (a, b), m in zip(pieces, rows):
        h = (b - a) / m
        for tau in a + (np.arange(m) + 0.5) * h:
            live = [(k, x, boundary.g(tau - t + T)) for k, (x, t) in enumerate(points) if t - T <= tau <= t]
            live = [(k, x, w) for k, x, w in live if w > 0]
            if not live:
                continue
            x0 = min(x - w for _, x, w in live)
            x1 = max(x + w for _, x, w in live)
            dx = (x1 - x0) / n_cols
            xs = x0 + (np.arange(n_cols) + 0.5) * dx
            mask = np.zeros(n_cols, dtype=np.int64)
            for k, x, w in live:
                mask |= (np.abs(xs - x) <= w).astype(np.int64) << k
            out += np.bincount(mask, minlength=out.size) * dx * h
    return out


def overlap_by_slices(boundary, dx, dt, n=200_000):
    """``V(dx, dt)`` by a fine midpoint rule over the time axis."""
    T = boundary.T
    if dt >= T:
        return 0.0
    h = (T - dt) / n
    s = dt + (np.arange(n) + 0.5) * h
    a = boundary.g_array(s)
    b = boundary.g_array(s - dt)
    length = np.clip(np.minimum(2 * a, np.minimum(2 * b, a + b - abs(dx))), 0.0, None)
    return float(length.sum() * h)
