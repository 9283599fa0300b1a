"""Closed-form n-point correlators and scaling exponents of the ambit field.

With unit weights the n-point function is

    <eps(p_1)^m_1 ... eps(p_n)^m_n> = exp( sum_w A_w K[w] ),

where ``A_w`` is the area covered with total weight ``w`` (see
:func:`ambitfield.ambit.multiplicity_profile`). Exponents are expressed
through the normalised cumulant ratio ``tau2 / (K[2] - 2K[1])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ambit import (
    DEFAULT_QUAD_TOL,
    AmbitBoundary,
    AmbitRegion,
    _sweep_breakpoints,
    multiplicity_profile,
    overlap_volume,
)
from .levy import CumulantDomainError, LevyBasisSpec, cumulant, cumulant_gap
from .quadrature import QuadratureError, adaptive_simpson, integrate_pieces


def _scaled(basis: LevyBasisSpec, tau2: float, gap: float) -> float:
    """``tau2 * gap / kappa``, divided first so that ``gap == kappa`` gives ``tau2`` exactly."""
    kappa = cumulant_gap(basis, 1.0, 1.0)
    if not kappa > 0:
        raise ValueError(f"degenerate basis: K[2] - 2K[1] = {kappa}")
    return tau2 * (gap / kappa)


def log_mean_field(basis: LevyBasisSpec, boundary: AmbitBoundary) -> float:
    return cumulant(basis, 1.0) * overlap_volume(boundary, 0.0, 0.0)


def mean_field(basis: LevyBasisSpec, boundary: AmbitBoundary) -> float:
    """One-point mean ``<eps> = exp(K[1] Vol(S0))``."""
    return math.exp(log_mean_field(basis, boundary))


def log_two_point(basis, boundary, dx: float, dt: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    kappa = cumulant_gap(basis, 1.0, 1.0)
    return 2.0 * log_mean_field(basis, boundary) + kappa * overlap_volume(boundary, dx, dt, quad_tol)


def two_point(basis, boundary, dx: float, dt: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``<eps(x, t) eps(x + dx, t + dt)> = <eps>^2 exp(kappa V(dx, dt))``."""
    return math.exp(log_two_point(basis, boundary, dx, dt, quad_tol))


def log_n_point(basis, boundary, points, orders, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    profile = multiplicity_profile(boundary, points, orders, quad_tol)
    return math.fsum(area * cumulant(basis, w) for w, area in profile.entries)


def n_point(basis, boundary, points, orders, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """Mixed moment ``<prod_i eps(x_i, t_i)**orders[i]>``.

    Raises :class:`~ambitfield.levy.CumulantDomainError` when the total order
    exceeds the range where the basis has exponential moments.
    """
    return math.exp(log_n_point(basis, boundary, points, orders, quad_tol))


def n_point_weighted(
    basis: LevyBasisSpec,
    ambits: Sequence[AmbitRegion],
    weights: Sequence[Callable[[float, float], float]],
    quad_tol: float = 1e-9,
) -> float:
    """``exp( ∫ K[sum_i I_i(x, t) h_i(x, t)] dx dt )`` by nested adaptive quadrature.

    ``weights[i]`` is evaluated at absolute space-time coordinates of the
    integration point. Time is integrated between the structural
    breakpoints of the union, space between interval endpoints of each slice.
    """
    if len(ambits) != len(weights) or not ambits:
        raise ValueError("ambits and weights must be non-empty and of equal length")
    ambits = list(ambits)
    inner_tol = 1e-3 * quad_tol

    def slice_integral(tau):
        active = []
        for r, h in zip(ambits, weights):
            iv = r.interval(tau)
            if iv is not None:
                active.append((iv[0], iv[1], h))
        if not active:
            return 0.0
        edges = sorted({e for lo, hi, _ in active for e in (lo, hi)})
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (lo + hi)
            hs = [h for a, b, h in active if a <= mid <= b]
            if not hs:
                continue

            def k_of(x, hs=hs):
                return cumulant(basis, sum(h(x, tau) for h in hs))

            val, err = adaptive_simpson(k_of, lo, hi, inner_tol * (hi - lo))
            total += val
        return total

    try:
        value, err = integrate_pieces(slice_integral, _sweep_breakpoints(ambits), quad_tol)
    except QuadratureError as exc:
        raise QuadratureError(
            f"weighted n-point quadrature did not converge: {exc}", estimate=exc.estimate, error=exc.error
        ) from None
    return math.exp(value)


# --- exponents --------------------------------------------------------------


def tau_exponent(basis, tau2: float, n1: float, n2: float) -> float:
    """Two-point scaling exponent ``tau(n1, n2)``."""
    return _scaled(basis, tau2, cumulant_gap(basis, n1, n2))


def mu_exponent(basis, tau2: float, n: float) -> float:
    """Multifractal exponent ``mu(n) = tau2 (K[n] - n K[1]) / kappa``."""
    k1 = cumulant(basis, 1.0)
    # grouped like cumulant_gap so that mu(2) == tau(1, 1) bit for bit
    return _scaled(basis, tau2, (cumulant(basis, n) - k1) - (n - 1) * k1)


def xi_exponent(basis, tau2: float, orders: Sequence[int]) -> float:
    """Nested-gap exponent for the ordered run ``orders = (m_{l-j}, ..., m_l)``.

    ``xi = tau(m_{l-j} + ... + m_{l-1}, m_l) - tau(m_{l-j+1} + ... + m_{l-1}, m_l)``;
    for two orders this is ``tau(m_1, m_2)``.
    """
    orders = tuple(orders)
    if len(orders) < 2:
        raise ValueError("xi needs at least two orders")
    last = orders[-1]
    return tau_exponent(basis, tau2, sum(orders[:-1]), last) - tau_exponent(
        basis, tau2, sum(orders[1:-1]), last
    )


def h_increment(basis, tau2: float, k: int) -> float:
    """``h(k) = -sum_{j=1}^{k-1} xi_{j+1}`` with ``xi_{j+1} = xi(1, ..., 1)`` over j+1 ones.

    ``h(1) = 0`` (empty sum). Telescopes to ``mu(k-1) - mu(k)``.
    """
    if k < 1:
        raise ValueError(f"h(k) is defined for k >= 1, got {k}")
    return -math.fsum(xi_exponent(basis, tau2, (1,) * (j + 1)) for j in range(1, k))


def multifractal_increment(basis, tau2: float, n: int) -> float:
    """``mu(n) - mu(n-1)`` evaluated as ``tau2 (K[n] - K[n-1] - K[1]) / kappa``."""
    if n <= 1:
        return 0.0
    return _scaled(basis, tau2, cumulant(basis, n) - cumulant(basis, n - 1) - cumulant(basis, 1.0))


def check_multifractal_condition(basis, tau2: float, n: int):
    """Whether ``mu(n) - mu(n-1) < 1``.

    Returns ``None`` when the n-th moment does not exist (cumulant domain
    violation), i.e. the condition is undefined.
    """
    try:
        return multifractal_increment(basis, tau2, n) < 1.0
    except CumulantDomainError:
        return None


def critical_order(basis, tau2: float, n_max: int = 64):
    """Smallest order where the condition fails or the moment ceases to exist."""
    for n in range(2, n_max + 1):
        if not check_multifractal_condition(basis, tau2, n):
            return n
    return None


def fusion_prediction(orders: Sequence[int], basis, tau2: float) -> dict:
    """Power-law exponents of an ordered purely spatial or temporal n-point function.

    Keys are index pairs ``(i, k)`` (``i < k``, zero based) labelling the
    distance ``|p_k - p_i|``; values are the exponents, so that
    ``c_n ∝ prod d_ik ** value``. Adjacent pairs get ``-tau(m_i, m_{i+1})``,
    pairs ``j >= 2`` apart get ``-xi(m_i, ..., m_k)``.
    """
    orders = tuple(int(m) for m in orders)
    n = len(orders)
    out = {}
    for i in range(n - 1):
        out[(i, i + 1)] = -tau_exponent(basis, tau2, orders[i], orders[i + 1])
    for j in range(2, n):
        for l in range(j, n):
            out[(l - j, l)] = -xi_exponent(basis, tau2, orders[l - j : l + 1])
    return out


@dataclass
class ExponentTable:
    tau2: float
    tau: dict = field(default_factory=dict)
    xi: dict = field(default_factory=dict)
    mu: dict = field(default_factory=dict)
    h: dict = field(default_factory=dict)
    condition: dict = field(default_factory=dict)


def exponent_table(basis, tau2: float, max_order: int = 6, xi_orders: Sequence[tuple] = ()) -> ExponentTable:
    """Tabulate exponents up to ``max_order``; orders past the domain are skipped (condition ``None``)."""
    table = ExponentTable(tau2)
    for n1 in range(1, max_order + 1):
        for n2 in range(1, max_order + 1):
            try:
                table.tau[(n1, n2)] = tau_exponent(basis, tau2, n1, n2)
            except CumulantDomainError:
                pass
    for n in range(1, max_order + 1):
        table.condition[n] = check_multifractal_condition(basis, tau2, n)
        try:
            table.mu[n] = mu_exponent(basis, tau2, n)
            table.h[n] = h_increment(basis, tau2, n)
        except CumulantDomainError:
            pass
    for orders in xi_orders:
        table.xi[tuple(orders)] = xi_exponent(basis, tau2, orders)
    return table


# --- appendix: integral moments ---------------------------------------------


def gap_exponents(basis, tau2: float, n: int) -> np.ndarray:
    """``xi_{j+1}`` for ``j = 1..n-1`` (all orders equal to one)."""
    return np.array([xi_exponent(basis, tau2, (1,) * (j + 1)) for j in range(1, n)])


def appendix_Fn(
    n: int,
    l: float,
    l_scal: float,
    basis,
    tau2: float,
    mc_samples: int = 200_000,
    rng: np.random.Generator | int | None = 0,
    chunk: int = 100_000,
):
    """Monte Carlo estimate of the large-scale integral ``F_n(l, l_scal)``.

    The domain is the ordered tuple ``0 = l_1 < l_2 < ... < l_n < l`` with all
    consecutive gaps at least ``l_scal``; the integrand is
    ``l**-n (l - l_n) prod_{k>j} (l_k - l_j)**-xi_{k-j+1}``. Points are sampled
    uniformly on the ordered simplex (sorted uniforms). Passing the same
    seed for different ``l`` gives common random numbers, so the estimate
    is monotone in ``l`` at fixed ``l_scal`` exactly as the integral is.

    Returns ``(value, standard_error)``.
    """
    if n < 2:
        raise ValueError(f"F_n needs n >= 2, got {n}")
    if not l > (n - 1) * l_scal:
        raise ValueError(f"need l > (n-1) l_scal, got l={l}, l_scal={l_scal}")
    for k in range(2, n + 1):
        ok = check_multifractal_condition(basis, tau2, k)
        if not ok:
            raise ValueError(f"multifractality condition fails at order {k}; F_n may diverge")
    xi = gap_exponents(basis, tau2, n)
    rng = np.random.default_rng(rng)
    volume = l ** (n - 1) / math.factorial(n - 1)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_samples:
        m = min(chunk, mc_samples - done)
        u = np.sort(rng.random((m, n - 1)), axis=1) * l
        pos = np.concatenate([np.zeros((m, 1)), u], axis=1)
        gaps = np.diff(pos, axis=1)
        inside = np.all(gaps >= l_scal, axis=1)
        log_w = np.zeros(m)
        for j in range(1, n):
            d = pos[:, j:] - pos[:, :-j]
            with np.errstate(divide="ignore"):
                log_w -= xi[j - 1] * np.sum(np.log(d), axis=1)
        vals = np.where(inside, (l - pos[:, -1]) * np.exp(np.where(inside, log_w, 0.0)), 0.0)
        vals *= volume * l ** (-n)
        total += vals.sum()
        total_sq += np.dot(vals, vals)
        done += m
    mean = total / mc_samples
    var = max(total_sq / mc_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / mc_samples)


def appendix_Fn_bound(basis, tau2: float, n: int) -> float:
    """Upper bound ``prod_{k=2}^{n} 1 / (1 + h(k))`` (``h(1) = 0`` contributes 1)."""
    out = 1.0
    for k in range(2, n + 1):
        hk = h_increment(basis, tau2, k)
        if not hk > -1:
            raise ValueError(f"bound undefined: h({k}) = {hk} <= -1")
        out /= 1.0 + hk
    return out


def coincident_moment(basis, boundary: AmbitBoundary, n: int) -> float:
    """``d_n(0, ..., 0) = exp(Vol(S0) K[n])`` for ``n`` coincident unit-order points."""
    return math.exp(overlap_volume(boundary, 0.0, 0.0) * cumulant(basis, n))


def appendix_error_bound(
    n: int, l: float, l_scal: float, d_n_at_zero: float, mu_n: float, prefactor: float = 1.0
) -> float:
    """Rough bound on the relative error of the large-scale approximation.

    ``n! d_n(0,...,0) / prefactor * l**(mu_n - n) ((l_scal + l)**n - l**n)``.
    ``prefactor`` is the unknown proportionality constant linking the
    coarse moment to ``F_n``; it defaults to 1 so the value is meaningful
    up to that constant. The bound decays in ``l`` only while ``mu_n < 1``.
    """
    if not (d_n_at_zero > 0 and math.isfinite(d_n_at_zero)):
        raise ValueError(f"d_n(0,...,0) must be positive and finite, got {d_n_at_zero!r}")
    const = math.factorial(n) * d_n_at_zero / prefactor
    # (l_scal + l)**n - l**n without cancellation
    spread = sum(math.comb(n, k) * l_scal**k * l ** (n - k) for k in range(1, n + 1))
    return const * l ** (mu_n - n) * spread
