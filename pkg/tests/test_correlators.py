import math

import numpy as np
import pytest

from ambitfield.ambit import AmbitRegion, build_boundary, overlap_volume
from ambitfield.correlators import (
    appendix_error_bound,
    appendix_Fn,
    appendix_Fn_bound,
    check_multifractal_condition,
    coincident_moment,
    critical_order,
    exponent_table,
    fusion_prediction,
    gap_exponents,
    h_increment,
    log_n_point,
    mean_field,
    mu_exponent,
    multifractal_increment,
    n_point,
    n_point_weighted,
    tau_exponent,
    two_point,
    xi_exponent,
)
from ambitfield.estimate import fit_powerlaw
from ambitfield.levy import NIG, CumulantDomainError, Gamma, Gaussian, Poisson, StableSkewed, cumulant

from conftest import TAU2, basis_id

# exp(Vol(S0) / 2) for the default Gaussian boundary, Vol(S0) = 0.22 + 0.2 ln 100.
DEFAULT_MEAN = 1.7691815147721581

# Bases with moments up to order 16 so that the identities can be checked for n <= 8.
WIDE_BASES = [
    Gaussian(0.0, 1.0),
    Gaussian(-0.4, 0.7),
    Poisson(2.0, 0.5),
    Gamma(3.0, 20.0),
    StableSkewed(1.5, 0.8),
    StableSkewed(0.6, 1.2),
    NIG(20.0, 1.0, 2.0, 0.1),
]


def test_mean_field_frozen(gaussian, boundary):
    assert mean_field(gaussian, boundary) == pytest.approx(DEFAULT_MEAN, rel=1e-12)


def test_two_point_closed_form(gaussian, boundary):
    v = overlap_volume(boundary, 0.0, 0.1)
    assert two_point(gaussian, boundary, 0.0, 0.1) == pytest.approx(DEFAULT_MEAN**2 * math.exp(v), rel=1e-12)


def test_two_point_factorises_beyond_decorrelation(gaussian, boundary):
    assert two_point(gaussian, boundary, 0.0, 1.5) == pytest.approx(DEFAULT_MEAN**2, rel=1e-14)
    assert two_point(gaussian, boundary, 30.0, 0.0) == pytest.approx(DEFAULT_MEAN**2, rel=1e-14)


def test_n_point_reduces_to_two_point(gaussian, boundary):
    a = n_point(gaussian, boundary, [(0.0, 0.0), (0.5, 0.05)], [1, 1])
    assert a == pytest.approx(two_point(gaussian, boundary, 0.5, 0.05), rel=1e-9)


def test_n_point_coincident(gaussian, boundary):
    v = boundary.volume
    assert n_point(gaussian, boundary, [(0, 0)], [3]) == pytest.approx(math.exp(v * 4.5), rel=1e-9)
    assert n_point(gaussian, boundary, [(0, 0), (0, 0)], [1, 2]) == pytest.approx(math.exp(v * 4.5), rel=1e-9)
    assert coincident_moment(gaussian, boundary, 3) == pytest.approx(math.exp(v * 4.5), rel=1e-9)


def test_n_point_domain_error(boundary):
    with pytest.raises(CumulantDomainError):
        n_point(NIG(3.0, 0.0, 1.0), boundary, [(0, 0), (0.3, 0.0)], [2, 2])


def test_weighted_unit_weights_match_n_point(gaussian, boundary):
    pts = [(0.0, 0.0), (0.4, 0.03)]
    regions = [AmbitRegion(boundary, x, t) for x, t in pts]
    got = n_point_weighted(gaussian, regions, [lambda x, t: 1.0] * 2)
    assert got == pytest.approx(n_point(gaussian, boundary, pts, [1, 1]), rel=1e-7)


def test_weighted_constant_weights_are_orders(boundary):
    basis = Gamma(3.0, 20.0)
    pts = [(0.0, 0.0), (0.4, 0.03)]
    regions = [AmbitRegion(boundary, x, t) for x, t in pts]
    got = n_point_weighted(basis, regions, [lambda x, t: 2.0, lambda x, t: 3.0])
    assert got == pytest.approx(n_point(basis, boundary, pts, [2, 3]), rel=1e-7)


def test_weighted_linear_weight_gaussian(gaussian, boundary):
    # K[h] = h^2 / 2 with h = 1 + x over a region symmetric in x: integral of x vanishes.
    region = AmbitRegion(boundary, 0.0, 0.0)
    s = np.linspace(0.0, boundary.T, 2_000_001)
    g = boundary.g_array(0.5 * (s[1:] + s[:-1]))
    second = float(np.sum(2 * g**3 / 3) * (s[1] - s[0]))
    expected = math.exp(0.5 * (boundary.volume + second))
    got = n_point_weighted(gaussian, [region], [lambda x, t: 1.0 + x])
    assert got == pytest.approx(expected, rel=1e-5)


def test_weighted_validates_lengths(gaussian, boundary):
    with pytest.raises(ValueError):
        n_point_weighted(gaussian, [AmbitRegion(boundary, 0, 0)], [])


# --- exponents ------------------------------------------------------------------


@pytest.mark.parametrize("basis", WIDE_BASES, ids=basis_id)
def test_exponent_identities(basis):
    assert tau_exponent(basis, TAU2, 1, 1) == TAU2
    assert mu_exponent(basis, TAU2, 2) == TAU2
    assert mu_exponent(basis, TAU2, 1) == 0.0
    for n in range(2, 9):
        hsum = math.fsum(h_increment(basis, TAU2, k) for k in range(2, n + 1))
        assert hsum == pytest.approx(-mu_exponent(basis, TAU2, n), abs=1e-12)
        assert h_increment(basis, TAU2, n) == pytest.approx(
            mu_exponent(basis, TAU2, n - 1) - mu_exponent(basis, TAU2, n), abs=1e-12
        )


def test_gaussian_exponents_closed_form():
    b = Gaussian(0.3, 2.0)
    assert tau_exponent(b, TAU2, 2, 3) == pytest.approx(TAU2 * 6)
    assert mu_exponent(b, TAU2, 4) == pytest.approx(TAU2 * 6)
    assert xi_exponent(b, TAU2, (1, 1, 1)) == pytest.approx(TAU2 * 1)
    assert h_increment(b, TAU2, 1) == 0.0


def test_xi_of_two_orders_is_tau():
    b = Gamma(3.0, 20.0)
    assert xi_exponent(b, TAU2, (2, 3)) == tau_exponent(b, TAU2, 2, 3)
    with pytest.raises(ValueError):
        xi_exponent(b, TAU2, (2,))


def test_critical_order_gaussian():
    g = Gaussian()
    assert [check_multifractal_condition(g, TAU2, n) for n in range(2, 7)] == [True] * 4 + [False]
    assert multifractal_increment(g, TAU2, 6) == pytest.approx(1.0)
    assert critical_order(g, TAU2) == 6


def test_critical_order_nig_domain():
    nig = NIG(3.0, 0.0, 1.0, 0.0)
    assert check_multifractal_condition(nig, TAU2, 3) is True
    assert check_multifractal_condition(nig, TAU2, 4) is None
    assert critical_order(nig, TAU2) == 4
    with pytest.raises(CumulantDomainError):
        cumulant(nig, 4)


def test_exponent_table_skips_undefined_orders():
    table = exponent_table(NIG(3.0, 0.0, 1.0), TAU2, max_order=5)
    assert (1, 2) in table.tau and (2, 2) not in table.tau
    assert sorted(table.mu) == [1, 2, 3]
    assert table.condition[4] is None


def test_fusion_prediction_structure():
    pred = fusion_prediction((1, 2, 1), Gaussian(), TAU2)
    assert pred[(0, 1)] == pytest.approx(-TAU2 * 2)
    assert pred[(1, 2)] == pytest.approx(-TAU2 * 2)
    assert pred[(0, 2)] == pytest.approx(-(tau_exponent(Gaussian(), TAU2, 3, 1) - tau_exponent(Gaussian(), TAU2, 2, 1)))
    assert len(fusion_prediction((1, 1, 1, 1), Gaussian(), TAU2)) == 6


@pytest.mark.parametrize("axis", ["x", "t"])
def test_fusion_closure_under_doubling(gaussian, boundary, axis):
    rng = np.random.default_rng(17)
    for _ in range(5):
        n = int(rng.integers(3, 5))
        orders = tuple(int(m) for m in rng.integers(1, 3, n))
        if axis == "x":
            gaps = np.exp(rng.uniform(math.log(0.2), math.log(10.0 / (n - 1)), n - 1))
            pts = [(float(c), 0.0) for c in np.concatenate([[0.0], np.cumsum(gaps)])]
            doubled = [(2 * x, t) for x, t in pts]
        else:
            gaps = np.exp(rng.uniform(math.log(0.01), math.log(0.5 / (n - 1)), n - 1))
            pts = [(0.0, float(c)) for c in np.concatenate([[0.0], np.cumsum(gaps)])]
            doubled = [(x, 2 * t) for x, t in pts]
        diff = log_n_point(gaussian, boundary, doubled, orders, 1e-10) - log_n_point(
            gaussian, boundary, pts, orders, 1e-10
        )
        predicted = sum(fusion_prediction(orders, gaussian, TAU2).values()) * math.log(2)
        assert diff == pytest.approx(predicted, abs=1e-6)


@pytest.mark.parametrize("dx,dt", [(0.0, None), (None, 0.0)])
def test_analytic_two_point_slope(gaussian, boundary, dx, dt):
    lags = np.geomspace(0.02, 0.2, 12) if dx == 0.0 else np.geomspace(0.4, 4.0, 12)
    if dx == 0.0:
        pts = [(lag, two_point(gaussian, boundary, 0.0, lag)) for lag in lags]
    else:
        pts = [(lag, two_point(gaussian, boundary, lag, 0.0)) for lag in lags]
    assert fit_powerlaw(pts).slope == pytest.approx(-TAU2, abs=1e-6)


# --- appendix -------------------------------------------------------------------


def _f2_closed_form(eps, xi2=TAU2):
    # F_2(1, eps) = int_eps^1 (1 - u) u^(-xi2) du
    p, q = 1 - xi2, 2 - xi2
    return (1 - eps**p) / p - (1 - eps**q) / q


@pytest.mark.parametrize("ratio", [10.0, 1000.0])
def test_f2_matches_closed_form(gaussian, ratio):
    value, se = appendix_Fn(2, 1.0, 1.0 / ratio, gaussian, TAU2, 200_000, rng=3)
    assert abs(value - _f2_closed_form(1.0 / ratio)) < 4 * se


def test_gap_exponents(gaussian):
    np.testing.assert_allclose(gap_exponents(gaussian, TAU2, 4), [TAU2, TAU2, TAU2])


def test_fn_monotone_and_bounded(gaussian):
    for n in (2, 3, 4):
        values = [appendix_Fn(n, 1.0, 1.0 / r, gaussian, TAU2, 40_000, rng=5)[0] for r in (10, 100, 1000)]
        assert values == sorted(values)
        assert values[-1] < appendix_Fn_bound(gaussian, TAU2, n)


def test_fn_deterministic(gaussian):
    a = appendix_Fn(3, 1.0, 0.01, gaussian, TAU2, 10_000, rng=9)
    b = appendix_Fn(3, 1.0, 0.01, gaussian, TAU2, 10_000, rng=9)
    assert a == b


def test_fn_argument_checks(gaussian):
    with pytest.raises(ValueError):
        appendix_Fn(1, 1.0, 0.1, gaussian, TAU2)
    with pytest.raises(ValueError):
        appendix_Fn(3, 1.0, 0.5, gaussian, TAU2)
    with pytest.raises(ValueError, match="condition"):
        appendix_Fn(6, 100.0, 0.1, gaussian, TAU2, 100)


def test_fn_bound_values(gaussian):
    # h(k) = -tau2 (k - 1) for the Gaussian basis
    assert appendix_Fn_bound(gaussian, TAU2, 2) == pytest.approx(1 / 0.8)
    assert appendix_Fn_bound(gaussian, TAU2, 4) == pytest.approx(1 / (0.8 * 0.6 * 0.4))
    with pytest.raises(ValueError):
        appendix_Fn_bound(gaussian, TAU2, 6)


def test_error_bound_formula():
    got = appendix_error_bound(2, 10.0, 0.1, 3.0, 0.2)
    assert got == pytest.approx(2 * 3.0 * 10.0 ** (0.2 - 2) * (10.1**2 - 100.0), rel=1e-12)
    with pytest.raises(ValueError):
        appendix_error_bound(2, 10.0, 0.1, math.inf, 0.2)


def test_error_bound_decays_only_below_unit_mu(gaussian, boundary):
    ls = boundary.spec.l_scal
    for n in (2, 3, 4):
        d0 = coincident_moment(gaussian, boundary, n)
        mu = mu_exponent(gaussian, TAU2, n)
        seq = [appendix_error_bound(n, r * ls, ls, d0, mu) for r in (10, 100, 1000)]
        decreasing = seq[0] > seq[1] > seq[2]
        assert decreasing == (mu < 1)
