import dataclasses
import json

import numpy as np
import pytest

from ambitfield.ambit import ambit_mask, build_boundary
from ambitfield.levy import Gaussian, NIG, StableSkewed
from ambitfield.simulate import (
    HEADER_NAME,
    LatticeConfig,
    discrete_mean_field,
    field_header,
    generate,
    generate_one,
    load_realization,
    load_realizations,
    log_field,
    mask_area,
    realization_rng,
    save_realizations,
)

# Compact model: L_scal = 4, l_scal = 0.2, T = 1.2.
SMALL = build_boundary(0.2, Gaussian(), 0.05, 1.0, 1.2)
SMALL_LATTICE = LatticeConfig(dx=0.05, dt=0.05, nx=160, nt=40, seed=3, realizations=3)


def test_validate_collects_every_problem(boundary):
    lat = LatticeConfig(dx=0.01, dt=1.5, nx=100, nt=10, burn_in_depth=0, realizations=0)
    problems = lat.validate(boundary)
    text = " ".join(problems)
    assert len(problems) == 4
    assert "realizations" in text and "decorrelation time" in text
    assert "burn-in" in text and "spatial extent" in text


def test_validate_accepts_defaults(boundary):
    lat = LatticeConfig(dx=0.01, dt=0.01, nx=10000, nt=1000)
    assert lat.validate(boundary, max_spatial_lag=6.67) == []
    assert lat.burn_in(boundary) == 120


def test_validate_rejects_lag_beyond_extent(boundary):
    lat = LatticeConfig(dx=0.01, dt=0.01, nx=2100, nt=10)
    assert lat.validate(boundary) == []
    assert lat.validate(boundary, max_spatial_lag=1.5)


def test_realization_streams():
    a = realization_rng(5, 0).random(4)
    np.testing.assert_array_equal(a, realization_rng(5, 0).random(4))
    assert not np.array_equal(a, realization_rng(5, 1).random(4))
    assert not np.array_equal(a, realization_rng(6, 0).random(4))


def test_impulse_response_is_the_stencil():
    mask = ambit_mask(SMALL, 0.05, 0.05)
    burn, nt, nx = mask.depth, 30, 120
    R, C = burn + 10, 50
    cells = np.zeros((burn + nt, nx))
    cells[R, C] = 1.0
    expected = np.zeros((nt, nx))
    for i, j in mask.offsets():
        k = R - burn + j
        if 0 <= k < nt:
            expected[k, (C - i) % nx] += 1.0
    for method in ("sliding", "direct"):
        np.testing.assert_array_equal(log_field(cells, mask, burn, nt, method), expected)


def test_sliding_matches_direct():
    mask = ambit_mask(SMALL, 0.05, 0.05)
    rng = np.random.default_rng(0)
    cells = rng.normal(size=(mask.depth + 25, 90))
    a = log_field(cells, mask, mask.depth, 25, "sliding")
    b = log_field(cells, mask, mask.depth, 25, "direct")
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_log_field_checks():
    mask = ambit_mask(SMALL, 0.05, 0.05)
    cells = np.zeros((mask.depth + 5, 50))
    with pytest.raises(ValueError, match="burn-in"):
        log_field(cells, mask, mask.depth - 5, 5)
    with pytest.raises(ValueError, match="method"):
        log_field(cells, mask, mask.depth, 5, "fft")


def test_constant_cells_hook():
    real = generate_one(Gaussian(), SMALL, SMALL_LATTICE, 0, cell_sampler=lambda rng, shape, area: np.full(shape, 0.01))
    mask = ambit_mask(SMALL, 0.05, 0.05)
    np.testing.assert_allclose(np.log(real.values), 0.01 * mask.cell_count, rtol=1e-12)


def test_log_field_variance_is_mask_area():
    lat = LatticeConfig(dx=0.05, dt=0.05, nx=400, nt=200, seed=1, realizations=4)
    logs = np.concatenate([np.log(r.values).ravel() for r in generate(Gaussian(), SMALL, lat)])
    # strongly correlated samples: a loose tolerance
    assert logs.var() == pytest.approx(mask_area(SMALL, lat), rel=0.1)
    assert abs(logs.mean()) < 0.1


def test_generate_deterministic_across_threads():
    serial = [r.values for r in generate(Gaussian(), SMALL, SMALL_LATTICE, threads=1)]
    threaded = list(generate(Gaussian(), SMALL, SMALL_LATTICE, threads=3))
    assert [r.index for r in threaded] == [0, 1, 2]
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a, b.values)


def test_generate_rejects_invalid_lattice():
    with pytest.raises(ValueError, match="invalid lattice"):
        next(generate(Gaussian(), SMALL, LatticeConfig(dx=0.05, dt=2.0, nx=200, nt=5)))


@pytest.mark.parametrize("basis", [StableSkewed(1.5, 0.5), NIG(3.0, 0.5, 1.0)], ids=["stable", "nig"])
def test_other_bases_generate(basis):
    boundary = build_boundary(0.2, basis, 0.05, 1.0, 1.2)
    lat = LatticeConfig(dx=0.1, dt=0.05, nx=200, nt=20, realizations=1)
    real = next(generate(basis, boundary, lat))
    assert real.values.shape == (20, 200)
    assert np.all(np.isfinite(real.values)) and np.all(real.values > 0)


def test_discrete_mean_field():
    area = mask_area(SMALL, SMALL_LATTICE)
    assert discrete_mean_field(Gaussian(), SMALL, SMALL_LATTICE) == pytest.approx(np.exp(0.5 * area))


def test_storage_round_trip(tmp_path):
    header = field_header(Gaussian(), SMALL, SMALL_LATTICE)
    reals = list(generate(Gaussian(), SMALL, SMALL_LATTICE))
    save_realizations(tmp_path, iter(reals), header)
    stored = json.loads((tmp_path / HEADER_NAME).read_text())
    assert stored["format"] == "float64-le" and stored["nx"] == 160 and stored["nt"] == 40
    assert stored["basis"] == {"kind": "gaussian", "a": 0.0, "b": 1.0}
    raw = (tmp_path / "field_0001.bin").read_bytes()
    assert len(raw) == 8 * 160 * 40
    np.testing.assert_array_equal(np.frombuffer(raw, "<f8").reshape(40, 160), reals[1].values)
    loaded = list(load_realizations(tmp_path))
    for a, b in zip(reals, loaded):
        np.testing.assert_array_equal(a.values, b.values)
        # the header records the resolved burn-in depth
        assert b.lattice == dataclasses.replace(a.lattice, burn_in_depth=a.lattice.burn_in(SMALL))


def test_truncated_file_detected(tmp_path):
    header = field_header(Gaussian(), SMALL, SMALL_LATTICE)
    save_realizations(tmp_path, generate(Gaussian(), SMALL, SMALL_LATTICE), header)
    path = tmp_path / "field_0000.bin"
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="expected"):
        load_realization(tmp_path, 0)
