"""Physics-substitute checks: brute-force distance transform oracle,
closed-form field values, exact three-term separability, and the fixed
material-point lattice."""

import numpy as np
import pytest

from gpdesign import kernels
from gpdesign.microgen import InclusionSpec, RVEImage, rasterize
from gpdesign.oracle import (
    MaterialPoint,
    OracleConfig,
    TEST_LATTICE_INDICES,
    boundary_profile,
    collocation_grid,
    signed_distance,
    stress_field,
    stress_from_profile,
)


def brute_force_edt_sq(mask):
    """Quadratic-time reference: nearest source pixel by exhaustive search."""
    h, w = mask.shape
    src = np.argwhere(mask != 0)
    out = np.full((h, w), 1e30)
    for i in range(h):
        for j in range(w):
            if len(src):
                d = (src[:, 0] - i) ** 2 + (src[:, 1] - j) ** 2
                out[i, j] = d.min()
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_edt_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    mask = (rng.random((20, 23)) < 0.08).astype(np.uint8)
    mask[0, 0] = 1  # guarantee a source
    assert np.array_equal(kernels.edt_sq(mask), brute_force_edt_sq(mask))


def test_edt_backend_parity(backend_guard):
    rng = np.random.default_rng(3)
    mask = (rng.random((64, 64)) < 0.05).astype(np.uint8)
    mask[10, 10] = 1
    backend_guard("numpy")
    a = kernels.edt_sq(mask)
    backend_guard("numba")
    b = kernels.edt_sq(mask)
    assert np.array_equal(a, b)


def disk_image(radius=0.25, res=100):
    return rasterize(InclusionSpec("circle", (0.5, 0.5), (radius, radius), 0.0), res)


def test_signed_distance_boundary_band():
    img = disk_image()
    d = signed_distance(img)
    # boundary pixels: inclusion pixels with a matrix 4-neighbor
    px = img.pixels.astype(bool)
    shifted = np.zeros_like(px)
    for ax, sh in ((0, 1), (0, -1), (1, 1), (1, -1)):
        shifted |= px != np.roll(px, sh, axis=ax)
    boundary = px & shifted
    assert boundary.any()
    assert np.all(np.abs(d[boundary]) <= 1.0)


def test_signed_distance_disk_center_and_corner():
    res, radius = 100, 0.25
    img = disk_image(radius, res)
    d = signed_distance(img)
    r_px = radius * res
    assert d[res // 2, res // 2] == pytest.approx(-r_px, abs=1.5)
    corner_dist = np.hypot(0.5 * res - 0.5, 0.5 * res - 0.5) - r_px
    assert d[0, 0] == pytest.approx(corner_dist, abs=1.5)


def test_signed_distance_needs_two_phases():
    with pytest.raises(ValueError):
        signed_distance(RVEImage(16, np.zeros((16, 16), np.uint8)))
    with pytest.raises(ValueError):
        signed_distance(RVEImage(16, np.ones((16, 16), np.uint8)))


def test_far_field_value():
    img = disk_image(0.1, 148)
    field = stress_field(img, MaterialPoint(800.0, 12000.0))
    assert field[0, 0] == pytest.approx(0.08 * 800.0, rel=1e-6)


def test_boundary_formula_value():
    # with the profile forced to its ideal peak of 1:
    sigma = stress_from_profile(1.0, 800.0, 12000.0)
    assert sigma == pytest.approx(64.0 * (1.0 + 0.8 * np.log(15.0)), rel=1e-12)
    assert sigma == pytest.approx(202.65, abs=0.01)


def test_equal_moduli_collapse_to_constant():
    phi = np.linspace(0.0, 1.0, 11)
    sigma = stress_from_profile(phi, 1000.0, 1000.0)
    assert np.allclose(sigma, 0.08 * 1000.0)


def test_field_positive_and_deterministic():
    img = disk_image(0.2, 64)
    mu = MaterialPoint(1600.0, 40000.0)
    a = stress_field(img, mu)
    b = stress_field(img, mu)
    assert np.array_equal(a, b)
    assert np.all(a > 0)


def test_material_range_validation():
    img = disk_image(0.2, 64)
    with pytest.raises(ValueError):
        stress_field(img, MaterialPoint(700.0, 12000.0))
    with pytest.raises(ValueError):
        stress_field(img, MaterialPoint(800.0, 80000.0))


def rank3_residual(img, cfg):
    """Relative residual of a direct least-squares 3-term separable fit."""
    grid = collocation_grid()
    fields = np.stack(
        [stress_field(img, mu, cfg).ravel() for mu in grid.points], axis=1
    )
    design = np.array(
        [[mu.mu1, mu.mu1 * np.log(mu.mu2), mu.mu1 * np.log(mu.mu1)] for mu in grid.points]
    )
    coef, *_ = np.linalg.lstsq(design, fields.T, rcond=None)
    return np.linalg.norm(design @ coef - fields.T) / np.linalg.norm(fields)


def test_exact_rank3_structure():
    img = disk_image(0.22, 64)
    assert rank3_residual(img, OracleConfig()) < 1e-10


def test_nonseparable_weight_breaks_rank3():
    img = disk_image(0.22, 64)
    assert rank3_residual(img, OracleConfig(nonseparable_weight=0.5)) > 1e-6


def test_monotone_in_mu2():
    img = disk_image(0.2, 48)
    grid = collocation_grid()
    mu1 = 1200.0
    prev = None
    for mu2 in np.linspace(12000.0, 68000.0, 8):
        cur = stress_field(img, MaterialPoint(mu1, float(mu2)))
        if prev is not None:
            assert np.all(cur >= prev - 1e-9)
        prev = cur
    assert len(grid.points) == 40


def test_collocation_grid_layout():
    grid = collocation_grid()
    assert len(grid.points) == 40
    assert len(grid.train_indices) == 32
    assert len(grid.test_indices) == 8
    assert set(grid.train_indices) | set(grid.test_indices) == set(range(40))
    assert set(grid.train_indices) & set(grid.test_indices) == set()
    assert grid.points[0].mu1 == 800.0 and grid.points[0].mu2 == 12000.0
    assert grid.points[1].mu1 - grid.points[0].mu1 == pytest.approx(400.0)
    assert grid.points[5].mu2 - grid.points[0].mu2 == pytest.approx(8000.0)
    expected_test = tuple(sorted(i * 5 + j for i, j in TEST_LATTICE_INDICES))
    assert grid.test_indices == expected_test
    for idx in grid.test_indices:
        mu = grid.points[idx]
        assert 800.0 < mu.mu1 < 2400.0 and 12000.0 < mu.mu2 < 68000.0


def test_boundary_profile_peak_location():
    img = disk_image(0.25, 100)
    phi = boundary_profile(img, OracleConfig())
    peak = np.exp(-((1.0 / 5.0) ** 2))
    assert phi.max() == pytest.approx(peak, abs=1e-12)
