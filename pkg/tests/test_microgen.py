"""Geometry sampling and rasterization: analytic-area oracles, Monte-Carlo
class-mix counts, invariant sweeps, and container round trips."""

import numpy as np
import pytest

import gpdesign.microgen as mg
from gpdesign.errors import GenerationError


def test_forced_circle_mix():
    spec = mg.sample_inclusion(0, {"circle": 1.0})
    assert spec.shape == "circle"
    assert spec.half_axes[0] == spec.half_axes[1]


def test_seed_determinism():
    assert mg.sample_inclusion(123) == mg.sample_inclusion(123)
    a = mg.rasterize(mg.sample_inclusion(7), 64)
    b = mg.rasterize(mg.sample_inclusion(7), 64)
    assert np.array_equal(a.pixels, b.pixels)


def test_default_mix_monte_carlo():
    count = sum(
        mg.sample_inclusion(seed).shape in ("circle", "ellipse") for seed in range(10_000)
    )
    assert abs(count / 10_000 - 0.5) <= 0.02


def test_circle_pixel_count_matches_analytic_area():
    spec = mg.InclusionSpec("circle", (0.5, 0.5), (0.25, 0.25), 0.0)
    img = mg.rasterize(spec, 148)
    expected = np.pi * (0.25 * 148) ** 2
    assert abs(int(img.pixels.sum()) - expected) / expected < 0.01


def test_axis_aligned_square_block():
    spec = mg.InclusionSpec("square", (0.5, 0.5), (0.2, 0.2), 0.0)
    img = mg.rasterize(spec, 100)
    rows = np.where(img.pixels.any(axis=1))[0]
    cols = np.where(img.pixels.any(axis=0))[0]
    assert abs((rows[-1] - rows[0] + 1) - 40) <= 1
    assert abs((cols[-1] - cols[0] + 1) - 40) <= 1
    block = img.pixels[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    assert np.all(block == 1)


def _mean_abs_area_error(shape, res, trials=80, seed=5):
    rng = np.random.default_rng(seed)
    total = 0.0
    done = 0
    while done < trials:
        a = float(rng.uniform(0.10, 0.30))
        cx = float(rng.uniform(0.38, 0.62))
        cy = float(rng.uniform(0.38, 0.62))
        spec = mg.InclusionSpec(shape, (cx, cy), (a, a), 0.0)
        if not mg.spec_is_valid(spec):
            continue
        analytic = mg._area(spec)
        total += abs(mg.rasterize(spec, res).pixels.mean() - analytic) / analytic
        done += 1
    return total / trials


@pytest.mark.parametrize(
    "shape,res", [("circle", 32), ("square", 64)], ids=["circle", "square"]
)
def test_area_error_halves_when_resolution_doubles(shape, res):
    coarse = _mean_abs_area_error(shape, res)
    fine = _mean_abs_area_error(shape, 2 * res)
    ratio = fine / coarse
    assert 0.5 * 0.8 <= ratio <= 0.5 * 1.2, (shape, ratio)


def test_generated_set_satisfies_invariants():
    images = mg.generate_images(599, root_seed=2024, resolution=64)
    assert len(images) == 599
    for img in images:
        assert mg.spec_is_valid(img.spec)
        assert 0.0 < img.volume_fraction < 0.5
        assert set(np.unique(img.pixels)) <= {0, 1}


def test_rejection_cap_raises(monkeypatch):
    monkeypatch.setattr(mg, "MAX_TRIES", 0)
    with pytest.raises(GenerationError):
        mg.sample_inclusion(0)


def test_bad_mix_rejected():
    with pytest.raises(ValueError):
        mg.sample_inclusion(0, {"circle": 0.7})
    with pytest.raises(ValueError):
        mg.sample_inclusion(0, {"blob": 1.0})


def test_rasterize_argument_errors():
    spec = mg.InclusionSpec("circle", (0.5, 0.5), (0.2, 0.2), 0.0)
    with pytest.raises(ValueError):
        mg.rasterize(spec, 8)
    hugging = mg.InclusionSpec("circle", (0.05, 0.5), (0.2, 0.2), 0.0)
    with pytest.raises(ValueError):
        mg.rasterize(hugging, 64)


def test_container_round_trip(tmp_path):
    images = mg.generate_images(5, root_seed=3, resolution=32)
    c = mg.images_to_container(images, meta={"seed": 3})
    path = tmp_path / "rve.gpdc"
    mg.write_dataset(c, path)
    back = mg.container_to_images(mg.read_dataset(path))
    assert len(back) == 5
    for orig, rt in zip(images, back):
        assert np.array_equal(orig.pixels, rt.pixels)
        assert rt.spec.shape == orig.spec.shape
        assert rt.spec.center == pytest.approx(orig.spec.center)
        assert rt.spec.half_axes == pytest.approx(orig.spec.half_axes)
        assert rt.spec.orientation == pytest.approx(orig.spec.orientation)
