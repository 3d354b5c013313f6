"""Parametric two-phase RVE geometries as binary images.

One inclusion per cell, drawn from four shape classes, sampled uniformly
within size/orientation bounds and rejection-resampled until it fits inside
the unit square with a safety margin. Rasterization is a pixel-center
point-in-shape test, so images are strictly binary.
"""

from dataclasses import dataclass

import numpy as np

from . import __version__
from .container import DatasetContainer, read_dataset, write_dataset
from .errors import GenerationError

SHAPES = ("circle", "ellipse", "square", "rectangle")
DEFAULT_MIX = {name: 0.25 for name in SHAPES}

MARGIN = 0.05
HALF_AXIS_LO = 0.08
HALF_AXIS_HI = 0.35
# analytic-area cap keeping the rasterized volume fraction below 1/2
AREA_CAP = 0.45
MAX_TRIES = 1000


@dataclass(frozen=True)
class InclusionSpec:
    shape: str
    center: tuple  # (cx, cy), unit-square coordinates
    half_axes: tuple  # (a, b), fractions of the domain edge
    orientation: float  # radians in [0, pi)


@dataclass
class RVEImage:
    resolution: int
    pixels: np.ndarray  # uint8, 1 = inclusion, 0 = matrix
    spec: InclusionSpec | None = None

    @property
    def volume_fraction(self) -> float:
        return float(self.pixels.mean())


def _extent(spec: InclusionSpec) -> tuple[float, float]:
    """Half-width and half-height of the rotated shape's bounding box."""
    a, b = spec.half_axes
    th = spec.orientation
    if spec.shape in ("circle", "ellipse"):
        ex = np.sqrt((a * np.cos(th)) ** 2 + (b * np.sin(th)) ** 2)
        ey = np.sqrt((a * np.sin(th)) ** 2 + (b * np.cos(th)) ** 2)
    else:
        ex = a * abs(np.cos(th)) + b * abs(np.sin(th))
        ey = a * abs(np.sin(th)) + b * abs(np.cos(th))
    return float(ex), float(ey)


def _area(spec: InclusionSpec) -> float:
    a, b = spec.half_axes
    if spec.shape in ("circle", "ellipse"):
        return float(np.pi * a * b)
    return float(4.0 * a * b)


def spec_is_valid(spec: InclusionSpec) -> bool:
    a, b = spec.half_axes
    if not (HALF_AXIS_LO <= a <= HALF_AXIS_HI and HALF_AXIS_LO <= b <= HALF_AXIS_HI):
        return False
    if spec.shape in ("circle", "square") and a != b:
        return False
    if _area(spec) > AREA_CAP:
        return False
    ex, ey = _extent(spec)
    cx, cy = spec.center
    return (
        cx - ex >= MARGIN
        and cx + ex <= 1.0 - MARGIN
        and cy - ey >= MARGIN
        and cy + ey <= 1.0 - MARGIN
    )


def sample_inclusion(seed, class_mix=None) -> InclusionSpec:
    """Draw one inclusion spec, deterministic for a given seed.

    class_mix maps shape name to probability and must sum to 1; the default
    weights the four classes equally. Placement is rejection-resampled until
    the margin constraint holds (cap 1000 tries).
    """
    mix = dict(DEFAULT_MIX) if class_mix is None else dict(class_mix)
    unknown = set(mix) - set(SHAPES)
    if unknown:
        raise ValueError(f"unknown shape classes {sorted(unknown)}")
    probs = np.array([mix.get(name, 0.0) for name in SHAPES], dtype=float)
    if probs.min() < 0 or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("class_mix must be nonnegative and sum to 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = SHAPES[int(rng.choice(len(SHAPES), p=probs))]
    for _ in range(MAX_TRIES):
        a = float(rng.uniform(HALF_AXIS_LO, HALF_AXIS_HI))
        if shape in ("circle", "square"):
            b = a
        else:
            b = float(rng.uniform(HALF_AXIS_LO, HALF_AXIS_HI))
        orientation = float(rng.uniform(0.0, np.pi))
        center = (float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 1.0)))
        spec = InclusionSpec(shape, center, (a, b), orientation)
        if spec_is_valid(spec):
            return spec
    raise GenerationError(
        f"no valid {shape} placement found in {MAX_TRIES} tries"
    )


def rasterize(spec: InclusionSpec, resolution: int) -> RVEImage:
    """Binary image with pixel = 1 iff its center lies inside the shape."""
    if resolution < 16:
        raise ValueError(f"resolution must be >= 16, got {resolution}")
    if not spec_is_valid(spec):
        raise ValueError(f"inclusion spec violates placement invariants: {spec}")
    coords = (np.arange(resolution) + 0.5) / resolution
    xg, yg = np.meshgrid(coords, coords, indexing="xy")
    dx = xg - spec.center[0]
    dy = yg - spec.center[1]
    c, s = np.cos(spec.orientation), np.sin(spec.orientation)
    xr = c * dx + s * dy
    yr = -s * dx + c * dy
    a, b = spec.half_axes
    if spec.shape in ("circle", "ellipse"):
        inside = (xr / a) ** 2 + (yr / b) ** 2 <= 1.0
    else:
        inside = (np.abs(xr) <= a) & (np.abs(yr) <= b)
    return RVEImage(resolution, inside.astype(np.uint8), spec)


def generate_images(n: int, root_seed: int, resolution: int, class_mix=None):
    """Generate n RVE images with per-sample seeds derived from (root, index)."""
    images = []
    for i in range(n):
        for retry in range(20):
            rng = np.random.default_rng(
                np.random.SeedSequence((int(root_seed), i, retry))
            )
            spec = sample_inclusion(rng, class_mix)
            img = rasterize(spec, resolution)
            if 0.0 < img.volume_fraction < 0.5:
                images.append(img)
                break
        else:
            raise GenerationError(f"sample {i}: no in-range volume fraction in 20 draws")
    return images


_SHAPE_CODE = {name: i for i, name in enumerate(SHAPES)}


def images_to_container(images, meta=None) -> DatasetContainer:
    n = len(images)
    res = images[0].resolution if n else 0
    c = DatasetContainer(
        meta={
            "generator_version": __version__,
            "counts": {"samples": n},
            "resolution": res,
            **(meta or {}),
        }
    )
    c.add("images", np.stack([im.pixels for im in images]) if n else np.zeros((0, 0, 0), np.uint8))
    c.add("shape_code", np.array([_SHAPE_CODE[im.spec.shape] for im in images], np.int32))
    c.add("center", np.array([im.spec.center for im in images], np.float64).reshape(n, 2))
    c.add("half_axes", np.array([im.spec.half_axes for im in images], np.float64).reshape(n, 2))
    c.add("orientation", np.array([im.spec.orientation for im in images], np.float64))
    return c


def container_to_images(c: DatasetContainer):
    images = []
    for i in range(c.arrays["images"].shape[0]):
        spec = InclusionSpec(
            SHAPES[int(c.arrays["shape_code"][i])],
            tuple(float(v) for v in c.arrays["center"][i]),
            tuple(float(v) for v in c.arrays["half_axes"][i]),
            float(c.arrays["orientation"][i]),
        )
        images.append(RVEImage(c.arrays["images"].shape[1], c.arrays["images"][i].copy(), spec))
    return images


__all__ = [
    "SHAPES",
    "DEFAULT_MIX",
    "InclusionSpec",
    "RVEImage",
    "sample_inclusion",
    "rasterize",
    "generate_images",
    "images_to_container",
    "container_to_images",
    "spec_is_valid",
    "DatasetContainer",
    "read_dataset",
    "write_dataset",
]
