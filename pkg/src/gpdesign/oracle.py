"""Deterministic stand-in for the high-fidelity physics.

Given a two-phase geometry and a material pair (mu1: matrix modulus, mu2:
inclusion modulus), produce a positive scalar field concentrated near the
phase boundary. With the nonseparable weight at zero the field is exactly
a sum of three separable space-parameter products, which gives downstream
surrogate fits a sharp, provable target. Also defines the fixed lattice of
material points used to build and validate those fits.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .microgen import RVEImage

MU1_RANGE = (800.0, 2400.0)
MU2_RANGE = (12000.0, 68000.0)

# lattice indices (i along mu2, j along mu1) of the held-out material points
TEST_LATTICE_INDICES = ((1, 1), (2, 3), (3, 2), (4, 1), (5, 3), (6, 2), (1, 3), (6, 1))


@dataclass(frozen=True)
class MaterialPoint:
    mu1: float  # matrix Young's modulus, MPa
    mu2: float  # inclusion Young's modulus, MPa

    def validate(self):
        if not (MU1_RANGE[0] <= self.mu1 <= MU1_RANGE[1]):
            raise ValueError(f"mu1={self.mu1} outside {MU1_RANGE}")
        if not (MU2_RANGE[0] <= self.mu2 <= MU2_RANGE[1]):
            raise ValueError(f"mu2={self.mu2} outside {MU2_RANGE}")


@dataclass(frozen=True)
class OracleConfig:
    applied_strain: float = 0.08
    boundary_length: float = 5.0  # decay length of the boundary layer, pixels
    amplitude: float = 0.8
    nonseparable_weight: float = 0.0
    poisson_matrix: float = 0.3  # recorded for provenance, not used by the field
    poisson_inclusion: float = 0.2

    def __post_init__(self):
        if self.applied_strain <= 0 or self.boundary_length <= 0:
            raise ValueError("applied_strain and boundary_length must be positive")
        if self.nonseparable_weight < 0:
            raise ValueError("nonseparable_weight must be >= 0")


@dataclass(frozen=True)
class CollocationGrid:
    points: tuple  # 40 MaterialPoint values, index = i*5 + j
    train_indices: tuple
    test_indices: tuple


def signed_distance(img: RVEImage) -> np.ndarray:
    """Euclidean distance in pixels to the inclusion boundary, negative inside.

    Computed from two exact distance transforms (to the inclusion and to the
    matrix); boundary pixels land at |d| = 1.
    """
    pixels = img.pixels
    n_in = int(pixels.sum())
    if n_in == 0 or n_in == pixels.size:
        raise ValueError("signed_distance needs both phases present")
    d_to_inclusion = np.sqrt(kernels.edt_sq(pixels))
    d_to_matrix = np.sqrt(kernels.edt_sq(1 - pixels))
    return d_to_inclusion - d_to_matrix


def boundary_profile(img: RVEImage, cfg: OracleConfig) -> np.ndarray:
    """phi(x) = exp(-(d(x)/l)^2), peaking at 1 on the phase boundary."""
    d = signed_distance(img)
    return np.exp(-((d / cfg.boundary_length) ** 2))


def stress_from_profile(phi, mu1: float, mu2: float, cfg: OracleConfig | None = None):
    """Evaluate the field formula on a precomputed boundary profile.

    Accepts scalar or array phi and raw moduli; range validation is the
    caller's concern, which keeps hypothetical points (like mu2 = mu1)
    available to tests.
    """
    cfg = cfg or OracleConfig()
    eps = cfg.applied_strain
    base = eps * mu1 * (1.0 + cfg.amplitude * phi * np.log(mu2 / mu1))
    if cfg.nonseparable_weight:
        base = base + cfg.nonseparable_weight * eps * phi**2 * (
            mu1 * mu2 / (mu1 + mu2)
        )
    return base


def stress_field(img: RVEImage, mu: MaterialPoint, cfg: OracleConfig | None = None) -> np.ndarray:
    """Positive scalar field over the geometry for one material pair."""
    cfg = cfg or OracleConfig()
    mu.validate()
    return stress_from_profile(boundary_profile(img, cfg), mu.mu1, mu.mu2, cfg)


def separable_terms(img: RVEImage, cfg: OracleConfig | None = None):
    """The three exact space/parameter factor pairs of the eta=0 field.

    Returns (spatial, parametric) where spatial is a list of three fields
    and parametric a list of three callables (mu1, mu2) -> coefficient, with
    stress = sum_i spatial[i] * parametric[i](mu1, mu2).
    """
    cfg = cfg or OracleConfig()
    phi = boundary_profile(img, cfg)
    eps = cfg.applied_strain
    ones = np.ones_like(phi)
    spatial = [eps * ones, eps * cfg.amplitude * phi, -eps * cfg.amplitude * phi]
    parametric = [
        lambda m1, m2: m1,
        lambda m1, m2: m1 * np.log(m2),
        lambda m1, m2: m1 * np.log(m1),
    ]
    return spatial, parametric


def collocation_grid(
    mu1_range=MU1_RANGE, mu2_range=MU2_RANGE, n_mu1=5, n_mu2=8
) -> CollocationGrid:
    """Regular n_mu2 x n_mu1 lattice over the material box, fixed 32/8 split.

    Flat index is i * n_mu1 + j with i walking mu2 and j walking mu1; the
    held-out points are the fixed interior lattice sites listed in
    TEST_LATTICE_INDICES.
    """
    mu1s = np.linspace(mu1_range[0], mu1_range[1], n_mu1)
    mu2s = np.linspace(mu2_range[0], mu2_range[1], n_mu2)
    points = tuple(
        MaterialPoint(float(mu1s[j]), float(mu2s[i]))
        for i in range(n_mu2)
        for j in range(n_mu1)
    )
    test = tuple(sorted(i * n_mu1 + j for i, j in TEST_LATTICE_INDICES))
    train = tuple(k for k in range(len(points)) if k not in set(test))
    return CollocationGrid(points=points, train_indices=train, test_indices=test)
