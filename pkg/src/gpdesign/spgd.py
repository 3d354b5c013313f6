"""Sparse separated-representation surrogates over (space, mu1, mu2).

A solution approximates sigma(x, mu1, mu2) as a short sum of products
F(x) * M1(mu1) * M2(mu2), where each parametric factor is a small linear
combination of shape functions (Gaussian kernels on a uniform center grid,
or hat functions). Modes are fitted greedily against collocation samples by
alternating least squares; the parametric weak form reduces exactly to this
collocation least-squares problem because the test functions are Dirac
combs on the sample points.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .container import DatasetContainer
from .errors import ParameterRangeError
from .oracle import MU1_RANGE, MU2_RANGE, MaterialPoint

log = logging.getLogger(__name__)

N_CURVE_POINTS = 1000
N_STORED_MODES = 3


# ---------------------------------------------------------------------------
# parametric bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametricBasis:
    kind: str  # "gaussian_kriging" or "piecewise_linear"
    lo: float
    hi: float
    centers: tuple
    corr_len: float | None = None  # gaussian_kriging only


def make_basis(lo: float, hi: float, d_s: int = 8, kind: str = "gaussian_kriging",
               corr_factor: float = 1.5) -> ParametricBasis:
    if kind not in ("gaussian_kriging", "piecewise_linear"):
        raise ValueError(f"unknown basis kind {kind!r}")
    if d_s < 2 or hi <= lo:
        raise ValueError("need at least 2 centers and hi > lo")
    centers = np.linspace(lo, hi, d_s)
    spacing = centers[1] - centers[0]
    corr = corr_factor * spacing if kind == "gaussian_kriging" else None
    return ParametricBasis(kind, float(lo), float(hi), tuple(map(float, centers)), corr)


def basis_matrix(basis: ParametricBasis, mus) -> np.ndarray:
    """Evaluate all shape functions at each mu; rows are mu values."""
    mus = np.atleast_1d(np.asarray(mus, dtype=np.float64))
    if np.any(mus < basis.lo - 1e-9) or np.any(mus > basis.hi + 1e-9):
        bad = mus[(mus < basis.lo - 1e-9) | (mus > basis.hi + 1e-9)]
        raise ParameterRangeError(
            f"parameter value {bad[0]:g} outside [{basis.lo:g}, {basis.hi:g}]"
        )
    centers = np.asarray(basis.centers)
    diff = mus[:, None] - centers[None, :]
    if basis.kind == "gaussian_kriging":
        return np.exp(-((diff / basis.corr_len) ** 2))
    spacing = centers[1] - centers[0]
    return np.maximum(0.0, 1.0 - np.abs(diff) / spacing)


def basis_eval(basis: ParametricBasis, mu: float) -> np.ndarray:
    """Shape-function vector at one parameter value (extrapolation rejected)."""
    return basis_matrix(basis, [mu])[0]


# ---------------------------------------------------------------------------
# solution containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """x_norm = (x - offset) / scale; identity by default."""

    offset: float = 0.0
    scale: float = 1.0

    def forward(self, x):
        return (x - self.offset) / self.scale

    def inverse(self, y):
        return y * self.scale + self.offset


@dataclass
class SpgdMode:
    f: np.ndarray  # spatial field, (res, res)
    lambda1: np.ndarray  # (D_s,)
    lambda2: np.ndarray  # (D_s,)


@dataclass
class SeparatedSolution:
    modes: list  # exactly N_STORED_MODES SpgdMode entries, zero-padded
    basis1: ParametricBasis
    basis2: ParametricBasis
    resolution: int
    # dataset-global affine maps, one per mode index; identity until attached
    curve_norm_m1: tuple = (AffineMap(), AffineMap(), AffineMap())
    curve_norm_m2: tuple = (AffineMap(), AffineMap(), AffineMap())
    field_norm: tuple = (AffineMap(), AffineMap(), AffineMap())
    residual_history: list = field(default_factory=list)  # per accepted mode
    train_rms: list = field(default_factory=list)  # after each stored mode


@dataclass(frozen=True)
class SpgdConfig:
    m_max: int = N_STORED_MODES
    max_sweeps: int = 50
    tol: float = 1e-8
    d_s: int = 8
    basis_kind: str = "gaussian_kriging"
    corr_factor: float = 1.5
    ridge: float = 1e-8
    max_restarts: int = 3
    mu1_range: tuple = MU1_RANGE
    mu2_range: tuple = MU2_RANGE


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _smoothness_gamma(d: int) -> np.ndarray:
    """Second-difference Gram plus a whisker of identity.

    Generalized-Tikhonov matrix for the lambda solves: the data often pins
    fewer points than there are shape functions (5 distinct mu1 values vs
    D_s = 8), and a plain identity ridge resolves that null space with the
    minimum-coefficient-norm interpolant, which bulges badly between sample
    points. Penalizing coefficient curvature picks the flattest interpolant
    instead and leaves well-determined solves untouched.
    """
    d2 = np.zeros((max(d - 2, 0), d))
    for i in range(d - 2):
        d2[i, i], d2[i, i + 1], d2[i, i + 2] = 1.0, -2.0, 1.0
    return d2.T @ d2 + 1e-12 * np.eye(d)


def _ridge_solve(g, rhs, ridge):
    """Tikhonov-regularized solve, weight trace-normalized against the penalty."""
    gamma = _smoothness_gamma(g.shape[0])
    tr_g = np.trace(g)
    reg = ridge * (tr_g / np.trace(gamma) if tr_g > 0 else 1.0)
    return np.linalg.solve(g + reg * gamma, rhs)


def _mode_rms(residual):
    return float(np.sqrt(np.mean(residual**2)))


def _fit_single_mode(residual, phi1, phi2, cfg, init):
    """Alternating least squares for one mode on the residual matrix.

    residual: (K, P) samples-by-pixels. phi1/phi2: (K, D) basis values at the
    sample parameter points. init: None for the constant-1 start, or a unit
    vector index for deterministic restarts. Returns (f, lam1, lam2, history)
    or None when the mode degenerates.
    """
    k_samples, d = phi1.shape
    if init is None:
        ones = np.ones(k_samples)
        lam1 = _ridge_solve(phi1.T @ phi1, phi1.T @ ones, cfg.ridge)
        lam2 = _ridge_solve(phi2.T @ phi2, phi2.T @ ones, cfg.ridge)
    else:
        lam1 = np.zeros(d)
        lam2 = np.zeros(d)
        lam1[init % d] = 1.0
        lam2[init % d] = 1.0
    f = None
    prev = _mode_rms(residual)
    history = [prev]
    for _ in range(cfg.max_sweeps):
        m1 = phi1 @ lam1
        m2 = phi2 @ lam2
        w = m1 * m2
        wsq = float(w @ w)
        if wsq <= 1e-30:
            return None  # degenerate parametric factor, caller restarts
        f = (w @ residual) / wsq
        f_sq = float(f @ f)
        # lam1 step: model is f(x) * (phi1 lam1)_k * m2_k
        g1 = f_sq * (phi1.T * (m2**2)) @ phi1
        rhs1 = phi1.T @ (m2 * (residual @ f))
        lam1 = _ridge_solve(g1, rhs1, cfg.ridge)
        m1 = phi1 @ lam1
        # lam2 step, symmetric
        g2 = f_sq * (phi2.T * (m1**2)) @ phi2
        rhs2 = phi2.T @ (m1 * (residual @ f))
        lam2 = _ridge_solve(g2, rhs2, cfg.ridge)
        m2 = phi2 @ lam2
        cur = _mode_rms(residual - np.outer(m1 * m2, f))
        history.append(cur)
        if prev > 0 and abs(prev - cur) / prev < cfg.tol:
            prev = cur
            break
        prev = cur
    if f is None:
        return None
    return f, lam1, lam2, history


def _normalize_mode(f, lam1, lam2, basis1, basis2):
    """Scale so sup|M1| = sup|M2| = 1 over the ranges, magnitude folded into f."""
    grid1 = np.linspace(basis1.lo, basis1.hi, N_CURVE_POINTS)
    grid2 = np.linspace(basis2.lo, basis2.hi, N_CURVE_POINTS)
    s1 = float(np.abs(basis_matrix(basis1, grid1) @ lam1).max())
    s2 = float(np.abs(basis_matrix(basis2, grid2) @ lam2).max())
    if s1 <= 0 or s2 <= 0:
        return f, lam1, lam2
    return f * (s1 * s2), lam1 / s1, lam2 / s2


def fit_spgd(samples, config: SpgdConfig | None = None) -> SeparatedSolution:
    """Greedy separated fit of collocation samples.

    samples: sequence of (MaterialPoint, field) pairs, all fields the same
    shape. Modes are enriched one at a time; a candidate is kept only if it
    lowers the train RMS residual, and the solution is zero-padded to exactly
    three stored modes.
    """
    cfg = config or SpgdConfig()
    if len(samples) < cfg.d_s:
        raise ValueError(f"need at least {cfg.d_s} samples, got {len(samples)}")
    shapes = {s[1].shape for s in samples}
    if len(shapes) != 1:
        raise ValueError(f"sample fields disagree in shape: {sorted(shapes)}")
    res_shape = shapes.pop()
    basis1 = make_basis(*cfg.mu1_range, cfg.d_s, cfg.basis_kind, cfg.corr_factor)
    basis2 = make_basis(*cfg.mu2_range, cfg.d_s, cfg.basis_kind, cfg.corr_factor)
    mu1s = np.array([s[0].mu1 for s in samples])
    mu2s = np.array([s[0].mu2 for s in samples])
    phi1 = basis_matrix(basis1, mu1s)
    phi2 = basis_matrix(basis2, mu2s)
    residual = np.stack([np.asarray(s[1], dtype=np.float64).ravel() for s in samples])
    sol = SeparatedSolution(
        modes=[], basis1=basis1, basis2=basis2, resolution=res_shape[0]
    )
    rms = _mode_rms(residual)
    data_scale = rms
    exhausted = False
    for _ in range(cfg.m_max):
        accepted = None
        if not exhausted:
            for attempt in range(1 + cfg.max_restarts):
                init = None if attempt == 0 else attempt - 1
                fit = _fit_single_mode(residual, phi1, phi2, cfg, init)
                if fit is None:
                    continue
                f, lam1, lam2, history = fit
                new_rms = history[-1]
                if new_rms < rms * (1 - 1e-12) or (rms == 0 and new_rms == 0):
                    accepted = (f, lam1, lam2, history)
                    break
        if accepted is None:
            exhausted = True
            sol.modes.append(
                SpgdMode(
                    f=np.zeros(res_shape),
                    lambda1=np.zeros(cfg.d_s),
                    lambda2=np.zeros(cfg.d_s),
                )
            )
            sol.residual_history.append([rms])
            sol.train_rms.append(rms)
            continue
        f, lam1, lam2, history = accepted
        f, lam1, lam2 = _normalize_mode(f, lam1, lam2, basis1, basis2)
        m1 = phi1 @ lam1
        m2 = phi2 @ lam2
        residual = residual - np.outer(m1 * m2, f)
        new_rms = _mode_rms(residual)
        if new_rms > rms * (1 + 1e-9) and rms > 1e-14 * data_scale:
            raise AssertionError("accepted mode increased the train residual")
        rms = new_rms
        sol.modes.append(SpgdMode(f=f.reshape(res_shape), lambda1=lam1, lambda2=lam2))
        sol.residual_history.append(history)
        sol.train_rms.append(rms)
    return sol


# ---------------------------------------------------------------------------
# evaluation and diagnostics
# ---------------------------------------------------------------------------


def evaluate(sol: SeparatedSolution, mu: MaterialPoint) -> np.ndarray:
    """Reassemble the field at one material point (zero modes contribute 0)."""
    out = np.zeros((sol.resolution, sol.resolution))
    v1 = basis_eval(sol.basis1, mu.mu1)
    v2 = basis_eval(sol.basis2, mu.mu2)
    for mode in sol.modes:
        out += mode.f * float(v1 @ mode.lambda1) * float(v2 @ mode.lambda2)
    return out


def curve_samples(sol: SeparatedSolution, mode_index: int, which: str) -> np.ndarray:
    """1000-point normalized sampling of one parametric factor.

    mode_index is 1-based (modes 1..3); which is "M1" or "M2". Values are
    mapped by the dataset-global affine map recorded for that mode index.
    """
    if mode_index not in (1, 2, 3):
        raise ValueError(f"mode_index must be 1..3, got {mode_index}")
    if which not in ("M1", "M2"):
        raise ValueError(f"which must be 'M1' or 'M2', got {which!r}")
    mode = sol.modes[mode_index - 1]
    if which == "M1":
        basis, lam = sol.basis1, mode.lambda1
        norm = sol.curve_norm_m1[mode_index - 1]
    else:
        basis, lam = sol.basis2, mode.lambda2
        norm = sol.curve_norm_m2[mode_index - 1]
    grid = np.linspace(basis.lo, basis.hi, N_CURVE_POINTS)
    return norm.forward(basis_matrix(basis, grid) @ lam)


def curve_to_lambda(basis: ParametricBasis, raw_curve: np.ndarray, ridge: float = 1e-8):
    """Project a 1000-point raw (denormalized) curve back onto the basis."""
    grid = np.linspace(basis.lo, basis.hi, len(raw_curve))
    b = basis_matrix(basis, grid)
    g = b.T @ b
    return _ridge_solve(g, b.T @ np.asarray(raw_curve, dtype=np.float64), ridge)


def mape(sol: SeparatedSolution, samples, return_details: bool = False):
    """Mean absolute percent error against held-out (MaterialPoint, field) pairs.

    Zero-valued reference pixels are excluded from the mean; their count is
    available via return_details.
    """
    if not len(samples):
        raise ValueError("mape needs at least one held-out sample")
    total = 0.0
    count = 0
    excluded = 0
    for mu, ref in samples:
        pred = evaluate(sol, mu)
        ref = np.asarray(ref, dtype=np.float64)
        keep = ref != 0
        excluded += int((~keep).sum())
        total += float(np.abs((pred[keep] - ref[keep]) / ref[keep]).sum())
        count += int(keep.sum())
    percent = 100.0 * total / count if count else float("nan")
    if excluded:
        log.info("mape excluded %d zero-reference pixels", excluded)
    if return_details:
        return percent, {"excluded_pixels": excluded, "used_pixels": count}
    return percent


# ---------------------------------------------------------------------------
# dataset-global normalization
# ---------------------------------------------------------------------------


def _map_from_values(lo: float, hi: float) -> AffineMap:
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    return AffineMap(offset=mid, scale=half if half > 1e-12 else 1.0)


def attach_normalization(solutions) -> None:
    """Compute dataset-global per-mode-index affine maps and record them.

    For each mode index, the min/max of the raw M1 curves, M2 curves, and
    spatial fields are taken across all solutions, and every solution gets
    the same maps, mapping the dataset envelope into [-1, 1].
    """
    if not solutions:
        return
    maps = {"m1": [], "m2": [], "f": []}
    for idx in range(N_STORED_MODES):
        vals = {"m1": [], "m2": [], "f": []}
        for sol in solutions:
            mode = sol.modes[idx]
            grid1 = np.linspace(sol.basis1.lo, sol.basis1.hi, N_CURVE_POINTS)
            grid2 = np.linspace(sol.basis2.lo, sol.basis2.hi, N_CURVE_POINTS)
            vals["m1"].append(basis_matrix(sol.basis1, grid1) @ mode.lambda1)
            vals["m2"].append(basis_matrix(sol.basis2, grid2) @ mode.lambda2)
            vals["f"].append(mode.f)
        for key in maps:
            stacked = np.concatenate([np.ravel(v) for v in vals[key]])
            maps[key].append(_map_from_values(float(stacked.min()), float(stacked.max())))
    for sol in solutions:
        sol.curve_norm_m1 = tuple(maps["m1"])
        sol.curve_norm_m2 = tuple(maps["m2"])
        sol.field_norm = tuple(maps["f"])


def spatial_channels(sol: SeparatedSolution) -> np.ndarray:
    """The three mode fields, each normalized by its global map: (3, res, res)."""
    return np.stack(
        [sol.field_norm[i].forward(sol.modes[i].f) for i in range(N_STORED_MODES)]
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _maps_to_list(maps):
    return [[m.offset, m.scale] for m in maps]


def _maps_from_list(vals):
    return tuple(AffineMap(offset=o, scale=s) for o, s in vals)


def solutions_to_container(solutions, meta=None) -> DatasetContainer:
    n = len(solutions)
    if n == 0:
        raise ValueError("no solutions to serialize")
    first = solutions[0]
    d = len(first.basis1.centers)
    c = DatasetContainer(
        meta={
            "count": n,
            "resolution": first.resolution,
            "basis": {
                "kind": first.basis1.kind,
                "d_s": d,
                "mu1_range": [first.basis1.lo, first.basis1.hi],
                "mu2_range": [first.basis2.lo, first.basis2.hi],
                "corr_len1": first.basis1.corr_len,
                "corr_len2": first.basis2.corr_len,
            },
            "norm": {
                "m1": _maps_to_list(first.curve_norm_m1),
                "m2": _maps_to_list(first.curve_norm_m2),
                "f": _maps_to_list(first.field_norm),
            },
            **(meta or {}),
        }
    )
    c.add("f", np.stack([[m.f for m in s.modes] for s in solutions]).astype(np.float64))
    c.add("lambda1", np.stack([[m.lambda1 for m in s.modes] for s in solutions]))
    c.add("lambda2", np.stack([[m.lambda2 for m in s.modes] for s in solutions]))
    c.add("train_rms", np.array([s.train_rms for s in solutions], dtype=np.float64))
    return c


def solutions_from_container(c: DatasetContainer):
    meta = c.meta
    b = meta["basis"]
    corr_factor = 1.5
    basis1 = make_basis(*b["mu1_range"], b["d_s"], b["kind"], corr_factor)
    basis2 = make_basis(*b["mu2_range"], b["d_s"], b["kind"], corr_factor)
    if b["kind"] == "gaussian_kriging":
        basis1 = replace(basis1, corr_len=b["corr_len1"])
        basis2 = replace(basis2, corr_len=b["corr_len2"])
    out = []
    for i in range(meta["count"]):
        modes = [
            SpgdMode(
                f=c.arrays["f"][i, j].copy(),
                lambda1=c.arrays["lambda1"][i, j].copy(),
                lambda2=c.arrays["lambda2"][i, j].copy(),
            )
            for j in range(N_STORED_MODES)
        ]
        out.append(
            SeparatedSolution(
                modes=modes,
                basis1=basis1,
                basis2=basis2,
                resolution=meta["resolution"],
                curve_norm_m1=_maps_from_list(meta["norm"]["m1"]),
                curve_norm_m2=_maps_from_list(meta["norm"]["m2"]),
                field_norm=_maps_from_list(meta["norm"]["f"]),
                train_rms=list(c.arrays["train_rms"][i]),
            )
        )
    return out
