"""Gaussian mixture modeling of the geometry latent space and a
descriptor-based distance between image sets.

The mixture is fitted with expectation-maximization over a range of
component counts, selecting the count by the Bayesian information
criterion. New designs come from ancestral sampling. Image sets are
compared through five morphological descriptors per image (volume
fraction, perimeter density, best-fit-ellipse aspect ratio, and the
doubled-angle orientation pair), summarizing each set as a Gaussian and
taking the Frechet distance between the two.
"""

import numpy as np
from dataclasses import dataclass, field

from .errors import ConvergenceError

_RIDGE_FLOOR = 1e-6
_RIDGE_LADDER = (1e-6, 1e-4, 1e-2)
_TOL = 1e-6
_MAX_ITERS = 500
_RESTARTS = 5


@dataclass
class GmmModel:
    n_components: int
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    covariances: np.ndarray  # (K, d, d)
    log_likelihood: float
    bic: float
    bic_by_k: dict = field(default_factory=dict)
    ridge: float = _RIDGE_FLOOR


def _chol_stats(covariances):
    """Stacked Cholesky factors with log-determinants and lower inverses."""
    chol = np.linalg.cholesky(covariances)
    diag = np.diagonal(chol, axis1=-2, axis2=-1)
    logdet = 2.0 * np.log(diag).sum(axis=-1)
    inv = np.linalg.solve(chol, np.eye(covariances.shape[-1]))
    return chol, logdet, inv


def _log_gaussians(x, means, covariances):
    """Per-component log densities, shape (n, K)."""
    d = x.shape[1]
    _, logdet, inv = _chol_stats(covariances)
    diff = x[:, None, :] - means[None, :, :]
    z = np.einsum("kde,nke->nkd", inv, diff)
    maha = (z ** 2).sum(axis=2)
    return -0.5 * (maha + logdet[None, :] + d * np.log(2.0 * np.pi))


def _ridge_penalty(covs, ridge):
    """Covariance penalty whose sum with the log-likelihood is EM-monotone."""
    _, logdet, inv = _chol_stats(covs)
    inv_trace = (inv ** 2).sum(axis=(1, 2))
    return float(-0.5 * (logdet + ridge * inv_trace).sum())


def _em_once(x, k, rng, ridge):
    """One EM run; returns (logL, weights, means, covs) or None on failure.

    The covariance step blends each component's weighted scatter with
    ridge * identity, which is the exact maximizer of the penalized
    objective logL - 0.5 * sum_j (logdet C_j + ridge * tr(C_j^-1)). That
    penalized objective is therefore guaranteed non-decreasing and is the
    quantity asserted every iteration; a plain additive ridge would break
    monotonicity whenever a component tightens onto few points.
    """
    n, d = x.shape
    idx = rng.choice(n, size=k, replace=False)
    means = x[idx].copy()
    # each component starts with its share of the data spread; full-size
    # initial covariances make surplus components take hundreds of
    # iterations to carve up the space
    base_cov = np.cov(x.T) / k + ridge * np.eye(d) if n > 1 else np.eye(d)
    covs = np.repeat(base_cov[None], k, axis=0)
    weights = np.full(k, 1.0 / k)

    prev_objective = -np.inf
    prev_ll = -np.inf
    log_likelihood = -np.inf
    norm_const = d * np.log(2.0 * np.pi)
    ridge_eye = ridge * np.eye(d)
    for _ in range(_MAX_ITERS):
        try:
            _, logdet, inv = _chol_stats(covs)
        except np.linalg.LinAlgError:
            return None
        diff = x[:, None, :] - means[None, :, :]
        z = np.einsum("kde,nke->nkd", inv, diff)
        logp = -0.5 * ((z ** 2).sum(axis=2) + logdet[None, :] + norm_const)
        logp += np.log(weights)
        penalty = float(-0.5 * (logdet + ridge * (inv ** 2).sum(axis=(1, 2))).sum())
        mx = logp.max(axis=1, keepdims=True)
        lse = mx[:, 0] + np.log(np.exp(logp - mx).sum(axis=1))
        log_likelihood = lse.sum()
        objective = log_likelihood + penalty
        if objective < prev_objective - 1e-8 * max(1.0, abs(prev_objective)):
            raise AssertionError("EM objective decreased")
        resp = np.exp(logp - lse[:, None])

        nk = resp.sum(axis=0)
        if np.any(nk < 1e-10):
            return None
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        diff = x[:, None, :] - means[None, :, :]
        scatter = np.einsum("nk,nkd,nke->kde", resp, diff, diff)
        covs = (scatter + ridge_eye[None]) / (nk + 1.0)[:, None, None]

        # stop on the raw likelihood plateau; the assertion above tracks the
        # penalized objective, which is the provably monotone quantity
        if log_likelihood - prev_ll < _TOL:
            break
        prev_ll = log_likelihood
        prev_objective = objective
    return log_likelihood, weights, means, covs


def fit_gmm(latents, k_candidates=None, seed=0) -> GmmModel:
    """EM fit over candidate component counts, selected by BIC."""
    x = np.asarray(latents, np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("latents must be a 2D array with at least two rows")
    n, d = x.shape
    if k_candidates is None:
        k_candidates = range(1, 31)
    k_candidates = [int(k) for k in k_candidates]
    if any(k < 1 for k in k_candidates):
        raise ValueError("component counts must be positive")
    if n < 2 * max(k_candidates):
        raise ValueError(
            f"need at least {2 * max(k_candidates)} samples for "
            f"K up to {max(k_candidates)}, got {n}"
        )

    rng = np.random.default_rng(seed)
    cov_params = d * (d + 1) // 2
    best = None
    bic_by_k = {}
    for k in k_candidates:
        run = None
        for ridge in _RIDGE_LADDER:
            for _ in range(_RESTARTS):
                out = _em_once(x, k, rng, ridge)
                if out is None:
                    continue
                if run is None or out[0] > run[0]:
                    run = out
                    run_ridge = ridge
            if run is not None:
                break
        if run is None:
            continue  # this K collapses at every ridge: prune it
        log_likelihood, weights, means, covs = run
        p = (k - 1) + k * d + k * cov_params
        bic = -2.0 * log_likelihood + p * np.log(n)
        bic_by_k[k] = float(bic)
        if best is None or bic < best.bic:
            best = GmmModel(k, weights, means, covs,
                            float(log_likelihood), float(bic), ridge=run_ridge)
    if best is None:
        raise ConvergenceError("no component count produced a stable fit")
    best.bic_by_k = bic_by_k
    return best


def sample_latents(gmm: GmmModel, n, seed=0):
    """Ancestral sampling: component by weight, then its Gaussian."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    comps = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    d = gmm.means.shape[1]
    out = np.empty((n, d))
    for j in range(gmm.n_components):
        sel = comps == j
        cnt = int(sel.sum())
        if cnt == 0:
            continue
        chol = np.linalg.cholesky(gmm.covariances[j])
        out[sel] = gmm.means[j] + rng.standard_normal((cnt, d)) @ chol.T
    return out


def bounds_report(samples, train_latents, inflate=3.0):
    """Fraction of samples inside the inflated training bounding box."""
    train = np.asarray(train_latents, np.float64)
    lo = train.min(axis=0) - inflate * train.std(axis=0)
    hi = train.max(axis=0) + inflate * train.std(axis=0)
    inside = np.all((samples >= lo) & (samples <= hi), axis=1)
    return float(inside.mean())


# --- descriptor distance -------------------------------------------------------


def image_descriptors(image):
    """Five morphological numbers for one binary image.

    Volume fraction, perimeter density (boundary length per unit domain
    area with unit pixel spacing 1/resolution), best-fit-ellipse aspect
    ratio from second moments, and the orientation doubled-angle pair.
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("descriptor input must be a single 2D image")
    binary = img > 0.5
    res = img.shape[0]
    vf = float(binary.mean())
    if not binary.any():
        return np.array([0.0, 0.0, 1.0, 1.0, 0.0])

    horizontal = np.count_nonzero(binary[:, 1:] != binary[:, :-1])
    vertical = np.count_nonzero(binary[1:, :] != binary[:-1, :])
    perimeter_density = (horizontal + vertical) / res

    ys, xs = np.nonzero(binary)
    coords = np.stack([xs, ys]).astype(np.float64) / res
    centered = coords - coords.mean(axis=1, keepdims=True)
    second = centered @ centered.T / coords.shape[1]
    evals, evecs = np.linalg.eigh(second)
    lo, hi = max(evals[0], 1e-12), max(evals[1], 1e-12)
    aspect = float(np.sqrt(hi / lo))
    major = evecs[:, 1]
    theta = np.arctan2(major[1], major[0])
    return np.array(
        [vf, perimeter_density, aspect, np.cos(2 * theta), np.sin(2 * theta)]
    )


def _sqrt_trace(ca, cb):
    """tr((ca cb)^{1/2}) via the symmetric similar product."""
    evals_a, evecs_a = np.linalg.eigh(ca)
    root_a = (evecs_a * np.sqrt(np.maximum(evals_a, 0.0))) @ evecs_a.T
    inner = root_a @ cb @ root_a
    evals = np.linalg.eigvalsh(inner)
    return np.sqrt(np.maximum(evals, 0.0)).sum()


def descriptor_distance(set_a, set_b):
    """Frechet distance between the descriptor Gaussians of two image sets."""
    a = np.asarray(set_a)
    b = np.asarray(set_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("both image sets must be nonempty")
    da = np.stack([image_descriptors(img) for img in a])
    db = np.stack([image_descriptors(img) for img in b])
    ma, mb = da.mean(axis=0), db.mean(axis=0)
    ridge = 1e-8 * np.eye(da.shape[1])
    ca = np.cov(da.T) + ridge if da.shape[0] > 1 else ridge.copy()
    cb = np.cov(db.T) + ridge if db.shape[0] > 1 else ridge.copy()
    gap = ((ma - mb) ** 2).sum()
    score = gap + np.trace(ca) + np.trace(cb) - 2.0 * _sqrt_trace(ca, cb)
    return float(max(score, 0.0))
