"""Thin SVD via one-sided Jacobi, with deterministic sign conventions.

The matrices this package factors are at most a few thousand rows by a few
hundred columns, so a robust in-repo Jacobi routine is preferred over speed.
Columns of the working matrix are orthogonalized by plane rotations; the
accumulated rotations give V, column norms give the singular values, and
normalized columns give U.
"""

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ConvergenceError

MAX_SWEEPS = 60
SWEEP_TOL = 1e-12


@dataclass
class SvdResult:
    """Thin factorization m = u @ diag(s) @ v.T with orthonormal u, v."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def _fill_null_columns(u, start):
    """Complete u[:, start:] to an orthonormal set using canonical basis vectors."""
    m = u.shape[0]
    col = start
    for j in range(m):
        if col >= u.shape[1]:
            break
        cand = np.zeros(m)
        cand[j] = 1.0
        # two rounds of Gram-Schmidt for numerical safety
        for _ in range(2):
            cand -= u[:, :col] @ (u[:, :col].T @ cand)
        nrm = np.linalg.norm(cand)
        if nrm > 0.5:
            u[:, col] = cand / nrm
            col += 1
    if col < u.shape[1]:
        raise ConvergenceError("failed to complete orthonormal basis for null space")


def thin_svd(m: np.ndarray) -> SvdResult:
    """Full thin SVD of a real matrix, singular values descending.

    Raises ConvergenceError if Jacobi sweeps do not settle within the cap.
    The largest-magnitude entry of every u column is made positive (v flips
    along) so bases are reproducible run to run.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or min(m.shape) < 1:
        raise ValueError("thin_svd expects a 2D matrix with at least one row and column")
    if not np.all(np.isfinite(m)):
        raise ValueError("thin_svd input contains non-finite entries")
    transposed = m.shape[0] < m.shape[1]
    work = (m.T if transposed else m).copy()
    n = work.shape[1]
    v = np.eye(n)
    _, converged = kernels.jacobi_sweeps(work, v, MAX_SWEEPS, SWEEP_TOL)
    if not converged:
        raise ConvergenceError(
            f"one-sided Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )
    norms = np.linalg.norm(work, axis=0)
    order = np.argsort(-norms, kind="stable")
    s = norms[order]
    v = v[:, order]
    u = np.zeros_like(work)
    cutoff = s[0] * work.shape[0] * np.finfo(np.float64).eps if s[0] > 0 else 0.0
    rank = int(np.sum(s > cutoff))
    if rank > 0:
        u[:, :rank] = work[:, order[:rank]] / s[:rank]
    if rank < n:
        _fill_null_columns(u, rank)
    if transposed:
        u, v = v, u
    # sign convention: largest-|entry| of each u column positive
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return SvdResult(u=u, s=s, v=v)


def truncate(svd: SvdResult, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a thin SVD into (U_k, A) with A = diag(S_k) @ V_kᵀ.

    U_k @ A is the best rank-k_max Frobenius approximation of the
    factored matrix.
    """
    k = int(k_max)
    if k < 1 or k > svd.s.shape[0]:
        raise ValueError(f"k_max={k_max} outside [1, {svd.s.shape[0]}]")
    u_k = svd.u[:, :k].copy()
    a = svd.s[:k, None] * svd.v[:, :k].T
    return u_k, a
