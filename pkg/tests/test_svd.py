"""Thin-SVD checks against an independent factorization (numpy.linalg.svd)
and against constructed matrices with known singular structure."""

import numpy as np
import pytest

from gpdesign.errors import ConvergenceError
from gpdesign.numkit import thin_svd, truncate
from gpdesign.numkit import svd as svd_mod


def reconstruct(r):
    return r.u @ np.diag(r.s) @ r.v.T


def test_diagonal_matrix():
    r = thin_svd(np.diag([3.0, 1.0]))
    assert np.allclose(r.s, [3.0, 1.0], atol=1e-12)
    assert np.allclose(np.abs(r.u), np.eye(2), atol=1e-12)
    assert np.allclose(np.abs(r.v), np.eye(2), atol=1e-12)


def test_identity():
    r = thin_svd(np.eye(4))
    assert np.allclose(r.s, np.ones(4), atol=1e-12)


def test_rank_one_outer_product():
    rng = np.random.default_rng(7)
    a = rng.standard_normal(5)
    b = rng.standard_normal(4)
    r = thin_svd(np.outer(a, b))
    assert abs(r.s[0] - np.linalg.norm(a) * np.linalg.norm(b)) < 1e-10
    assert np.all(r.s[1:] < 1e-10 * r.s[0] + 1e-12)


def test_orthonormality_and_order_on_random_matrices():
    rng = np.random.default_rng(11)
    for trial in range(200):
        rows = int(rng.integers(1, 65))
        cols = int(rng.integers(1, 49))
        m = rng.standard_normal((rows, cols)) * 10 ** rng.uniform(-2, 2)
        r = thin_svd(m)
        k = min(rows, cols)
        assert r.u.shape == (rows, k) and r.v.shape == (cols, k)
        assert np.abs(r.u.T @ r.u - np.eye(k)).max() < 1e-9
        assert np.abs(r.v.T @ r.v - np.eye(k)).max() < 1e-9
        assert np.all(r.s >= 0)
        assert np.all(np.diff(r.s) <= 1e-12 * max(r.s[0], 1.0))


def test_singular_values_match_lapack():
    rng = np.random.default_rng(3)
    for shape in [(30, 20), (20, 30), (17, 17), (64, 48)]:
        m = rng.standard_normal(shape)
        r = thin_svd(m)
        ref = np.linalg.svd(m, compute_uv=False)
        assert np.abs(r.s - ref).max() < 1e-10 * max(1.0, ref[0])


def test_reconstruction_tolerance():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((40, 25))
    r = thin_svd(m)
    rel = np.linalg.norm(reconstruct(r) - m) / np.linalg.norm(m)
    assert rel < 1e-9


def test_eckart_young():
    rng = np.random.default_rng(13)
    m = rng.standard_normal((24, 18))
    r = thin_svd(m)
    for k in (1, 3, 7, 18):
        u_k, a = truncate(r, k)
        err = np.linalg.norm(m - u_k @ a)
        expected = np.sqrt(np.sum(r.s[k:] ** 2))
        assert err == pytest.approx(expected, rel=1e-8, abs=1e-10)


def test_truncate_rank_two_input():
    rng = np.random.default_rng(17)
    m = np.outer(rng.standard_normal(12), rng.standard_normal(9))
    m += np.outer(rng.standard_normal(12), rng.standard_normal(9))
    u_k, a = truncate(thin_svd(m), 2)
    assert np.linalg.norm(m - u_k @ a) / np.linalg.norm(m) < 1e-10


def test_truncate_full_rank_is_exact():
    rng = np.random.default_rng(19)
    m = rng.standard_normal((10, 6))
    u_k, a = truncate(thin_svd(m), 6)
    assert np.allclose(u_k @ a, m, atol=1e-10)


def test_truncate_keeps_dominant_direction():
    u_k, a = truncate(thin_svd(np.diag([3.0, 1.0])), 1)
    assert np.allclose(u_k @ a, np.diag([3.0, 0.0]), atol=1e-12)


def test_truncate_rejects_bad_k():
    r = thin_svd(np.eye(3))
    with pytest.raises(ValueError):
        truncate(r, 0)
    with pytest.raises(ValueError):
        truncate(r, 4)


def test_sign_convention():
    rng = np.random.default_rng(23)
    r = thin_svd(rng.standard_normal((15, 8)))
    for j in range(8):
        i = np.argmax(np.abs(r.u[:, j]))
        assert r.u[i, j] > 0


def test_rejects_nonfinite():
    m = np.eye(3)
    m[1, 1] = np.nan
    with pytest.raises(ValueError):
        thin_svd(m)


def test_zero_matrix():
    r = thin_svd(np.zeros((5, 3)))
    assert np.allclose(r.s, 0.0)
    assert np.abs(r.u.T @ r.u - np.eye(3)).max() < 1e-12


def test_convergence_cap_raises(monkeypatch):
    monkeypatch.setattr(svd_mod, "MAX_SWEEPS", 1)
    rng = np.random.default_rng(29)
    with pytest.raises(ConvergenceError):
        thin_svd(rng.standard_normal((40, 30)))
