"""Pure-numpy kernel implementations.

Convolutions are expressed as im2col + matmul so they ride on BLAS; the
distance transform and Jacobi sweeps are straight Python loops and exist as
the fallback for machines without numba.
"""

import numpy as np

# ---------------------------------------------------------------------------
# convolution trio
# ---------------------------------------------------------------------------


def _im2col(xp, kh, kw, stride):
    """View a padded (N,C,Hp,Wp) batch as (N*Ho*Wo, C*kh*kw) patch rows."""
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, ho, wo, c, kh, kw),
        strides=(s0, s2 * stride, s3 * stride, s1, s2, s3),
        writeable=False,
    )
    return view.reshape(n * ho * wo, c * kh * kw), ho, wo


def conv_fwd(x, w, b, stride, pad):
    """Correlate x (N,C,H,W) with w (F,C,kh,kw), add bias b (F,)."""
    n = x.shape[0]
    f, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols, ho, wo = _im2col(xp, kh, kw, stride)
    y = cols @ w.reshape(f, -1).T
    y += b
    return y.reshape(n, ho, wo, f).transpose(0, 3, 1, 2).copy()


def conv_dx(gy, w, stride, pad, h, wd):
    """Gradient of conv_fwd w.r.t. x; (h, wd) is the input spatial size."""
    n, f, ho, wo = gy.shape
    _, c, kh, kw = w.shape
    # one matmul produces every patch contribution, then each kernel offset
    # lands on its own strided slice of the padded input canvas
    gy_mat = gy.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
    cols = gy_mat @ w.reshape(f, -1)
    cols = cols.reshape(n, ho, wo, c, kh, kw)
    canvas = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=gy.dtype)
    span_h = (ho - 1) * stride + 1
    span_w = (wo - 1) * stride + 1
    for u in range(kh):
        for v in range(kw):
            canvas[:, :, u : u + span_h : stride, v : v + span_w : stride] += (
                cols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
            )
    return canvas[:, :, pad : pad + h, pad : pad + wd].copy()


def conv_dw(x, gy, stride, pad, kh, kw):
    """Gradients of conv_fwd w.r.t. w and b."""
    n, f, ho, wo = gy.shape
    c = x.shape[1]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols, _, _ = _im2col(xp, kh, kw, stride)
    gy_mat = gy.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
    gw = (gy_mat.T @ cols).reshape(f, c, kh, kw)
    gb = gy.sum(axis=(0, 2, 3))
    return gw, gb


# ---------------------------------------------------------------------------
# exact Euclidean distance transform (squared), two-pass 1D envelopes
# ---------------------------------------------------------------------------

_INF = 1e30


def _edt_1d(fvals):
    """Exact 1D squared-distance transform by lower parabola envelope."""
    n = fvals.shape[0]
    out = np.empty(n)
    v = np.zeros(n, dtype=np.int64)  # vertex index of each envelope parabola
    z = np.empty(n + 1)  # boundaries between parabolas
    k = 0
    v[0] = 0
    z[0] = -_INF
    z[1] = _INF
    for q in range(1, n):
        s = ((fvals[q] + q * q) - (fvals[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((fvals[q] + q * q) - (fvals[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = _INF
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        out[q] = (q - v[k]) ** 2 + fvals[v[k]]
    return out


def edt_sq(sources):
    """Squared Euclidean distance from each pixel to the nearest source pixel.

    sources is a 2D uint8/bool mask; distances are in pixel units. Pixels in
    a mask with no sources at all come back as a large finite sentinel.
    """
    h, w = sources.shape
    d = np.where(sources != 0, 0.0, _INF)
    for j in range(w):
        d[:, j] = _edt_1d(d[:, j])
    for i in range(h):
        d[i, :] = _edt_1d(d[i, :])
    return d


# ---------------------------------------------------------------------------
# one-sided Jacobi sweeps for the thin SVD
# ---------------------------------------------------------------------------


def jacobi_sweeps(w, v, max_sweeps, tol):
    """Orthogonalize the columns of w in place by plane rotations.

    w is (m,n) float64 and v (n,n) accumulates the same rotations starting
    from the identity, so that w_final = w_initial @ v. Returns
    (sweeps_used, converged) where converged means a full sweep performed
    no rotation: every column pair has relative inner product below tol.
    """
    n = w.shape[1]
    norms0 = np.sum(w * w, axis=0)
    zero_floor = norms0.max() * 1e-30 if n else 0.0
    sweeps = 0
    for _ in range(max_sweeps):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = np.dot(w[:, p], w[:, p])
                aqq = np.dot(w[:, q], w[:, q])
                apq = np.dot(w[:, p], w[:, q])
                if min(app, aqq) <= zero_floor:
                    continue
                if apq * apq <= tol * tol * app * aqq:
                    continue
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                wp = w[:, p].copy()
                w[:, p] = c * wp - s * w[:, q]
                w[:, q] = s * wp + c * w[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
                rotated += 1
        sweeps += 1
        if rotated == 0:
            return sweeps, 1
    return sweeps, 0
