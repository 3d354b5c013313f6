"""Numba kernel implementations.

Same contracts as kernels._numpy, compiled with @njit. Parallel loops only
ever split over independent output slices (batch index for conv_fwd/conv_dx,
filter index for conv_dw) so results do not depend on thread count.
"""

import numpy as np
from numba import njit, prange

_INF = 1e30


@njit(cache=True, parallel=True)
def conv_fwd(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    y = np.empty((n, f, ho, wo), dtype=x.dtype)
    for ni in prange(n):
        for fi in range(f):
            for oi in range(ho):
                for oj in range(wo):
                    acc = b[fi]
                    for ci in range(c):
                        for ki in range(kh):
                            ii = oi * stride - pad + ki
                            if ii < 0 or ii >= h:
                                continue
                            for kj in range(kw):
                                jj = oj * stride - pad + kj
                                if jj < 0 or jj >= wd:
                                    continue
                                acc += x[ni, ci, ii, jj] * w[fi, ci, ki, kj]
                    y[ni, fi, oi, oj] = acc
    return y


@njit(cache=True, parallel=True)
def conv_dx(gy, w, stride, pad, h, wd):
    n, f, ho, wo = gy.shape
    c = w.shape[1]
    kh = w.shape[2]
    kw = w.shape[3]
    gx = np.zeros((n, c, h, wd), dtype=gy.dtype)
    for ni in prange(n):
        for fi in range(f):
            for oi in range(ho):
                for oj in range(wo):
                    g = gy[ni, fi, oi, oj]
                    if g == 0.0:
                        continue
                    for ci in range(c):
                        for ki in range(kh):
                            ii = oi * stride - pad + ki
                            if ii < 0 or ii >= h:
                                continue
                            for kj in range(kw):
                                jj = oj * stride - pad + kj
                                if jj < 0 or jj >= wd:
                                    continue
                                gx[ni, ci, ii, jj] += g * w[fi, ci, ki, kj]
    return gx


@njit(cache=True, parallel=True)
def conv_dw(x, gy, stride, pad, kh, kw):
    n, f, ho, wo = gy.shape
    c = x.shape[1]
    h = x.shape[2]
    wd = x.shape[3]
    gw = np.zeros((f, c, kh, kw), dtype=x.dtype)
    gb = np.zeros(f, dtype=x.dtype)
    for fi in prange(f):
        for ni in range(n):
            for oi in range(ho):
                for oj in range(wo):
                    g = gy[ni, fi, oi, oj]
                    gb[fi] += g
                    if g == 0.0:
                        continue
                    for ci in range(c):
                        for ki in range(kh):
                            ii = oi * stride - pad + ki
                            if ii < 0 or ii >= h:
                                continue
                            for kj in range(kw):
                                jj = oj * stride - pad + kj
                                if jj < 0 or jj >= wd:
                                    continue
                                gw[fi, ci, ki, kj] += g * x[ni, ci, ii, jj]
    return gw, gb


@njit(cache=True)
def _edt_1d(fvals, out, v, z):
    n = fvals.shape[0]
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
        out[q] = (q - v[k]) * (q - v[k]) + fvals[v[k]]


@njit(cache=True)
def edt_sq(sources):
    h, w = sources.shape
    d = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            d[i, j] = 0.0 if sources[i, j] != 0 else _INF
    m = max(h, w)
    f = np.empty(m, dtype=np.float64)
    out = np.empty(m, dtype=np.float64)
    v = np.empty(m, dtype=np.int64)
    z = np.empty(m + 1, dtype=np.float64)
    for j in range(w):
        for i in range(h):
            f[i] = d[i, j]
        _edt_1d(f[:h], out[:h], v, z)
        for i in range(h):
            d[i, j] = out[i]
    for i in range(h):
        for j in range(w):
            f[j] = d[i, j]
        _edt_1d(f[:w], out[:w], v, z)
        for j in range(w):
            d[i, j] = out[j]
    return d


@njit(cache=True)
def jacobi_sweeps(w, v, max_sweeps, tol):
    m, n = w.shape
    zero_floor = 0.0
    for j in range(n):
        nj = 0.0
        for i in range(m):
            nj += w[i, j] * w[i, j]
        if nj > zero_floor:
            zero_floor = nj
    zero_floor *= 1e-30
    sweeps = 0
    for _ in range(max_sweeps):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = 0.0
                aqq = 0.0
                apq = 0.0
                for i in range(m):
                    wp = w[i, p]
                    wq = w[i, q]
                    app += wp * wp
                    aqq += wq * wq
                    apq += wp * wq
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
                for i in range(m):
                    wp = w[i, p]
                    wq = w[i, q]
                    w[i, p] = c * wp - s * wq
                    w[i, q] = s * wp + c * wq
                for i in range(n):
                    vp = v[i, p]
                    vq = v[i, q]
                    v[i, p] = c * vp - s * vq
                    v[i, q] = s * vp + c * vq
                rotated += 1
        sweeps += 1
        if rotated == 0:
            return sweeps, 1
    return sweeps, 0
