"""Dispatch layer over the numba and numpy kernel implementations.

Callers import the wrappers from here; the flavor actually executed is
resolved per call from gpdesign.backend (env flag GPDESIGN_BACKEND or
set_backend), so tests and benchmarks can flip implementations at runtime.
"""

from .. import backend as _backend
from . import _numpy as _np_impl

_nb_impl = None


def _impl(group):
    global _nb_impl
    if _backend.active_backend(group) == "numba":
        if _nb_impl is None:
            from . import _numba as nb

            _nb_impl = nb
        return _nb_impl
    return _np_impl


def conv_fwd(x, w, b, stride, pad):
    return _impl("conv").conv_fwd(x, w, b, stride, pad)


def conv_dx(gy, w, stride, pad, h, wd):
    return _impl("conv").conv_dx(gy, w, stride, pad, h, wd)


def conv_dw(x, gy, stride, pad, kh, kw):
    return _impl("conv").conv_dw(x, gy, stride, pad, kh, kw)


def edt_sq(sources):
    return _impl("edt").edt_sq(sources)


def jacobi_sweeps(w, v, max_sweeps, tol):
    return _impl("jacobi").jacobi_sweeps(w, v, max_sweeps, tol)
