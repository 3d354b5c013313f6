"""Kernel backend selection.

Hot numeric kernels exist in two flavors: numba @njit loops and a pure-numpy
path. The active flavor is chosen per kernel group:

* ``GPDESIGN_BACKEND=numba``  force numba everywhere (falls back to numpy
  with a warning when numba is unavailable),
* ``GPDESIGN_BACKEND=numpy``  force the pure-numpy path everywhere,
* ``GPDESIGN_BACKEND=auto``   (default) pick per group: scalar-loop kernels
  (distance transform, Jacobi sweeps) run on numba, convolution kernels run
  on the numpy/BLAS path, which is substantially faster single-core ---
  see benchmarks/bench_kernels.py.
"""

import logging
import os

log = logging.getLogger(__name__)

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    HAS_NUMBA = False

_GROUPS = ("conv", "edt", "jacobi")

# auto policy: loop-bound kernels benefit from numba, conv is BLAS-bound
_AUTO = {"conv": "numpy", "edt": "numba", "jacobi": "numba"}

_forced: str | None = None


def _env_choice() -> str:
    val = os.environ.get("GPDESIGN_BACKEND", "auto").strip().lower()
    if val not in ("auto", "numba", "numpy"):
        log.warning("unknown GPDESIGN_BACKEND=%r, using auto", val)
        return "auto"
    return val


def set_backend(name: str | None) -> None:
    """Force a backend programmatically (overrides the env flag); None resets."""
    global _forced
    if name is not None and name not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    _forced = name


def active_backend(group: str) -> str:
    """Resolve the backend ("numba" or "numpy") for a kernel group."""
    if group not in _GROUPS:
        raise ValueError(f"unknown kernel group {group!r}")
    choice = _forced if _forced is not None else _env_choice()
    if choice == "auto":
        choice = _AUTO[group]
    if choice == "numba" and not HAS_NUMBA:
        log.warning("numba unavailable, %s falls back to numpy", group)
        return "numpy"
    return choice
