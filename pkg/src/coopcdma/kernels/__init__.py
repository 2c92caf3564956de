"""Hot inner-loop kernels with a numba backend and a pure-numpy fallback.

Every kernel operates on a *bank* of independent states stacked along the
leading axis, so one call advances all users of a receiver site at once.
All kernels mutate their state arguments in place.

The backend is chosen once at import time from the ``COOPCDMA_BACKEND``
environment variable (``numba`` or ``numpy``).  When unset, numba is used if
it imports cleanly.  ``COOPCDMA_DISABLE_NUMBA=1`` is accepted as a shorthand
for ``COOPCDMA_BACKEND=numpy``.

Kernels
-------
rls_update(P, u, alpha)
    Exponentially weighted rank-one inverse update
    ``P <- (P - g g^H / (alpha + u^H g)) / alpha`` with ``g = P u``.
ccm_weights(P, d, p, nu, w)
    Constrained filter ``w = P (d - p (p^H P d - nu) / (p^H P p))``.
ccm_step(P, d, w, p, r, alpha, nu, z)
    One CCM-RLS iteration on a shared observation ``r``.
upsilon_update(Y, Rinv, C, amps, alpha)
    Block-structured accumulation of the channel-estimation matrix.
power_step(Y, h, bad)
    Shifted power iteration ``h <- normalize((I - Y / tr Y) h)``.
"""

import os

from . import _numpy

BACKEND_ENV = "COOPCDMA_BACKEND"


def _requested_backend():
    if os.environ.get("COOPCDMA_DISABLE_NUMBA", "").strip() not in ("", "0"):
        return "numpy"
    name = os.environ.get(BACKEND_ENV, "").strip().lower()
    if name in ("", "auto"):
        return "auto"
    if name not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {name!r}")
    return name


def _load_numba():
    try:
        from . import _numba
    except ImportError:
        return None
    return _numba


_requested = _requested_backend()
_numba_impl = None if _requested == "numpy" else _load_numba()
if _requested == "numba" and _numba_impl is None:
    raise ImportError(f"{BACKEND_ENV}=numba but numba is not importable")

_impl = _numba_impl if _numba_impl is not None else _numpy
BACKEND = "numba" if _numba_impl is not None else "numpy"

rls_update = _impl.rls_update
ccm_weights = _impl.ccm_weights
ccm_step = _impl.ccm_step
upsilon_update = _impl.upsilon_update
power_step = _impl.power_step


def get_backend(name):
    """Return the kernel module for ``name`` ('numba' or 'numpy')."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        impl = _numba_impl or _load_numba()
        if impl is None:
            raise ImportError("numba backend unavailable")
        return impl
    raise ValueError(f"unknown backend {name!r}")


__all__ = [
    "BACKEND",
    "ccm_step",
    "ccm_weights",
    "get_backend",
    "power_step",
    "rls_update",
    "upsilon_update",
]
