"""Simulation kernels with a compiled/pure-python backend selected at import.

``switched_states`` and ``blend_states`` run the sequential state recursions
that dominate simulation time. The compiled Cython extension is used when
available; otherwise the numpy fallback in ``_kernels_py`` is selected.
``BACKEND`` records which one is active.
"""

from __future__ import annotations

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built
    _impl = _kernels_py
    BACKEND = "python"


def _prep(A, K, noise, x0):
    A = np.ascontiguousarray(A, dtype=np.float64)
    K = np.ascontiguousarray(K, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return A, K, noise, x0


def switched_states(A, K, idx, noise, x0, backend=None):
    """States of x(t+1) = A[idx[t]] x(t) + K[idx[t]] v(t); returns (S+1, n)."""
    A, K, noise, x0 = _prep(A, K, noise, x0)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    impl = _resolve(backend)
    return impl.switched_states(A, K, idx, noise, x0)


def blend_states(A, K, U, noise, x0, backend=None):
    """States of x(t+1) = sum_k U[t,k](A[k] x(t) + K[k] v(t)); (S+1, n)."""
    A, K, noise, x0 = _prep(A, K, noise, x0)
    U = np.ascontiguousarray(U, dtype=np.float64)
    impl = _resolve(backend)
    return impl.blend_states(A, K, U, noise, x0)


def _resolve(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "compiled":
        if BACKEND != "compiled":
            raise RuntimeError("compiled kernels are not available")
        return _impl
    raise ValueError(f"unknown backend {backend!r}")
