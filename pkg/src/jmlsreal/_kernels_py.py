"""Pure-numpy fallback for the compiled simulation kernels.

Same contracts as ``_kernels.pyx``; used when the extension is unavailable.
The state recursions are inherently sequential, so these run one numpy step
per time index.
"""

from __future__ import annotations

import numpy as np


def switched_states(A, K, idx, noise, x0):
    """State trajectory of x(t+1) = A[idx[t]] x(t) + K[idx[t]] v(t).

    A: (L, n, n), K: (L, n, m), idx: (S,) integer, noise: (S, m), x0: (n,).
    Returns X with shape (S + 1, n), X[0] = x0.
    """
    S = idx.shape[0]
    n = A.shape[1]
    X = np.empty((S + 1, n))
    x = np.array(x0, dtype=float, copy=True)
    X[0] = x
    for t in range(S):
        k = idx[t]
        x = A[k] @ x + K[k] @ noise[t]
        X[t + 1] = x
    return X


def blend_states(A, K, U, noise, x0):
    """State trajectory of x(t+1) = sum_k U[t,k] (A[k] x(t) + K[k] v(t)).

    A: (L, n, n), K: (L, n, m), U: (S, L), noise: (S, m), x0: (n,).
    Returns X with shape (S + 1, n), X[0] = x0.
    """
    S, L = U.shape
    n = A.shape[1]
    X = np.empty((S + 1, n))
    x = np.array(x0, dtype=float, copy=True)
    X[0] = x
    for t in range(S):
        acc = np.zeros(n)
        for k in range(L):
            u = U[t, k]
            if u != 0.0:
                acc += u * (A[k] @ x + K[k] @ noise[t])
        x = acc
        X[t + 1] = x
    return X
