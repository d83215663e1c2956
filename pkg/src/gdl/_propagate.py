"""Exponential-midpoint stepping, pure numpy version.

The compiled twin lives in _kernels.pyx; both expose ``midpoint_batch``
with the same signature and the dispatcher in backend.py picks one.
"""

import numpy as np


def midpoint_batch(H0, V, coeffs, dt, U=None):
    """Apply prod_m exp(-i dt (H0[b] + coeffs[m] V[b])) to U[b], latest step on the left.

    H0, V: (B, n, n) Hermitian stacks.  coeffs: (M,) real.
    """
    H0 = np.ascontiguousarray(H0, dtype=complex)
    V = np.ascontiguousarray(V, dtype=complex)
    B, n, _ = H0.shape
    if U is None:
        U = np.broadcast_to(np.eye(n, dtype=complex), (B, n, n)).copy()
    else:
        U = np.array(U, dtype=complex, copy=True)
    for c in np.asarray(coeffs, dtype=float):
        w, Q = np.linalg.eigh(H0 + c * V)
        step = (Q * np.exp(-1j * dt * w)[:, None, :]) @ np.conj(np.swapaxes(Q, 1, 2))
        U = step @ U
    return U
