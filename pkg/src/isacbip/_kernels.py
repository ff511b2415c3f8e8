"""Hot numeric kernels, JIT-compiled when numba is available.

The pure-numpy twins are the reference implementations; the numba builds
must match them to float tolerance (see tests/test_kernels.py). Selection:

* ``ISACBIP_NO_NUMBA=1`` in the environment forces the numpy path,
* otherwise numba is used when importable.

FFT-dominated stages elsewhere in the package stay on numpy's pocketfft,
which numba cannot accelerate; the kernels here are the sequential filter
loop and the antenna power reduction, where JIT pays off.
"""

import os

import numpy as np

try:  # pragma: no cover - exercised via env flag in tests
    if os.environ.get("ISACBIP_NO_NUMBA", "") not in ("", "0"):
        raise ImportError("numba disabled by ISACBIP_NO_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def kalman_core_py(z, has_meas, r_diag, F, Q, x0, P0):
    """Run a linear Kalman filter measuring the first 4 of 6 state entries.

    Parameters
    ----------
    z : (n, 4) measurements [x, y, vx, vy]
    has_meas : (n,) bool, False -> predict-only step
    r_diag : (n, 4) per-step measurement variances
    F, Q : (6, 6) transition and process-noise matrices
    x0, P0 : initial state and covariance

    Returns
    -------
    states : (n, 6) filtered state per step
    P : final covariance (Joseph-form updates keep it symmetric)
    """
    n = z.shape[0]
    x = x0.copy()
    P = P0.copy()
    out = np.empty((n, 6))
    I6 = np.eye(6)
    H = np.zeros((4, 6))
    for i in range(4):
        H[i, i] = 1.0
    for k in range(n):
        x = F @ x
        P = F @ P @ F.T + Q
        if has_meas[k]:
            S = P[:4, :4].copy()
            for i in range(4):
                S[i, i] += r_diag[k, i]
            K = np.linalg.solve(S, P[:4, :]).T
            x = x + K @ (z[k] - x[:4])
            IKH = I6 - K @ H
            P = IKH @ P @ IKH.T + (K * r_diag[k]) @ K.T
            P = 0.5 * (P + P.T)
        out[k] = x
    return out, P


def noncoherent_power_py(Z):
    """Sum |Z|^2 over the leading (antenna) axis of a (P, K, F) array."""
    return (Z.real * Z.real + Z.imag * Z.imag).sum(axis=0)


if NUMBA_ENABLED:

    @njit(cache=True)
    def _kalman_core_nb(z, has_meas, r_diag, F, Q, x0, P0):  # pragma: no cover
        n = z.shape[0]
        x = x0.copy()
        P = P0.copy()
        out = np.empty((n, 6))
        I6 = np.eye(6)
        H = np.zeros((4, 6))
        for i in range(4):
            H[i, i] = 1.0
        for k in range(n):
            x = F @ x
            P = F @ P @ F.T + Q
            if has_meas[k]:
                S = P[:4, :4].copy()
                for i in range(4):
                    S[i, i] += r_diag[k, i]
                K = np.linalg.solve(S, P[:4, :].copy()).T
                x = x + K @ (z[k] - x[:4])
                IKH = I6 - K @ H
                P = IKH @ P @ IKH.T
                for i in range(6):
                    for j in range(6):
                        acc = 0.0
                        for m in range(4):
                            acc += K[i, m] * r_diag[k, m] * K[j, m]
                        P[i, j] += acc
                for i in range(6):
                    for j in range(i + 1, 6):
                        v = 0.5 * (P[i, j] + P[j, i])
                        P[i, j] = v
                        P[j, i] = v
            out[k] = x
        return out, P

    @njit(cache=True)
    def _noncoherent_power_nb(Z):  # pragma: no cover
        p, k, f = Z.shape
        out = np.zeros((k, f))
        for a in range(p):
            for i in range(k):
                for j in range(f):
                    v = Z[a, i, j]
                    out[i, j] += v.real * v.real + v.imag * v.imag
        return out

    kalman_core = _kalman_core_nb
    noncoherent_power = _noncoherent_power_nb
else:
    kalman_core = kalman_core_py
    noncoherent_power = noncoherent_power_py
