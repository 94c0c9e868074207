"""Compiled exponential sums.

Each wave vector is summed serially in point order with Neumaier
compensation, so the parallel and serial drivers give identical bits.
"""

import math

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is too old for numba; prefer OpenMP and avoid the probe warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

TWO_PI = 2.0 * math.pi


@njit(cache=True, fastmath=False)
def _fb_one(points, kx, ky, kz):
    sr = 0.0
    cr = 0.0
    si = 0.0
    ci = 0.0
    for n in range(points.shape[0]):
        t = kx * points[n, 0] + ky * points[n, 1] + kz * points[n, 2]
        t = t - math.floor(t + 0.5)
        ph = TWO_PI * t
        xr = math.cos(ph)
        xi = -math.sin(ph)
        s = sr + xr
        if abs(sr) >= abs(xr):
            cr += (sr - s) + xr
        else:
            cr += (xr - s) + sr
        sr = s
        s = si + xi
        if abs(si) >= abs(xi):
            ci += (si - s) + xi
        else:
            ci += (xi - s) + si
        si = s
    return sr + cr, si + ci


@njit(parallel=True, cache=True, fastmath=False)
def fb_sums_parallel(points, ks, out):
    for t in prange(ks.shape[0]):
        re, im = _fb_one(points, ks[t, 0], ks[t, 1], ks[t, 2])
        out[t, 0] = re
        out[t, 1] = im


@njit(cache=True, fastmath=False)
def fb_sums_serial(points, ks, out):
    for t in range(ks.shape[0]):
        re, im = _fb_one(points, ks[t, 0], ks[t, 1], ks[t, 2])
        out[t, 0] = re
        out[t, 1] = im


def exp_sums(points: np.ndarray, ks: np.ndarray, parallel: bool = True) -> np.ndarray:
    """sum_y exp(-2 pi i k.y) for each row k, as a complex array."""
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    kk = np.ascontiguousarray(ks, dtype=np.float64).reshape(-1, 3)
    out = np.zeros((kk.shape[0], 2))
    if kk.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    if parallel:
        fb_sums_parallel(pts, kk, out)
    else:
        fb_sums_serial(pts, kk, out)
    return out[:, 0] + 1j * out[:, 1]


def set_threads_from_env(var: str = "SCD_NUM_THREADS") -> None:
    import os

    val = os.environ.get(var)
    if val:
        n = max(1, min(int(val), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)
