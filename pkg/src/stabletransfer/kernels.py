"""Hot numeric kernels with a numba path and a pure-numpy path.

Every kernel exists twice: ``_name_loop`` is written as explicit loops and
compiled by numba when available, ``_name_np`` is the vectorized numpy
version.  The public wrapper picks one according to :mod:`._accel`, and
accepts ``backend="numpy"`` / ``backend="numba"`` to force a path (used by
the tests and the benchmark).

Summation order is fixed: frequencies/nodes are accumulated in storage order.
"""
from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, njit

_CHUNK = 512


# --- exponential sums -------------------------------------------------------

def _exp_sum_loop(re_pts, im_pts, freqs, coeffs, sign):
    npts = re_pts.shape[0]
    nfreq = freqs.shape[0]
    dim = freqs.shape[1]
    out = np.zeros(npts, dtype=np.complex128)
    for p in range(npts):
        acc = 0.0 + 0.0j
        for k in range(nfreq):
            a = 0.0
            b = 0.0
            for j in range(dim):
                a += re_pts[p, j] * freqs[k, j]
                b += im_pts[p, j] * freqs[k, j]
            acc += coeffs[k] * np.exp(sign * a) * (np.cos(sign * b) + 1j * np.sin(sign * b))
        out[p] = acc
    return out


_exp_sum_compiled = njit(_exp_sum_loop)


def _exp_sum_np(re_pts, im_pts, freqs, coeffs, sign):
    out = np.empty(re_pts.shape[0], dtype=np.complex128)
    for start in range(0, re_pts.shape[0], _CHUNK):
        stop = start + _CHUNK
        a = re_pts[start:stop] @ freqs.T
        b = im_pts[start:stop] @ freqs.T
        terms = coeffs[None, :] * np.exp(sign * a) * (np.cos(sign * b) + 1j * np.sin(sign * b))
        out[start:stop] = terms.sum(axis=1)
    return out


def exp_sum(im_pts, freqs, coeffs, sign=1.0, re_pts=None, backend=None):
    """Evaluate ``sum_k c_k exp(sign * <re + i*im, x_k>)`` at each point.

    Parameters
    ----------
    im_pts : (P, d) array
        Imaginary-axis coordinates (the unitary directions).
    freqs : (K, d) array
        Frequencies ``x_k``.
    coeffs : (K,) complex array
    sign : float
        +1 or -1.
    re_pts : (P, d) array, optional
        Real parts (growth directions); zero when omitted.
    """
    im_pts = np.ascontiguousarray(np.atleast_2d(np.asarray(im_pts, dtype=np.float64)))
    freqs = np.ascontiguousarray(np.asarray(freqs, dtype=np.float64).reshape(-1, im_pts.shape[1]))
    coeffs = np.ascontiguousarray(np.asarray(coeffs, dtype=np.complex128).ravel())
    if re_pts is None:
        re_pts = np.zeros_like(im_pts)
    else:
        re_pts = np.ascontiguousarray(np.atleast_2d(np.asarray(re_pts, dtype=np.float64)))
    if freqs.shape[0] == 0:
        return np.zeros(im_pts.shape[0], dtype=np.complex128)
    if _use_numba(backend):
        return _exp_sum_compiled(re_pts, im_pts, freqs, coeffs, float(sign))
    return _exp_sum_np(re_pts, im_pts, freqs, coeffs, float(sign))


# --- weighted Hermitian Gram matrix -----------------------------------------

def _gram_loop(values, weights):
    n = values.shape[0]
    q = values.shape[1]
    out = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(i, n):
            acc = 0.0 + 0.0j
            for k in range(q):
                acc += weights[k] * values[i, k] * np.conj(values[j, k])
            out[i, j] = acc
            out[j, i] = np.conj(acc)
    return out


_gram_compiled = njit(_gram_loop)


def _gram_np(values, weights):
    return (values * weights[None, :]) @ values.conj().T


def hermitian_gram(values, weights, backend=None):
    """``G[i, j] = sum_k w_k v[i, k] conj(v[j, k])``.

    A BLAS matmul beats the compiled loop here, so the numba path only runs
    when ``backend="numba"`` is passed explicitly.
    """
    values = np.ascontiguousarray(np.asarray(values, dtype=np.complex128))
    weights = np.ascontiguousarray(np.asarray(weights, dtype=np.float64))
    if backend is not None and _use_numba(backend):
        return _gram_compiled(values, weights)
    return _gram_np(values, weights)


# --- multilinear interpolation on a uniform cube grid -----------------------

def _interp_loop(samples, npts_axis, lower, step, points):
    dim = points.shape[1]
    out = np.zeros(points.shape[0], dtype=np.complex128)
    idx = np.zeros(dim, dtype=np.int64)
    frac = np.zeros(dim)
    for p in range(points.shape[0]):
        for j in range(dim):
            t = (points[p, j] - lower) / step
            i0 = int(np.floor(t))
            if i0 >= npts_axis - 1:
                i0 = npts_axis - 2
            if i0 < 0:
                i0 = 0
            idx[j] = i0
            frac[j] = t - i0
        acc = 0.0 + 0.0j
        for corner in range(1 << dim):
            w = 1.0
            flat = 0
            for j in range(dim):
                bit = (corner >> j) & 1
                if bit:
                    w *= frac[j]
                else:
                    w *= 1.0 - frac[j]
                flat = flat * npts_axis + idx[j] + bit
            if w != 0.0:
                acc += w * samples[flat]
        out[p] = acc
    return out


_interp_compiled = njit(_interp_loop)


def _interp_np(samples, npts_axis, lower, step, points):
    dim = points.shape[1]
    t = (points - lower) / step
    i0 = np.clip(np.floor(t).astype(np.int64), 0, npts_axis - 2)
    frac = t - i0
    out = np.zeros(points.shape[0], dtype=np.complex128)
    for corner in range(1 << dim):
        w = np.ones(points.shape[0])
        flat = np.zeros(points.shape[0], dtype=np.int64)
        for j in range(dim):
            bit = (corner >> j) & 1
            w = w * (frac[:, j] if bit else 1.0 - frac[:, j])
            flat = flat * npts_axis + i0[:, j] + bit
        out += w * samples[flat]
    return out


def multilinear_interp(samples, lower, step, points, backend=None):
    """Interpolate cube-grid samples (shape ``(n,)*d``) at ``points`` (P, d).

    Grid nodes are ``lower + step * i`` along each axis.  Points must lie in the
    grid window; callers check this.
    """
    samples = np.asarray(samples, dtype=np.complex128)
    npts_axis = samples.shape[0]
    flat = np.ascontiguousarray(samples.reshape(-1))
    points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=np.float64)))
    if _use_numba(backend):
        return _interp_compiled(flat, npts_axis, float(lower), float(step), points)
    return _interp_np(flat, npts_axis, float(lower), float(step), points)


def _use_numba(backend):
    if backend is None:
        return HAVE_NUMBA
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"unknown backend {backend!r}")
