"""Numba-compiled solver kernels (default backend).

Same API and math as ``numpy_impl``; loops are written out so the whole
per-iteration body stays inside one nopython region. No fastmath, no
threading: summation order is fixed, so runs are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _ce_and_pdiff(w, h, labels):
    """Mean cross-entropy and softmax-minus-onehot, column by column."""
    k, n = w.shape[0], h.shape[1]
    z = np.dot(w, h)
    p = np.empty((k, n))
    ce = 0.0
    for j in range(n):
        zmax = z[0, j]
        for i in range(1, k):
            if z[i, j] > zmax:
                zmax = z[i, j]
        denom = 0.0
        for i in range(k):
            e = np.exp(z[i, j] - zmax)
            p[i, j] = e
            denom += e
        ce += np.log(denom) + zmax - z[labels[j], j]
        for i in range(k):
            p[i, j] /= denom
        p[labels[j], j] -= 1.0
    return ce / n, p


@njit(**_JIT)
def _grads_from_pdiff(w, h, p, lam_w, lam_h):
    n = h.shape[1]
    gw = np.dot(p, np.ascontiguousarray(h.T)) / n + lam_w * w
    gh = np.dot(np.ascontiguousarray(w.T), p) / n + lam_h * h
    return gw, gh


@njit(**_JIT)
def _sq_frob(a):
    total = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            total += a[i, j] * a[i, j]
    return total


@njit(**_JIT)
def loss(w, h, labels, lam_w, lam_h):
    ce, _ = _ce_and_pdiff(w, h, labels)
    return ce + 0.5 * lam_w * _sq_frob(w) + 0.5 * lam_h * _sq_frob(h)


@njit(**_JIT)
def loss_and_grads(w, h, labels, lam_w, lam_h):
    ce, p = _ce_and_pdiff(w, h, labels)
    value = ce + 0.5 * lam_w * _sq_frob(w) + 0.5 * lam_h * _sq_frob(h)
    gw, gh = _grads_from_pdiff(w, h, p, lam_w, lam_h)
    return value, gw, gh


@njit(**_JIT)
def plain_chunk(w, h, labels, lam_w, lam_h, step, steps):
    for _ in range(steps):
        _, p = _ce_and_pdiff(w, h, labels)
        gw, gh = _grads_from_pdiff(w, h, p, lam_w, lam_h)
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                w[i, j] -= step * gw[i, j]
        for i in range(h.shape[0]):
            for j in range(h.shape[1]):
                hij = h[i, j] - step * gh[i, j]
                h[i, j] = hij if hij > 0.0 else 0.0


@njit(**_JIT)
def adam_chunk(w, h, mw, vw, mh, vh, labels, lam_w, lam_h, step, beta1, beta2, eps, t0, steps):
    for s in range(steps):
        t = t0 + s + 1
        _, p = _ce_and_pdiff(w, h, labels)
        gw, gh = _grads_from_pdiff(w, h, p, lam_w, lam_h)
        c1 = 1.0 - beta1**t
        c2 = 1.0 - beta2**t
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                g = gw[i, j]
                mw[i, j] = beta1 * mw[i, j] + (1.0 - beta1) * g
                vw[i, j] = beta2 * vw[i, j] + (1.0 - beta2) * g * g
                w[i, j] -= step * (mw[i, j] / c1) / (np.sqrt(vw[i, j] / c2) + eps)
        for i in range(h.shape[0]):
            for j in range(h.shape[1]):
                g = gh[i, j]
                mh[i, j] = beta1 * mh[i, j] + (1.0 - beta1) * g
                vh[i, j] = beta2 * vh[i, j] + (1.0 - beta2) * g * g
                hij = h[i, j] - step * (mh[i, j] / c1) / (np.sqrt(vh[i, j] / c2) + eps)
                h[i, j] = hij if hij > 0.0 else 0.0
