"""Pure-numpy solver kernels (fallback backend).

Same API and same math as the numba backend; see package docstring.
All softmax evaluations subtract the per-column max before exponentiating.
"""

from __future__ import annotations

import numpy as np


def _softmax_terms(w, h, labels):
    """Returns (mean CE over columns, softmax-minus-onehot matrix)."""
    z = w @ h
    zmax = z.max(axis=0)
    ez = np.exp(z - zmax)
    denom = ez.sum(axis=0)
    cols = np.arange(h.shape[1])
    ce = float(np.mean(np.log(denom) + zmax - z[labels, cols]))
    p = ez / denom
    p[labels, cols] -= 1.0
    return ce, p


def loss(w, h, labels, lam_w, lam_h) -> float:
    ce, _ = _softmax_terms(w, h, labels)
    reg = 0.5 * lam_w * float(np.sum(w * w)) + 0.5 * lam_h * float(np.sum(h * h))
    return ce + reg


def loss_and_grads(w, h, labels, lam_w, lam_h):
    n = h.shape[1]
    ce, p = _softmax_terms(w, h, labels)
    value = ce + 0.5 * lam_w * float(np.sum(w * w)) + 0.5 * lam_h * float(np.sum(h * h))
    gw = (p @ h.T) / n + lam_w * w
    gh = (w.T @ p) / n + lam_h * h
    return value, gw, gh


def plain_chunk(w, h, labels, lam_w, lam_h, step, steps) -> None:
    """Fixed-step projected gradient descent, in place."""
    n = h.shape[1]
    for _ in range(steps):
        _, p = _softmax_terms(w, h, labels)
        gw = (p @ h.T) / n + lam_w * w
        gh = (w.T @ p) / n + lam_h * h
        w -= step * gw
        h -= step * gh
        np.maximum(h, 0.0, out=h)


def adam_chunk(w, h, mw, vw, mh, vh, labels, lam_w, lam_h, step, beta1, beta2, eps, t0, steps) -> None:
    """Adam with nonnegativity projection on the feature block, in place.

    ``t0`` is the number of steps already taken (bias correction continues
    from there).
    """
    n = h.shape[1]
    for s in range(steps):
        t = t0 + s + 1
        _, p = _softmax_terms(w, h, labels)
        gw = (p @ h.T) / n + lam_w * w
        gh = (w.T @ p) / n + lam_h * h

        c1 = 1.0 - beta1**t
        c2 = 1.0 - beta2**t
        for x, g, m, v in ((w, gw, mw, vw), (h, gh, mh, vh)):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            x -= step * (m / c1) / (np.sqrt(v / c2) + eps)
        np.maximum(h, 0.0, out=h)
