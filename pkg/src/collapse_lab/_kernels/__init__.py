"""Backend dispatch for the solver's hot inner loops.

Two interchangeable implementations of the same kernel API live here:
``numba_impl`` (JIT-compiled, the default when numba imports cleanly) and
``numpy_impl`` (pure vectorized numpy). Selection is controlled by the
``COLLAPSE_LAB_BACKEND`` environment variable:

    COLLAPSE_LAB_BACKEND=auto    numba if available, else numpy (default)
    COLLAPSE_LAB_BACKEND=numba   force the JIT kernels (error if unavailable)
    COLLAPSE_LAB_BACKEND=numpy   force the pure-numpy fallback

Kernel API (both modules):
    loss(w, h, labels, lam_w, lam_h) -> float
    loss_and_grads(w, h, labels, lam_w, lam_h) -> (loss, gw, gh)
    plain_chunk(w, h, labels, lam_w, lam_h, step, steps) -> None       (in place)
    adam_chunk(w, h, mw, vw, mh, vh, labels, lam_w, lam_h, step,
               beta1, beta2, eps, t0, steps) -> None                   (in place)
"""

from __future__ import annotations

import os

from . import numpy_impl

_BACKENDS = {"numpy": numpy_impl}

try:  # pragma: no cover - exercised implicitly on import
    from . import numba_impl

    _BACKENDS["numba"] = numba_impl
    _NUMBA_IMPORT_ERROR = None
except ImportError as exc:  # pragma: no cover
    numba_impl = None
    _NUMBA_IMPORT_ERROR = exc


def active_backend() -> str:
    """Resolve the backend name for the current environment settings."""
    choice = os.environ.get("COLLAPSE_LAB_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if "numba" in _BACKENDS else "numpy"
    if choice not in ("numpy", "numba"):
        raise ValueError(
            f"COLLAPSE_LAB_BACKEND={choice!r} not recognized; use auto, numba or numpy"
        )
    if choice == "numba" and "numba" not in _BACKENDS:
        raise RuntimeError(
            f"COLLAPSE_LAB_BACKEND=numba but numba is unavailable: {_NUMBA_IMPORT_ERROR}"
        )
    return choice


def get_kernels(name: str | None = None):
    """Return the kernel module for ``name`` (default: active backend)."""
    return _BACKENDS[name if name is not None else active_backend()]
