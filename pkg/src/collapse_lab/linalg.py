"""Dense real linear algebra for the small matrices used throughout the package.

Everything here operates on plain 2-D float64 numpy arrays (a few hundred rows
at most). The routines wrap numpy's LAPACK-backed primitives behind narrow,
validated contracts: finite entries only, symmetric input checked before
eigendecomposition, and a spectral Moore-Penrose pseudo-inverse with a relative
rank cutoff (needed because between-class covariances are exactly
rank-deficient at collapsed optima).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative eigenvalue cutoff below which a direction counts as null space.
DEFAULT_RANK_TOL = 1e-10

# Absolute-ish slack used when checking symmetry preconditions.
_SYMMETRY_TOL = 1e-9


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate ``a`` as a finite 2-D float64 matrix and return it as such."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with dimension validation.

    Delegates to numpy's BLAS matmul, which is run-to-run deterministic for
    the fixed shapes used here.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: ({a.shape[0]}x{a.shape[1]}) @ ({b.shape[0]}x{b.shape[1]})"
        )
    return a @ b


@dataclass(frozen=True)
class SymEig:
    """Spectral decomposition A = V diag(eigenvalues) V^T.

    ``eigenvalues`` are sorted descending; column i of ``eigenvectors`` pairs
    with ``eigenvalues[i]`` and the columns are orthonormal.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(a) -> SymEig:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    scale = 1.0 + (float(np.abs(a).max()) if a.size else 0.0)
    if a.size and float(np.abs(a - a.T).max()) > _SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    sym = 0.5 * (a + a.T)
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise ValueError(f"eigendecomposition did not converge: {exc}") from exc
    order = np.argsort(vals)[::-1]
    return SymEig(np.ascontiguousarray(vals[order]), np.ascontiguousarray(vecs[:, order]))


def pseudo_inverse(a, rel_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix via its spectrum.

    Eigenvalues below ``rel_tol * lambda_max`` are treated as exact zeros,
    so the inverse acts only on the retained subspace. A negative eigenvalue
    beyond the tolerance is rejected rather than silently clipped.
    """
    if not rel_tol >= 0:
        raise ValueError("rel_tol must be nonnegative")
    eig = sym_eig(a)
    vals = eig.eigenvalues
    if vals.size == 0:
        return np.zeros_like(as_matrix(a))
    lam_max = max(float(vals[0]), 0.0)
    neg_slack = rel_tol * (1.0 + float(np.abs(vals).max()))
    if float(vals[-1]) < -neg_slack:
        raise ValueError(
            f"matrix is not PSD within tolerance: eigenvalue {vals[-1]:.3e}"
        )
    # floor at the smallest normal double: subnormal eigenvalues cannot be
    # inverted meaningfully and would overflow
    cutoff = max(rel_tol * lam_max, float(np.finfo(np.float64).tiny))
    inv = np.where(vals > cutoff, 1.0, 0.0) / np.where(vals > cutoff, vals, 1.0)
    v = eig.eigenvectors
    return (v * inv) @ v.T
