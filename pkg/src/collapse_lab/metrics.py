"""Discrepancy metrics between a learned (W, H) and the predicted geometry.

Five scalars:

    nc1        within-class variability: (1/K) trace(Sigma_W pinv(Sigma_B))
    nc2_w_vs_h Frobenius gap between unit-normalized W and the
               scaled-and-centered class-mean map built from H
    nc2_wwt    gap between unit-normalized W W^T and the predicted
               classifier Gram
    nc2_hth    gap between unit-normalized Hbar^T Hbar and the predicted
               diagonal class-mean Gram
    nc3_wh     gap between unit-normalized W Hbar and the predicted logits

Covariance conventions (imbalance-consistent): Sigma_W averages squared
deviations over all N samples, Sigma_B averages over the K classes, and the
global mean is the count-weighted average of all feature columns.

Degenerate normalizations (an exactly zero matrix on either side) yield
``None`` for the nc2/nc3 metrics, and ``nc1`` returns ``inf`` when Sigma_B
vanishes while Sigma_W does not; CSV writers render both as ``undef`` so
complete-collapse runs cannot poison aggregation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analysis, geometry, linalg
from .geometry import ProblemSpec

DEFAULT_RANK_TOL = linalg.DEFAULT_RANK_TOL


@dataclass(frozen=True)
class ClassStatistics:
    """First and second-order statistics of a d x N feature matrix."""

    class_means: np.ndarray  # d x K
    global_mean: np.ndarray  # d
    sigma_w: np.ndarray  # d x d within-class covariance
    sigma_b: np.ndarray  # d x d between-class covariance


@dataclass(frozen=True)
class MetricsReport:
    """The five discrepancy scalars; None marks an undefined metric."""

    nc1: float
    nc2_w_vs_h: float | None
    nc2_wwt: float | None
    nc2_hth: float | None
    nc3_wh: float | None


def class_statistics(h: np.ndarray, counts) -> ClassStatistics:
    """Class means, count-weighted global mean, and the two covariances."""
    h = linalg.as_matrix(h, "h")
    counts = [int(n) for n in counts]
    n_total = sum(counts)
    if h.shape[1] != n_total:
        raise ValueError(f"h has {h.shape[1]} columns but counts sum to {n_total}")
    d, k = h.shape[0], len(counts)

    means = np.empty((d, k))
    sigma_w = np.zeros((d, d))
    start = 0
    for idx, n_k in enumerate(counts):
        block = h[:, start : start + n_k]
        means[:, idx] = block.mean(axis=1)
        dev = block - means[:, idx : idx + 1]
        sigma_w += dev @ dev.T
        start += n_k
    sigma_w /= n_total

    global_mean = (means * np.asarray(counts)).sum(axis=1) / n_total
    centered = means - global_mean[:, None]
    sigma_b = (centered @ centered.T) / k
    return ClassStatistics(means, global_mean, sigma_w, sigma_b)


def nc1(h: np.ndarray, counts, rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """(1/K) trace(Sigma_W pinv(Sigma_B)); 0 when features are collapsed."""
    stats = class_statistics(h, counts)
    return nc1_from_stats(stats, rank_tol)


def nc1_from_stats(stats: ClassStatistics, rank_tol: float = DEFAULT_RANK_TOL) -> float:
    k = stats.class_means.shape[1]
    if not np.any(stats.sigma_b):
        # degenerate: no between-class spread at all
        return 0.0 if not np.any(stats.sigma_w) else math.inf
    pinv_b = linalg.pseudo_inverse(stats.sigma_b, rank_tol)
    return float(np.trace(stats.sigma_w @ pinv_b)) / k


def _unit(a: np.ndarray) -> np.ndarray | None:
    norm = float(np.linalg.norm(a))
    if norm < np.finfo(np.float64).tiny:
        return None
    return a / norm


def _unit_gap(a: np.ndarray, b: np.ndarray) -> float | None:
    ua, ub = _unit(a), _unit(b)
    if ua is None or ub is None:
        return None
    return float(np.linalg.norm(ua - ub))


def scaled_centered_map(class_means: np.ndarray, counts) -> np.ndarray:
    """K x d matrix with row k = K sqrt(n_k) h_k^T - sum_m sqrt(n_m) h_m^T."""
    class_means = linalg.as_matrix(class_means, "class_means")
    counts = np.asarray([int(n) for n in counts], dtype=np.float64)
    if class_means.shape[1] != counts.size:
        raise ValueError("counts must provide one entry per class-mean column")
    k = counts.size
    scaled = class_means * np.sqrt(counts)
    return k * scaled.T - scaled.sum(axis=1)


def nc2_w_vs_h(w: np.ndarray, class_means: np.ndarray, counts) -> float | None:
    """Gap between unit-normalized W and the scaled-and-centered mean map."""
    w = linalg.as_matrix(w, "w")
    predicted = scaled_centered_map(class_means, counts)
    if w.shape != predicted.shape:
        raise ValueError(f"w must be {predicted.shape}, got {w.shape}")
    return _unit_gap(w, predicted)


def nc2_wwt(w: np.ndarray, spec: ProblemSpec) -> float | None:
    """Gap between unit-normalized W W^T and the predicted classifier Gram."""
    w = linalg.as_matrix(w, "w")
    if w.shape != (spec.k, spec.d):
        raise ValueError(f"w must be {spec.k}x{spec.d}, got {w.shape}")
    return _unit_gap(w @ w.T, analysis.classifier_gram(spec))


def nc2_hth(class_means: np.ndarray, spec: ProblemSpec) -> float | None:
    """Gap between unit-normalized Hbar^T Hbar and the predicted diagonal Gram."""
    class_means = linalg.as_matrix(class_means, "class_means")
    if class_means.shape != (spec.d, spec.k):
        raise ValueError(f"class_means must be {spec.d}x{spec.k}, got {class_means.shape}")
    target = np.diag(geometry.class_mean_norms_sq(spec))
    return _unit_gap(class_means.T @ class_means, target)


def nc3_wh(w: np.ndarray, class_means: np.ndarray, spec: ProblemSpec) -> float | None:
    """Gap between unit-normalized W Hbar and the predicted logit matrix."""
    w = linalg.as_matrix(w, "w")
    class_means = linalg.as_matrix(class_means, "class_means")
    if w.shape != (spec.k, spec.d) or class_means.shape != (spec.d, spec.k):
        raise ValueError("shapes inconsistent with spec")
    return _unit_gap(w @ class_means, geometry.logit_matrix(spec))


def report(
    w: np.ndarray, h: np.ndarray, spec: ProblemSpec, rank_tol: float = DEFAULT_RANK_TOL
) -> MetricsReport:
    """All five metrics of a learned (w, h) against the predicted geometry."""
    stats = class_statistics(h, spec.counts)
    return MetricsReport(
        nc1=nc1_from_stats(stats, rank_tol),
        nc2_w_vs_h=nc2_w_vs_h(w, stats.class_means, spec.counts),
        nc2_wwt=nc2_wwt(w, spec),
        nc2_hth=nc2_hth(stats.class_means, spec),
        nc3_wh=nc3_wh(w, stats.class_means, spec),
    )
