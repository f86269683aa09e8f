"""Closed-form global minimizer of the nonnegative-features CE factorization.

For an instance with K classes, feature dimension d >= K, per-class counts n_k
and decay pair (lambda_w, lambda_h), the minimizer is characterized by one
scalar per class,

    Mbar_k = log((K-1) * (sqrt(n_k) / (N * sqrt((K-1)/K * lambda_w * lambda_h)) - 1)),
    M_k    = Mbar_k if Mbar_k > 0 else 0  (0 also when the log is undefined),

from which everything follows: squared class-mean norms
``sqrt((K-1)/K * (lambda_w/lambda_h) / n_k) * M_k``, pairwise-orthogonal
nonnegative class means, a classifier aligned with the scaled-and-centered
means, logits ``(K-1)/K * M_k`` on the diagonal and ``-M_k/K`` off it, margins
equal to M_k, and the optimal objective value.

Class means are only determined up to a nonnegativity-preserving rotation,
so this module fixes the canonical axis-aligned representative (class k along
coordinate axis k); every exported comparison works at the Gram level, which
is representative-invariant. Class indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProblemSpec:
    """One problem instance: class count, feature dim, counts, decay pair.

    Invariants enforced at construction: k >= 2, d >= k (the analyzed regime),
    every count >= 1, and both decay parameters finite and > 0.
    """

    k: int
    d: int
    counts: tuple[int, ...]
    lambda_w: float
    lambda_h: float

    def __post_init__(self):
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))
        object.__setattr__(self, "lambda_w", float(self.lambda_w))
        object.__setattr__(self, "lambda_h", float(self.lambda_h))
        if self.k < 2:
            raise ValueError(f"need at least 2 classes, got K={self.k}")
        if self.d < self.k:
            raise ValueError(
                f"feature dimension d={self.d} must be >= class count K={self.k}; "
                "the d < K bottleneck regime is out of scope"
            )
        if len(self.counts) != self.k:
            raise ValueError(f"expected {self.k} class counts, got {len(self.counts)}")
        if any(n < 1 for n in self.counts):
            raise ValueError("every class needs at least one sample")
        for name in ("lambda_w", "lambda_h"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")

    @property
    def n_total(self) -> int:
        return sum(self.counts)

    def counts_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.float64)

    def labels(self) -> np.ndarray:
        """Class label of each feature column, 0-based, grouped by class."""
        return np.repeat(np.arange(self.k, dtype=np.int64), self.counts)


@dataclass(frozen=True)
class ClosedFormGeometry:
    """The analytic minimizer and its derived quantities.

    m: per-class margin constants M_k (nats)
    mean_norms_sq: squared class-mean norms
    class_means: d x K canonical (axis-aligned) class-mean matrix
    classifier: K x d classifier matrix
    logits: K x K logit matrix, column k = classifier @ class_mean_k
    margins: per-class margins (equal to m)
    optimal_loss: objective value at the minimizer
    """

    m: np.ndarray
    mean_norms_sq: np.ndarray
    class_means: np.ndarray
    classifier: np.ndarray
    logits: np.ndarray
    margins: np.ndarray
    optimal_loss: float


def margin_value(
    num_classes: int, n_total: int, n_k: int, lambda_w: float, lambda_h: float
) -> float:
    """Margin constant for one class, from counts and the decay pair alone.

    Returns the positive part of Mbar_k; the undefined-logarithm case
    (inner argument <= 0) also maps to 0, i.e. a collapsed class.
    """
    denom = n_total * math.sqrt(
        (num_classes - 1) / num_classes * lambda_w * lambda_h
    )
    ratio = math.sqrt(n_k) / denom
    if ratio <= 1.0:
        return 0.0
    mbar = math.log((num_classes - 1) * (ratio - 1.0))
    return mbar if mbar > 0.0 else 0.0


def margin_constant(spec: ProblemSpec, k: int) -> float:
    """Margin constant M_k for class ``k`` (0-based)."""
    if not 0 <= k < spec.k:
        raise ValueError(f"class index {k} out of range for K={spec.k}")
    return margin_value(spec.k, spec.n_total, spec.counts[k], spec.lambda_w, spec.lambda_h)


def margin_constants(spec: ProblemSpec) -> np.ndarray:
    return np.array([margin_constant(spec, k) for k in range(spec.k)])


def class_mean_norm_sq(spec: ProblemSpec, k: int) -> float:
    """Squared norm of the k-th class mean; 0 for a collapsed class."""
    m_k = margin_constant(spec, k)
    if m_k == 0.0:
        return 0.0
    scale = math.sqrt(
        (spec.k - 1) / spec.k * (spec.lambda_w / spec.lambda_h) / spec.counts[k]
    )
    return scale * m_k


def class_mean_norms_sq(spec: ProblemSpec) -> np.ndarray:
    return np.array([class_mean_norm_sq(spec, k) for k in range(spec.k)])


def canonical_class_means(spec: ProblemSpec) -> np.ndarray:
    """Canonical d x K class-mean matrix: column k is ||h_k|| * e_k.

    Axis alignment keeps the matrix entrywise nonnegative with exactly
    orthogonal columns; d >= K guarantees enough axes.
    """
    means = np.zeros((spec.d, spec.k))
    norms = np.sqrt(class_mean_norms_sq(spec))
    means[np.arange(spec.k), np.arange(spec.k)] = norms
    return means


def classifier_from_means(spec: ProblemSpec, class_means: np.ndarray) -> np.ndarray:
    """K x d classifier whose row k is the scaled-and-centered class mean.

    Row k equals ``sqrt(lambda_h / (lambda_w * K * (K-1)))
    * (K * sqrt(n_k) * h_k - sum_m sqrt(n_m) * h_m)``; the rows sum to the
    zero vector by construction.
    """
    class_means = np.asarray(class_means, dtype=np.float64)
    if class_means.shape != (spec.d, spec.k):
        raise ValueError(
            f"class_means must be {spec.d}x{spec.k}, got {class_means.shape}"
        )
    coeff = math.sqrt(spec.lambda_h / (spec.lambda_w * spec.k * (spec.k - 1)))
    scaled = class_means * np.sqrt(spec.counts_array())  # column m = sqrt(n_m) h_m
    total = scaled.sum(axis=1)
    return coeff * (spec.k * scaled.T - total)


def logit_matrix(spec: ProblemSpec) -> np.ndarray:
    """K x K logit matrix: column k has (K-1)/K * M_k on the diagonal entry
    and -M_k/K elsewhere, so each column sums to zero."""
    m = margin_constants(spec)
    z = np.tile(-m / spec.k, (spec.k, 1))
    z[np.arange(spec.k), np.arange(spec.k)] = (spec.k - 1) / spec.k * m
    return z


def margins(spec: ProblemSpec) -> np.ndarray:
    """Per-class margin of any sample: top logit minus best rival, = M_k."""
    return margin_constants(spec)


def expand_features(class_means: np.ndarray, counts) -> np.ndarray:
    """d x N feature matrix repeating class-mean column k exactly n_k times
    (the exactly-collapsed feature matrix)."""
    class_means = np.asarray(class_means, dtype=np.float64)
    counts = [int(n) for n in counts]
    if class_means.ndim != 2 or class_means.shape[1] != len(counts):
        raise ValueError("counts must provide one entry per class-mean column")
    return np.repeat(class_means, counts, axis=1)


def closed_form_loss(spec: ProblemSpec) -> float:
    """Objective value at the global minimizer.

    Per-class CE term plus the combined regularizer: the classifier and
    feature penalties are equal at any critical point (norm balance), so the
    total regularizer is ``lambda_h * sum_k n_k ||h_k||^2``.
    """
    total = 0.0
    n_total = spec.n_total
    for k in range(spec.k):
        m_k = margin_constant(spec, k)
        total += spec.counts[k] / n_total * math.log1p((spec.k - 1) * math.exp(-m_k))
        total += spec.lambda_h * spec.counts[k] * class_mean_norm_sq(spec, k)
    return total


def closed_form_geometry(spec: ProblemSpec) -> ClosedFormGeometry:
    """Assemble the full analytic minimizer for ``spec``."""
    means = canonical_class_means(spec)
    classifier = classifier_from_means(spec, means)
    return ClosedFormGeometry(
        m=margin_constants(spec),
        mean_norms_sq=class_mean_norms_sq(spec),
        class_means=means,
        classifier=classifier,
        logits=logit_matrix(spec),
        margins=margins(spec),
        optimal_loss=closed_form_loss(spec),
    )
