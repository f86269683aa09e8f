"""Derived analytic quantities: classifier Gram, norm ratios, classifier
angles in the two-group setting, collapse thresholds, and the comparison
against the SELI geometry of the margin-maximization problem.

Everything here is a closed-form function of the margin constants M_k; the
companion tests cross-check each formula against Grams of the explicitly
constructed minimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .geometry import ProblemSpec, margin_constants, margin_value


@dataclass(frozen=True)
class TwoGroupSpec:
    """K_A majority classes with n_a samples each, K_B minority with n_b."""

    k_a: int
    k_b: int
    n_a: int
    n_b: int
    lambda_w: float
    lambda_h: float

    def __post_init__(self):
        if self.k_a < 1 or self.k_b < 1 or self.k_a + self.k_b < 2:
            raise ValueError("need at least one class per group and K >= 2")
        if not self.n_a >= self.n_b >= 1:
            raise ValueError("need n_a >= n_b >= 1")
        if not (self.lambda_w > 0 and self.lambda_h > 0):
            raise ValueError("decay parameters must be > 0")

    @property
    def k(self) -> int:
        return self.k_a + self.k_b

    @property
    def n_total(self) -> int:
        return self.k_a * self.n_a + self.k_b * self.n_b

    @property
    def ratio(self) -> float:
        """Imbalance ratio R = n_a / n_b >= 1."""
        return self.n_a / self.n_b

    def counts(self) -> tuple[int, ...]:
        return (self.n_a,) * self.k_a + (self.n_b,) * self.k_b

    def to_problem_spec(self, d: int | None = None) -> ProblemSpec:
        return ProblemSpec(
            k=self.k,
            d=self.k if d is None else d,
            counts=self.counts(),
            lambda_w=self.lambda_w,
            lambda_h=self.lambda_h,
        )

    def margin_pair(self) -> tuple[float, float]:
        """(M_A, M_B) at this spec's decay pair."""
        m_a = margin_value(self.k, self.n_total, self.n_a, self.lambda_w, self.lambda_h)
        m_b = margin_value(self.k, self.n_total, self.n_b, self.lambda_w, self.lambda_h)
        return m_a, m_b


@dataclass(frozen=True)
class CollapseReport:
    """Collapse threshold and per-class flags.

    ``collapsed[k]`` iff n_k <= threshold iff M_k = 0. ``minority_collapse``
    means at least one class collapsed (the smallest collapses first);
    ``complete_collapse`` means every class did, i.e. the optimum is (0, 0).
    ``minority_ratio_bound`` is the two-group imbalance-ratio bound (None
    when the spec has no unambiguous two-group structure).
    """

    threshold: float
    collapsed: tuple[bool, ...]
    minority_collapse: bool
    complete_collapse: bool
    minority_ratio_bound: float | None


@dataclass(frozen=True)
class SeliComparison:
    """Our normalized Grams vs the SELI geometry in the (R, 1/2) setting.

    All matrices are unit-Frobenius. ``gram_*_limit`` are the vanishing-decay
    limits of our Grams. Gaps are Frobenius distances of ours to SELI at the
    given (finite) decay pair; the distance choice on unit-normalized Grams
    is ours, as reports note.
    """

    gram_w_ours: np.ndarray
    gram_h_centered_ours: np.ndarray
    gram_w_seli: np.ndarray
    gram_h_seli: np.ndarray
    gram_w_limit: np.ndarray
    gram_h_centered_limit: np.ndarray
    frobenius_gap_w: float
    frobenius_gap_h: float
    m_ratio_at_lambda: float


def classifier_gram(spec: ProblemSpec) -> np.ndarray:
    """Predicted K x K classifier Gram W W^T.

    With s_k = sqrt(n_k) M_k, S = sum_m s_m and
    alpha = sqrt(lambda_h/lambda_w) / (K sqrt(K (K-1))):
    diagonal alpha * ((K-1)^2 s_k + S - s_k), off-diagonal
    alpha * (S - K (s_k + s_j)).
    """
    k = spec.k
    alpha = math.sqrt(spec.lambda_h / spec.lambda_w) / (k * math.sqrt(k * (k - 1)))
    s = np.sqrt(spec.counts_array()) * margin_constants(spec)
    total = float(s.sum())
    gram = total - k * (s[:, None] + s[None, :])
    np.fill_diagonal(gram, total + k * (k - 2) * s)
    return alpha * gram


def norm_ratios(spec: ProblemSpec, i: int, j: int) -> tuple[float, float]:
    """(||w_i||^2 / ||w_j||^2, ||h_i||^2 / ||h_j||^2).

    The feature ratio equals sqrt(n_j / n_i) * M_i / M_j and is undefined
    when class j is collapsed (M_j = 0).
    """
    for idx in (i, j):
        if not 0 <= idx < spec.k:
            raise ValueError(f"class index {idx} out of range for K={spec.k}")
    m = margin_constants(spec)
    if m[j] == 0.0:
        raise ValueError(f"feature-norm ratio undefined: class {j} is collapsed (M = 0)")
    diag = np.diag(classifier_gram(spec))
    if diag[j] == 0.0:
        raise ValueError("classifier-norm ratio undefined: complete collapse")
    w_ratio = float(diag[i] / diag[j])
    h_ratio = math.sqrt(spec.counts[j] / spec.counts[i]) * float(m[i] / m[j])
    return w_ratio, h_ratio


def classifier_angles(two: TwoGroupSpec) -> tuple[float, float, float]:
    """(cos within majority, cos within minority, cos majority-minority).

    Within-group cosines need groups of size >= 2. The within-majority
    cosine never exceeds the within-minority one; violating that would be a
    broken invariant, so it is asserted here.
    """
    if two.k_a < 2 or two.k_b < 2:
        raise ValueError("within-group angles need both groups of size >= 2")
    m_a, m_b = two.margin_pair()
    if m_a == 0.0:
        raise ValueError("complete collapse: classifier angles undefined")
    k = two.k
    sa, sb = math.sqrt(two.n_a) * m_a, math.sqrt(two.n_b) * m_b
    cos_maj = 1.0 - k**2 * sa / (k * (k - 1) * sa - two.k_b * sa + two.k_b * sb)
    cos_min = 1.0 - k**2 * sb / (k * (k - 1) * sb - two.k_a * sb + two.k_a * sa)

    # cross cosine from the classifier Gram (indices: one per group)
    gram = classifier_gram(two.to_problem_spec())
    cross = gram[0, two.k_a]
    cos_cross = float(cross / math.sqrt(gram[0, 0] * gram[two.k_a, two.k_a]))

    if not cos_maj <= cos_min + 1e-12:
        raise AssertionError(
            f"angle ordering violated: cos_maj={cos_maj} > cos_min={cos_min}"
        )
    return float(cos_maj), float(cos_min), cos_cross


def _two_group_view(counts) -> tuple[int, int] | None:
    """(k_a, k_b) when counts take exactly two distinct values, else None."""
    values = sorted(set(counts), reverse=True)
    if len(values) != 2:
        return None
    return sum(1 for n in counts if n == values[0]), sum(1 for n in counts if n == values[1])


def collapse_report(spec: ProblemSpec) -> CollapseReport:
    """Per-class collapse flags and the threshold C = N^2 K/(K-1) lw lh."""
    k, n_total = spec.k, spec.n_total
    threshold = n_total**2 * (k / (k - 1)) * spec.lambda_w * spec.lambda_h
    collapsed = tuple(n <= threshold for n in spec.counts)
    bound = None
    view = _two_group_view(spec.counts)
    if view is not None:
        k_a, k_b = view
        bound = (
            (k - 1) / (n_total * k * spec.lambda_w * spec.lambda_h) - k_b
        ) / k_a
    return CollapseReport(
        threshold=threshold,
        collapsed=collapsed,
        minority_collapse=any(collapsed),
        complete_collapse=all(collapsed),
        minority_ratio_bound=bound,
    )


def two_group_from_counts(counts, lambda_w: float, lambda_h: float) -> TwoGroupSpec:
    """Interpret a count vector as a two-group spec.

    Counts must be the majority block followed by the minority block (at most
    two distinct values). Balanced counts split into two equal groups with
    R = 1, which requires an even class count.
    """
    counts = tuple(int(n) for n in counts)
    values = sorted(set(counts), reverse=True)
    if len(values) == 1:
        if len(counts) % 2 != 0:
            raise ValueError("balanced counts need an even class count for a two-group view")
        half = len(counts) // 2
        return TwoGroupSpec(half, half, values[0], values[0], lambda_w, lambda_h)
    if len(values) != 2:
        raise ValueError(f"not a two-group count vector: {counts}")
    n_a, n_b = values
    k_a = sum(1 for n in counts if n == n_a)
    if counts != (n_a,) * k_a + (n_b,) * (len(counts) - k_a):
        raise ValueError("two-group counts must list the majority block first")
    return TwoGroupSpec(k_a, len(counts) - k_a, n_a, n_b, lambda_w, lambda_h)


def m_ratio_limit(n_i: int, n_j: int, num_classes: int, n_total: int, lam: float) -> float:
    """M_i / M_j at the decay pair (lam, lam); tends to 1 as lam -> 0."""
    m_i = margin_value(num_classes, n_total, n_i, lam, lam)
    m_j = margin_value(num_classes, n_total, n_j, lam, lam)
    if m_i == 0.0 or m_j == 0.0:
        raise ValueError(f"collapsed class at lambda={lam}: ratio undefined")
    return m_i / m_j


def two_group_blocks(a: float, b: float, k: int) -> np.ndarray:
    """K x K two-group block matrix with majority-block scale a, minority b.

    This is the common shape of our Grams in the (R, 1/2) setting:
    diag a(1 - 3/(2K)) + b/(2K) and off-diag -3a/(2K) + b/(2K) in the
    majority block, symmetrically for the minority block, and
    -(a + b)/(2K) across.
    """
    if k < 2 or k % 2 != 0:
        raise ValueError("two-group blocks need an even K >= 2")
    g = k // 2
    out = np.empty((k, k))
    out[:g, :g] = -(3.0 * a) / (2 * k) + b / (2 * k)
    out[g:, g:] = -(3.0 * b) / (2 * k) + a / (2 * k)
    out[:g, g:] = out[g:, :g] = -(a + b) / (2 * k)
    idx = np.arange(k)
    out[idx[:g], idx[:g]] = a * (1 - 3.0 / (2 * k)) + b / (2 * k)
    out[idx[g:], idx[g:]] = b * (1 - 3.0 / (2 * k)) + a / (2 * k)
    return out


def sel_grams(counts) -> tuple[np.ndarray, np.ndarray]:
    """SELI reference Grams (classifier and class-mean level), unnormalized.

    The SELI prediction matrix has column i equal to y_i - (1/K) 1, so with
    P = I - (1/K) 1 1^T and D = diag(n):
    the classifier Gram is the PSD square root of P D P, and the class-mean
    Gram is V diag(1/sigma) V^T on the nonzero spectrum of P D P.
    """
    counts = np.asarray([int(n) for n in counts], dtype=np.float64)
    k = counts.size
    p = np.eye(k) - np.full((k, k), 1.0 / k)
    eig = linalg.sym_eig(p @ np.diag(counts) @ p)
    vals = eig.eigenvalues
    # rank cutoff on the eigenvalue scale; sqrt would inflate float noise
    keep = vals > 1e-12 * max(float(vals[0]), 1.0)
    sigma = np.where(keep, np.sqrt(np.where(keep, vals, 1.0)), 0.0)
    inv = np.where(keep, 1.0, 0.0) / np.where(keep, sigma, 1.0)
    v = eig.eigenvectors
    return (v * sigma) @ v.T, (v * inv) @ v.T


def _unit(a: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero Gram")
    return a / norm


def seli_compare(two: TwoGroupSpec) -> SeliComparison:
    """Compare our Grams with SELI's in the equal-group (R, 1/2) setting.

    Builds our classifier Gram in blocks of (sqrt(R) M_A, M_B), our centered
    class-mean Gram in blocks of (M_A / sqrt(R), M_B), their vanishing-decay
    limits, and the SELI reference Grams; the Frobenius gaps at finite decay
    are strictly positive (the two geometries differ entrywise).
    """
    if two.k_a != two.k_b:
        raise ValueError("SELI comparison needs equal group sizes (the (R, 1/2) setting)")
    m_a, m_b = two.margin_pair()
    if m_a == 0.0:
        raise ValueError("complete collapse at this decay pair: Grams undefined")
    k = two.k
    sqrt_r = math.sqrt(two.ratio)

    ours_w = _unit(two_group_blocks(sqrt_r * m_a, m_b, k))
    ours_h = _unit(two_group_blocks(m_a / sqrt_r, m_b, k))
    limit_w = _unit(two_group_blocks(sqrt_r, 1.0, k))
    limit_h = _unit(two_group_blocks(1.0 / sqrt_r, 1.0, k))
    seli_w, seli_h = sel_grams(two.counts())
    gap_w = float(np.linalg.norm(ours_w - _unit(seli_w)))
    gap_h = float(np.linalg.norm(ours_h - _unit(seli_h)))
    if not (gap_w > 0.0 and gap_h > 0.0):
        raise AssertionError("expected strictly positive gap to SELI at finite decay")
    return SeliComparison(
        gram_w_ours=ours_w,
        gram_h_centered_ours=ours_h,
        gram_w_seli=_unit(seli_w),
        gram_h_seli=_unit(seli_h),
        gram_w_limit=limit_w,
        gram_h_centered_limit=limit_h,
        frobenius_gap_w=gap_w,
        frobenius_gap_h=gap_h,
        m_ratio_at_lambda=(m_a / m_b) if m_b > 0.0 else math.inf,
    )
