import math

import numpy as np
import pytest

from collapse_lab import geometry, solver
from collapse_lab.geometry import ProblemSpec

from conftest import random_spec

# Frozen oracle values for K=2, d=3, n=(8,2), lambda_w=lambda_h=0.01,
# from direct evaluation of the margin-constant formula:
# the log arguments reduce to exactly 39 and 19.
SPEC_8_2 = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.01, lambda_h=0.01)
LOG39 = 3.6635616461296463
LOG19 = 2.9444389791664403
NORM1_SQ = 0.25 * LOG39  # 0.9158904115324116
NORM2_SQ = 0.5 * LOG19  # 1.4722194895832201
LOSS_8_2 = 0.13322852797919935


def test_margin_constants_frozen():
    assert geometry.margin_constant(SPEC_8_2, 0) == pytest.approx(LOG39, abs=1e-12)
    assert geometry.margin_constant(SPEC_8_2, 1) == pytest.approx(LOG19, abs=1e-12)
    assert geometry.margin_constant(SPEC_8_2, 0) == pytest.approx(math.log(39), abs=0)


def test_margin_boundary_is_zero():
    # N sqrt(lw lh) / sqrt(n_2) equals sqrt((K-1)/K) exactly: log argument is 1
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.1, lambda_h=0.1)
    assert geometry.margin_constant(spec, 1) == 0.0
    assert geometry.margin_constant(spec, 0) == pytest.approx(math.log(3), abs=1e-12)


def test_margin_undefined_log_is_zero():
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.3, lambda_h=0.3)
    assert geometry.margin_constants(spec).tolist() == [0.0, 0.0]


def test_margin_monotone_in_count():
    # holding (N, K, lambda) fixed, M_k is nondecreasing in n_k
    rng = np.random.default_rng(11)
    for _ in range(20):
        k = int(rng.integers(2, 8))
        n_total = int(rng.integers(k, 300))
        lam = 10.0 ** rng.uniform(-4, -1)
        values = [
            geometry.margin_value(k, n_total, n, lam, lam)
            for n in range(1, n_total + 1)
        ]
        assert all(b >= a for a, b in zip(values, values[1:]))


def test_margin_zero_iff_threshold():
    rng = np.random.default_rng(12)
    for _ in range(50):
        spec = random_spec(rng)
        c = spec.n_total**2 * (spec.k / (spec.k - 1)) * spec.lambda_w * spec.lambda_h
        for k in range(spec.k):
            collapsed = geometry.margin_constant(spec, k) == 0.0
            assert collapsed == (spec.counts[k] <= c)


def test_class_mean_norms_frozen():
    assert geometry.class_mean_norm_sq(SPEC_8_2, 0) == pytest.approx(NORM1_SQ, abs=1e-12)
    assert geometry.class_mean_norm_sq(SPEC_8_2, 1) == pytest.approx(NORM2_SQ, abs=1e-12)
    # the minority class-mean is longer here: feature norm is not monotone
    assert geometry.class_mean_norm_sq(SPEC_8_2, 1) > geometry.class_mean_norm_sq(SPEC_8_2, 0)


def test_class_mean_norm_zero_when_collapsed():
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.1, lambda_h=0.1)
    assert geometry.class_mean_norm_sq(spec, 1) == 0.0


def test_canonical_class_means_frozen():
    means = geometry.canonical_class_means(SPEC_8_2)
    expected = np.zeros((3, 2))
    expected[0, 0] = math.sqrt(NORM1_SQ)  # 0.9570216358747652
    expected[1, 1] = math.sqrt(NORM2_SQ)  # 1.2133505221423940
    assert np.abs(means - expected).max() <= 1e-12


def test_canonical_class_means_collapsed_zero():
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.3, lambda_h=0.3)
    assert np.array_equal(geometry.canonical_class_means(spec), np.zeros((3, 2)))


def test_canonical_class_means_balanced_orthogonal_frame():
    spec = ProblemSpec(k=4, d=4, counts=(5, 5, 5, 5), lambda_w=0.005, lambda_h=0.005)
    means = geometry.canonical_class_means(spec)
    gram = means.T @ means
    assert np.abs(gram - gram[0, 0] * np.eye(4)).max() <= 1e-12
    assert gram[0, 0] > 0


def test_classifier_frozen():
    means = geometry.canonical_class_means(SPEC_8_2)
    w = geometry.classifier_from_means(SPEC_8_2, means)
    expected_w1 = np.array([2.0 * math.sqrt(NORM1_SQ), -math.sqrt(NORM2_SQ), 0.0])
    assert np.abs(w[0] - expected_w1).max() <= 1e-12
    assert np.abs(w[1] + w[0]).max() <= 1e-12  # K=2: w_2 = -w_1


def test_classifier_rows_sum_to_zero():
    rng = np.random.default_rng(13)
    for _ in range(20):
        spec = random_spec(rng)
        w = geometry.classifier_from_means(spec, geometry.canonical_class_means(spec))
        assert np.abs(w.sum(axis=0)).max() <= 1e-12


def test_classifier_balanced_is_centered_means():
    spec = ProblemSpec(k=4, d=5, counts=(7, 7, 7, 7), lambda_w=0.004, lambda_h=0.002)
    means = geometry.canonical_class_means(spec)
    w = geometry.classifier_from_means(spec, means)
    centered = (means - means.mean(axis=1, keepdims=True)).T
    mask = np.abs(centered) > 1e-12
    ratios = w[mask] / centered[mask]
    assert ratios.min() > 0
    assert np.ptp(ratios) <= 1e-10


def test_classifier_all_collapsed_zero():
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.3, lambda_h=0.3)
    w = geometry.classifier_from_means(spec, geometry.canonical_class_means(spec))
    assert np.array_equal(w, np.zeros((2, 3)))


def test_logit_matrix_frozen():
    z = geometry.logit_matrix(SPEC_8_2)
    assert z[0, 0] == pytest.approx(0.5 * LOG39, abs=1e-12)  # 1.8317808230648231
    assert z[1, 0] == pytest.approx(-0.5 * LOG39, abs=1e-12)
    assert np.abs(z.sum(axis=0)).max() <= 1e-12


def test_logit_matrix_collapsed_column_zero():
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.1, lambda_h=0.1)
    z = geometry.logit_matrix(spec)
    assert np.array_equal(z[:, 1], np.zeros(2))


def test_logit_matrix_balanced_etf_pattern():
    spec = ProblemSpec(k=4, d=4, counts=(3, 3, 3, 3), lambda_w=0.004, lambda_h=0.004)
    z = geometry.logit_matrix(spec)
    target = np.eye(4) - 0.25
    assert np.abs(z / z[0, 0] - target / target[0, 0]).max() <= 1e-12


def test_logits_consistent_with_construction():
    rng = np.random.default_rng(14)
    for _ in range(20):
        spec = random_spec(rng)
        geom = geometry.closed_form_geometry(spec)
        assert np.abs(geom.classifier @ geom.class_means - geom.logits).max() <= 1e-10


def test_margins_equal_margin_constants():
    assert np.array_equal(geometry.margins(SPEC_8_2), geometry.margin_constants(SPEC_8_2))
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.1, lambda_h=0.1)
    assert geometry.margins(spec)[1] == 0.0
    balanced = ProblemSpec(k=3, d=3, counts=(4, 4, 4), lambda_w=0.01, lambda_h=0.01)
    assert np.ptp(geometry.margins(balanced)) == 0.0


def test_expand_features():
    means = np.array([[1.0, 3.0], [2.0, 4.0]])
    h = geometry.expand_features(means, (2, 1))
    assert np.array_equal(h, np.array([[1.0, 1.0, 3.0], [2.0, 2.0, 4.0]]))
    assert np.array_equal(geometry.expand_features(means, (1, 1)), means)
    full = geometry.expand_features(geometry.canonical_class_means(SPEC_8_2), SPEC_8_2.counts)
    assert full.shape == (3, 10)
    assert np.array_equal(full[:, :8], np.tile(full[:, :1], (1, 8)))


def test_closed_form_loss_frozen():
    assert geometry.closed_form_loss(SPEC_8_2) == pytest.approx(LOSS_8_2, abs=1e-12)


def test_closed_form_loss_complete_collapse_is_log_k():
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.3, lambda_h=0.3)
    assert geometry.closed_form_loss(spec) == pytest.approx(math.log(2), abs=1e-15)
    spec5 = ProblemSpec(k=5, d=6, counts=(2,) * 5, lambda_w=0.5, lambda_h=0.5)
    assert geometry.closed_form_loss(spec5) == pytest.approx(math.log(5), abs=1e-15)


def test_closed_form_loss_matches_objective_on_construction():
    rng = np.random.default_rng(15)
    for _ in range(20):
        spec = random_spec(rng)
        geom = geometry.closed_form_geometry(spec)
        h = geometry.expand_features(geom.class_means, spec.counts)
        direct = solver.objective(geom.classifier, h, spec)
        assert abs(direct - geom.optimal_loss) <= 1e-10


def test_construction_invariants_random_specs():
    rng = np.random.default_rng(16)
    for _ in range(30):
        spec = random_spec(rng)
        geom = geometry.closed_form_geometry(spec)
        means = geom.class_means
        assert means.min() >= 0.0
        gram = means.T @ means
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() <= 1e-12
        assert np.abs(np.diag(gram) - geom.mean_norms_sq).max() <= 1e-12
        assert np.abs(geom.classifier.sum(axis=0)).max() <= 1e-12
        # critical-point norm balance between the two regularized blocks
        w_sq = np.sum(geom.classifier**2)
        h_sq = spec.lambda_h / spec.lambda_w * float(
            (spec.counts_array() * geom.mean_norms_sq).sum()
        )
        assert abs(w_sq - h_sq) <= 1e-10 * max(w_sq, 1e-30)


def test_construction_is_stationary():
    rng = np.random.default_rng(17)
    for _ in range(10):
        spec = random_spec(rng)
        geom = geometry.closed_form_geometry(spec)
        h = geometry.expand_features(geom.class_means, spec.counts)
        assert solver.projected_residual(geom.classifier, h, spec) <= 1e-8


def test_balanced_reduction_etf():
    for k, d, n, lam in ((3, 3, 10, 0.003), (4, 6, 5, 0.005), (6, 8, 2, 0.001)):
        spec = ProblemSpec(k=k, d=d, counts=(n,) * k, lambda_w=lam, lambda_h=lam)
        geom = geometry.closed_form_geometry(spec)
        etf = np.eye(k) - 1.0 / k
        etf /= np.linalg.norm(etf)
        w_gram = geom.classifier @ geom.classifier.T
        assert np.abs(w_gram / np.linalg.norm(w_gram) - etf).max() <= 1e-10
        centered = geom.class_means - geom.class_means.mean(axis=1, keepdims=True)
        c_gram = centered.T @ centered
        assert np.abs(c_gram / np.linalg.norm(c_gram) - etf).max() <= 1e-10


def test_spec_validation():
    with pytest.raises(ValueError, match="d < K bottleneck"):
        ProblemSpec(k=4, d=3, counts=(1, 1, 1, 1), lambda_w=0.1, lambda_h=0.1)
    with pytest.raises(ValueError, match="at least 2 classes"):
        ProblemSpec(k=1, d=3, counts=(5,), lambda_w=0.1, lambda_h=0.1)
    with pytest.raises(ValueError, match="at least one sample"):
        ProblemSpec(k=2, d=3, counts=(5, 0), lambda_w=0.1, lambda_h=0.1)
    with pytest.raises(ValueError, match="lambda_w"):
        ProblemSpec(k=2, d=3, counts=(5, 2), lambda_w=0.0, lambda_h=0.1)
    with pytest.raises(ValueError, match="class counts"):
        ProblemSpec(k=2, d=3, counts=(5, 2, 2), lambda_w=0.1, lambda_h=0.1)
    with pytest.raises(ValueError, match="out of range"):
        geometry.margin_constant(SPEC_8_2, 2)
