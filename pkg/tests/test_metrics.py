import math

import numpy as np
import pytest

from collapse_lab import geometry, metrics
from collapse_lab.geometry import ProblemSpec

SPEC_8_2 = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.01, lambda_h=0.01)


def hand_statistics(h, counts):
    """Direct-summation oracle for means and covariances."""
    d = h.shape[0]
    k = len(counts)
    n = sum(counts)
    labels = np.repeat(np.arange(k), counts)
    means = np.zeros((d, k))
    for col in range(n):
        means[:, labels[col]] += h[:, col]
    means /= np.asarray(counts)
    global_mean = h.sum(axis=1) / n
    sigma_w = np.zeros((d, d))
    for col in range(n):
        dev = h[:, col] - means[:, labels[col]]
        sigma_w += np.outer(dev, dev)
    sigma_w /= n
    sigma_b = np.zeros((d, d))
    for cls in range(k):
        dev = means[:, cls] - global_mean
        sigma_b += np.outer(dev, dev)
    sigma_b /= k
    return means, global_mean, sigma_w, sigma_b


def test_class_statistics_matches_hand_summation():
    rng = np.random.default_rng(20)
    h = rng.standard_normal((4, 9))
    counts = (4, 3, 2)
    stats = metrics.class_statistics(h, counts)
    means, global_mean, sigma_w, sigma_b = hand_statistics(h, counts)
    assert np.abs(stats.class_means - means).max() <= 1e-12
    assert np.abs(stats.global_mean - global_mean).max() <= 1e-12
    assert np.abs(stats.sigma_w - sigma_w).max() <= 1e-12
    assert np.abs(stats.sigma_b - sigma_b).max() <= 1e-12
    # symmetry of both covariances
    assert np.abs(stats.sigma_w - stats.sigma_w.T).max() <= 1e-9
    assert np.abs(stats.sigma_b - stats.sigma_b.T).max() <= 1e-9


def test_class_statistics_collapsed_features():
    means = geometry.canonical_class_means(SPEC_8_2)
    h = geometry.expand_features(means, SPEC_8_2.counts)
    stats = metrics.class_statistics(h, SPEC_8_2.counts)
    assert not stats.sigma_w.any()
    assert np.abs(stats.class_means - means).max() <= 1e-15


def test_class_statistics_single_class():
    rng = np.random.default_rng(21)
    h = rng.standard_normal((3, 5))
    stats = metrics.class_statistics(h, (5,))
    assert not stats.sigma_b.any()


def test_class_statistics_count_mismatch():
    with pytest.raises(ValueError, match="columns"):
        metrics.class_statistics(np.zeros((2, 5)), (2, 2))


def test_nc1_zero_on_collapsed_features():
    means = geometry.canonical_class_means(SPEC_8_2)
    h = geometry.expand_features(means, SPEC_8_2.counts)
    assert metrics.nc1(h, SPEC_8_2.counts) == 0.0


def test_nc1_spectral_identity():
    # with Sigma_W = c * Sigma_B and Sigma_B full rank d, the trace collapses
    # to c * d / K
    rng = np.random.default_rng(22)
    d, k, c = 3, 5, 0.37
    means = rng.standard_normal((d, k))
    counts = (2,) * k
    stats0 = metrics.class_statistics(geometry.expand_features(means, counts), counts)
    sigma_b = stats0.sigma_b
    assert np.linalg.matrix_rank(sigma_b) == d
    # realize Sigma_W = c * Sigma_B with per-class +/- deviations
    vals, vecs = np.linalg.eigh(c * sigma_b)
    n = sum(counts)
    h = np.zeros((d, n))
    col = 0
    for cls in range(k):
        dev = np.zeros(d)
        if cls < d:
            dev = math.sqrt(n * vals[cls] / 2.0) * vecs[:, cls]
        h[:, col] = means[:, cls] + dev
        h[:, col + 1] = means[:, cls] - dev
        col += 2
    value = metrics.nc1(h, counts)
    assert value == pytest.approx(c * d / k, rel=1e-9)


def test_nc1_degenerate_sentinel():
    # all class means equal (Sigma_B = 0) with spread inside classes
    h = np.array([[1.0, -1.0, 1.0, -1.0], [0.0, 0.0, 0.0, 0.0]])
    assert metrics.nc1(h, (2, 2)) == math.inf
    assert metrics.nc1(np.zeros((2, 4)), (2, 2)) == 0.0


def test_nc2_w_vs_h_self_consistency():
    means = geometry.canonical_class_means(SPEC_8_2)
    w = geometry.classifier_from_means(SPEC_8_2, means)
    value = metrics.nc2_w_vs_h(w, means, SPEC_8_2.counts)
    assert value <= 1e-12
    assert metrics.nc2_w_vs_h(3.7 * w, means, SPEC_8_2.counts) == pytest.approx(
        value, abs=1e-12
    )


def test_nc2_w_vs_h_sentinel_on_zero():
    means = geometry.canonical_class_means(SPEC_8_2)
    assert metrics.nc2_w_vs_h(np.zeros((2, 3)), means, SPEC_8_2.counts) is None
    assert metrics.nc2_w_vs_h(np.ones((2, 3)), np.zeros((3, 2)), SPEC_8_2.counts) is None


def test_nc2_wwt_zero_on_construction_and_rotation_invariant():
    geom = geometry.closed_form_geometry(SPEC_8_2)
    assert metrics.nc2_wwt(geom.classifier, SPEC_8_2) <= 1e-10
    rng = np.random.default_rng(23)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    assert metrics.nc2_wwt(geom.classifier @ q, SPEC_8_2) <= 1e-10


def test_nc2_hth_zero_on_construction_and_permutation_invariant():
    geom = geometry.closed_form_geometry(SPEC_8_2)
    assert metrics.nc2_hth(geom.class_means, SPEC_8_2) <= 1e-10
    perm = geom.class_means[[2, 0, 1], :]
    assert metrics.nc2_hth(perm, SPEC_8_2) <= 1e-10


def test_nc3_zero_on_construction():
    geom = geometry.closed_form_geometry(SPEC_8_2)
    assert metrics.nc3_wh(geom.classifier, geom.class_means, SPEC_8_2) <= 1e-10


def test_nc3_balanced_target_is_etf():
    spec = ProblemSpec(k=4, d=4, counts=(3, 3, 3, 3), lambda_w=0.004, lambda_h=0.004)
    target = geometry.logit_matrix(spec)
    etf = np.eye(4) - 0.25
    assert np.abs(
        target / np.linalg.norm(target) - etf / np.linalg.norm(etf)
    ).max() <= 1e-12


def test_metrics_rotation_invariance():
    # W -> W Q, H -> Q^T H leaves every metric unchanged
    rng = np.random.default_rng(24)
    spec = ProblemSpec(k=3, d=5, counts=(4, 2, 2), lambda_w=0.01, lambda_h=0.02)
    w, h = rng.standard_normal((3, 5)), np.abs(rng.standard_normal((5, 8)))
    base = metrics.report(w, h, spec)
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    rotated = metrics.report(w @ q, q.T @ h, spec)
    assert rotated.nc1 == pytest.approx(base.nc1, abs=1e-9, rel=1e-9)
    assert rotated.nc2_wwt == pytest.approx(base.nc2_wwt, abs=1e-9)
    assert rotated.nc2_hth == pytest.approx(base.nc2_hth, abs=1e-9)
    assert rotated.nc2_w_vs_h == pytest.approx(base.nc2_w_vs_h, abs=1e-9)
    assert rotated.nc3_wh == pytest.approx(base.nc3_wh, abs=1e-9)


def test_nc1_scaling_invariance():
    rng = np.random.default_rng(25)
    h = np.abs(rng.standard_normal((4, 10)))
    counts = (5, 3, 2)
    assert metrics.nc1(5.31 * h, counts) == pytest.approx(
        metrics.nc1(h, counts), rel=1e-9
    )


def test_report_on_closed_form_hits_floors():
    geom = geometry.closed_form_geometry(SPEC_8_2)
    h = geometry.expand_features(geom.class_means, SPEC_8_2.counts)
    rep = metrics.report(geom.classifier, h, SPEC_8_2)
    assert rep.nc1 <= 1e-10
    assert rep.nc2_w_vs_h <= 1e-10
    assert rep.nc2_wwt <= 1e-10
    assert rep.nc2_hth <= 1e-10
    assert rep.nc3_wh <= 1e-10


def test_report_complete_collapse_sentinels():
    spec = ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.3, lambda_h=0.3)
    rep = metrics.report(np.zeros((2, 3)), np.zeros((3, 10)), spec)
    assert rep.nc1 == 0.0
    assert rep.nc2_w_vs_h is None
    assert rep.nc2_wwt is None
    assert rep.nc2_hth is None
    assert rep.nc3_wh is None


def test_metric_bound_two():
    # distances of unit-Frobenius matrices never exceed 2
    rng = np.random.default_rng(26)
    for _ in range(20):
        spec = ProblemSpec(k=3, d=4, counts=(4, 3, 2), lambda_w=0.01, lambda_h=0.01)
        w = rng.standard_normal((3, 4))
        h = np.abs(rng.standard_normal((4, 9)))
        rep = metrics.report(w, h, spec)
        for value in (rep.nc2_w_vs_h, rep.nc2_wwt, rep.nc2_hth, rep.nc3_wh):
            assert value is not None and 0.0 <= value <= 2.0
