import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.cluster.hierarchy import fcluster, linkage

from coad.detector import (
    DEGENERATE_ROW,
    boxplot_fences,
    boxplot_outlier,
    cluster_outlier,
    detect_features,
    pairwise_distances,
    score_outlier,
    ward_agglomerate,
)
from coad.errors import ConfigurationError, ShapeError


def sorted_interp_quantile(values, q):
    """Linear interpolation between order statistics, by hand."""
    xs = sorted(values)
    pos = (len(xs) - 1) * q
    lo = int(pos)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (pos - lo) * (xs[hi] - xs[lo])


def partition_sse(x, labels):
    return sum(((x[labels == k] - x[labels == k].mean(0)) ** 2).sum() for k in np.unique(labels))


def same_partition(a, b):
    return {frozenset(np.flatnonzero(a == k)) for k in np.unique(a)} == {frozenset(np.flatnonzero(b == k)) for k in np.unique(b)}


def test_identical_vectors_zero_distance():
    d = pairwise_distances([np.ones(3), np.ones(3)]).d
    assert d[0, 1] == d[1, 0] == 0


def test_orthonormal_distance():
    d = pairwise_distances([np.array([1.0, 0]), np.array([0, 1.0])]).d
    assert d[0, 1] == pytest.approx(np.sqrt(2))


def test_cosine_metric():
    d = pairwise_distances([np.array([1.0, 0]), np.array([0, 2.0]), np.array([-3.0, 0])], "cosine").d
    np.testing.assert_allclose(d, [[0, 1, 2], [1, 0, 1], [2, 1, 0]], atol=1e-12)


def test_matrix_contract(rng):
    feats = rng.normal(size=(5, 7))
    dm = pairwise_distances(list(feats))
    assert dm.d.shape == (5, 5)
    assert np.abs(dm.d - dm.d.T).max() < 1e-9
    assert (np.diag(dm.d) == 0).all() and (dm.d >= 0).all()


def test_dimension_mismatch():
    with pytest.raises(ShapeError):
        pairwise_distances([np.ones(3), np.ones(4)])
    with pytest.raises(ConfigurationError):
        pairwise_distances([np.ones(3), np.ones(3)], "manhattan")


def test_hand_quartile_example():
    v = score_outlier([0.10, 0.12, 0.11, 0.95])
    assert v.details["q1"] == pytest.approx(0.1075, abs=1e-12)
    assert v.details["q3"] == pytest.approx(0.3275, abs=1e-12)
    assert v.details["fence"] == pytest.approx(0.6575, abs=1e-12)
    assert v.flagged and v.anomaly_index == 3


def test_identical_features_not_flagged():
    v = boxplot_outlier(pairwise_distances([np.ones(4)] * 6))
    assert v.details["iqr"] == 0
    assert not v.flagged


def test_small_row_is_degenerate():
    v = score_outlier([0.0, 1.0, 5.0])
    assert not v.flagged and v.anomaly_index is None and v.warning == DEGENERATE_ROW


def test_ties_go_to_lowest_index():
    v = score_outlier([1.0, 1.0, 1.0, 9.0, 9.0, 1.0, 1.0, 1.0])
    assert v.anomaly_index == 3


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(4, 30), elements=st.floats(0, 100)))
def test_fences_match_oracle(scores):
    stats = boxplot_fences(scores)
    q1 = sorted_interp_quantile(scores, 0.25)
    q3 = sorted_interp_quantile(scores, 0.75)
    assert abs(stats["q1"] - q1) < 1e-9 and abs(stats["q3"] - q3) < 1e-9
    assert abs(stats["fence"] - (q3 + 1.5 * (q3 - q1))) < 1e-9


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(4, 15), elements=st.floats(0.01, 10)), st.floats(0.01, 100))
def test_boxplot_scale_invariance(scores, alpha):
    a, b = score_outlier(scores), score_outlier(scores * alpha)
    assert a.anomaly_index == b.anomaly_index
    fence_gap = abs(scores.max() - a.details["fence"])
    if fence_gap > 1e-9 * max(1.0, scores.max()):
        assert a.flagged == b.flagged


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 12))
def test_boxplot_permutation_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    perm = rng.permutation(n)
    a = boxplot_outlier(pairwise_distances(list(x)))
    b = boxplot_outlier(pairwise_distances(list(x[perm])))
    assert perm[b.anomaly_index] == a.anomaly_index


def test_cluster_flags_far_point():
    v = cluster_outlier([np.array(p, float) for p in [(0, 0), (0.1, 0), (0, 0.1), (5, 5)]])
    assert v.flagged and v.anomaly_index == 3
    assert sorted(v.details["cluster_sizes"]) == [1, 3]


def test_cluster_balanced_pairs_not_flagged():
    v = cluster_outlier([np.array(p, float) for p in [(0, 0), (0, 0), (3, 3), (3, 3)]])
    assert not v.flagged and v.anomaly_index is None


def test_cluster_three_points():
    # d(0,1)=0.5, d(0,2)=10, d(1,2)=9.5 -> 0 and 1 merge first, 2 is left alone
    v = cluster_outlier([np.array([0.0]), np.array([0.5]), np.array([10.0])])
    assert v.flagged and v.anomaly_index == 2


def test_cluster_too_few():
    v = cluster_outlier([np.zeros(2), np.ones(2)])
    assert not v.flagged and v.warning == DEGENERATE_ROW


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(1, 6))
def test_ward_matches_scipy(seed, n, dim):
    x = np.random.default_rng(seed).normal(size=(n, dim))
    ours = ward_agglomerate(x, 2)
    ref = fcluster(linkage(x, "ward"), 2, "maxclust")
    assert same_partition(ours, ref)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 6))
def test_ward_finds_optimal_split_for_planted_outlier(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=0.1, size=(n, 4))
    x[rng.integers(n)] += 5.0
    labels = ward_agglomerate(x, 2)
    best = min(
        (partition_sse(x, np.isin(np.arange(n), c).astype(int)), c)
        for r in range(1, n)
        for c in itertools.combinations(range(n), r)
    )
    assert partition_sse(x, labels) == pytest.approx(best[0], rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 10))
def test_cluster_permutation_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    perm = rng.permutation(n)
    a = cluster_outlier(list(x))
    b = cluster_outlier(list(x[perm]))
    assert a.flagged == b.flagged
    if a.flagged:
        assert perm[b.anomaly_index] == a.anomaly_index


def test_detect_features_dispatch():
    feats = [np.array([0.0, 1.0])] * 5 + [np.array([1.0, 0.0])]
    assert detect_features(feats, "boxplot").anomaly_index == 5
    assert detect_features(feats, "cluster").anomaly_index == 5
    with pytest.raises(ConfigurationError):
        detect_features(feats, "isolation-forest")


def test_verdict_json_schema():
    v = score_outlier([0.1, 0.12, 0.11, 0.95])
    v.selection = "color"
    rec = json.loads(v.to_json(row_id="shelf3-row1"))
    assert rec["row_id"] == "shelf3-row1"
    assert {"method", "selection", "flagged", "anomaly_index", "scores", "fence"} <= rec.keys()
    c = cluster_outlier([np.zeros(2), np.zeros(2) + 0.01, np.ones(2) * 9])
    assert "cluster_sizes" in json.loads(c.to_json())
