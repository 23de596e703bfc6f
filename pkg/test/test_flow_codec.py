"""
Test flow quantisation, encoding, decoding and channel normalisation.
"""

import itertools

import numpy as np
import pytest

from src.pofsm.errors import ConfigError, CorruptFileError, DataError
from src.pofsm.services.flow_codec import (
    ClusterLabelMap,
    DecodeMode,
    FlowCodebook,
    FlowField,
    FlowQuantizer,
    SpatialProbMap,
    collect_flow_samples,
    decode_flow,
    encode_flow,
    estimate_f_max,
    kmeans_fit,
    normalize_flow_channel,
)


def _sse_to_nearest(samples, centroids):
    distances = ((samples[:, None, :] - centroids[None]) ** 2).sum(axis=-1)
    return float(distances.min(axis=1).sum())


def _best_two_partition_sse(samples):
    best = np.inf
    for mask in itertools.product([False, True], repeat=len(samples) - 1):
        members = np.array((False,) + mask)
        if members.all() or not members.any():
            continue
        sse = sum(float(((group - group.mean(axis=0)) ** 2).sum())
                  for group in (samples[members], samples[~members]))
        best = min(best, sse)
    return best


class TestKMeans:
    """Test the k-means quantiser."""

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        """Test that 30 restarts reach the optimal 2-partition of 8 points."""
        rng = np.random.default_rng(seed)
        samples = np.concatenate([rng.normal((-3.0, 0.0), 0.7, size=(4, 2)),
                                  rng.normal((3.0, 1.0), 0.7, size=(4, 2))])
        codebook = kmeans_fit(samples, 2, seed=seed, n_init=30)
        assert _sse_to_nearest(samples, codebook.centroids) == pytest.approx(
            _best_two_partition_sse(samples), rel=1e-9)

    def test_centroids_sorted(self, rng):
        """Test that centroids come back sorted by u then v."""
        samples = rng.normal(size=(200, 2)) * 3
        centroids = kmeans_fit(samples, 6, seed=0).centroids
        order = np.lexsort((centroids[:, 1], centroids[:, 0]))
        np.testing.assert_array_equal(order, np.arange(6))

    def test_deterministic(self, rng):
        """Test that the same seed gives identical centroids."""
        samples = rng.normal(size=(150, 2))
        a = kmeans_fit(samples, 5, seed=3)
        b = kmeans_fit(samples, 5, seed=3)
        np.testing.assert_array_equal(a.centroids, b.centroids)
        assert a.f_max == b.f_max

    def test_sse_never_increases(self, rng):
        """Test monotone SSE over Lloyd iterations."""
        quantizer = FlowQuantizer(num_clusters=4, n_init=1, seed=0)
        quantizer.fit(rng.normal(size=(300, 2)))
        history = np.array(quantizer.sse_history_)
        assert np.all(np.diff(history) <= 1e-9)

    def test_too_few_distinct_samples(self):
        """Test that C above the distinct sample count is rejected."""
        samples = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(ConfigError):
            kmeans_fit(samples, 3)

    def test_single_cluster_is_mean(self, rng):
        """Test C = 1 gives the sample mean."""
        samples = rng.normal(size=(50, 2))
        np.testing.assert_allclose(kmeans_fit(samples, 1).centroids[0], samples.mean(axis=0))

    def test_f_max_percentile(self):
        """Test the 99th percentile default and the zero-flow fallback."""
        assert estimate_f_max(np.zeros((10, 2))) == 1.0
        values = np.column_stack([np.arange(101.0), np.zeros(101)])
        assert estimate_f_max(values) == pytest.approx(np.percentile(
            np.abs(values).ravel(), 99.0))

    def test_collect_subsamples(self):
        """Test per-field subsampling."""
        flows = [FlowField(np.ones((10, 10, 2))), FlowField(np.zeros((3, 3, 2)))]
        samples = collect_flow_samples(flows, max_per_field=20, seed=0)
        assert samples.shape == (29, 2)
        with pytest.raises(DataError):
            collect_flow_samples([])


class TestCodebookFile:
    """Test the text codebook."""

    def test_save_load(self, tmp_path):
        """Test that centroids and f_max survive the text form."""
        codebook = FlowCodebook(np.array([[0.1, -0.25], [1.0 / 3.0, 2.0]]), f_max=2.5)
        loaded = FlowCodebook.load(codebook.save(tmp_path / "cb.txt"))
        np.testing.assert_array_equal(loaded.centroids, codebook.centroids)
        assert loaded.f_max == 2.5

    def test_missing_file(self, tmp_path):
        """Test that a missing codebook is a configuration error."""
        with pytest.raises(ConfigError):
            FlowCodebook.load(tmp_path / "absent.txt")

    @pytest.mark.parametrize("text", ["", "hello\n1 1.0\n0 0\n", "POFCB v1\n2 1.0\n0 0\n",
                                      "POFCB v1\n1 1.0\n0 zero\n"])
    def test_corrupt(self, tmp_path, text):
        """Test malformed codebook files."""
        path = tmp_path / "cb.txt"
        path.write_text(text)
        with pytest.raises(CorruptFileError):
            FlowCodebook.load(path)

    def test_validation(self):
        """Test non-positive f_max and non-finite centroids."""
        with pytest.raises(ConfigError):
            FlowCodebook(np.zeros((2, 2)), f_max=0.0)
        with pytest.raises(ConfigError):
            FlowCodebook(np.array([[np.nan, 0.0]]))


class TestEncodeFlow:
    """Test nearest-centroid labelling."""

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_exhaustive_scan(self, seed):
        """Test against a per-pixel loop with lowest-index tie break."""
        rng = np.random.default_rng(seed)
        codebook = FlowCodebook(rng.integers(-2, 3, size=(6, 2)).astype(float))
        flow = FlowField(rng.integers(-3, 4, size=(5, 7, 2)).astype(float))
        labels = encode_flow(flow, codebook).labels
        for i in range(flow.rows):
            for j in range(flow.cols):
                best, best_d = 0, np.inf
                for r, centroid in enumerate(codebook.centroids):
                    d = float(((flow.uv[i, j] - centroid) ** 2).sum())
                    if d < best_d:
                        best, best_d = r, d
                assert labels[i, j] == best

    def test_fixture_codebook(self, codebook3):
        """Test left, still and right motion on the three-cluster codebook."""
        uv = np.array([[[-1.5, 0.2], [0.3, -0.1], [5.0, 0.0]]])
        np.testing.assert_array_equal(encode_flow(FlowField(uv), codebook3).labels, [[0, 1, 2]])


class TestDecodeFlow:
    """Test probability-to-flow decoding."""

    def test_expected_of_one_hot_is_centroid(self, codebook3):
        """Test that one-hot probabilities decode to their centroid."""
        labels = ClusterLabelMap(np.array([[0, 1], [2, 2]]), 3)
        flow = decode_flow(SpatialProbMap.one_hot(labels), codebook3)
        np.testing.assert_array_equal(flow.u, [[-2.0, 0.0], [2.0, 2.0]])

    def test_expected_is_weighted_mean(self, codebook3):
        """Test EXPECTED mode on a mixed pixel."""
        probs = SpatialProbMap(np.array([[[0.25, 0.25, 0.5]]]))
        assert decode_flow(probs, codebook3, "expected").u[0, 0] == pytest.approx(0.5)

    def test_argmax_ties_to_lowest(self, codebook3):
        """Test ARGMAX picks the lowest index on ties."""
        probs = SpatialProbMap(np.array([[[0.4, 0.2, 0.4]]]))
        assert decode_flow(probs, codebook3, DecodeMode.ARGMAX).u[0, 0] == -2.0

    @pytest.mark.parametrize("seed", range(5))
    def test_encode_of_argmax_decode_is_identity(self, seed):
        """Test encode(decode_argmax(one_hot(L))) == L for distinct centroids."""
        rng = np.random.default_rng(seed)
        centroids = rng.normal(scale=3.0, size=(int(rng.integers(2, 12)), 2))
        codebook = FlowCodebook(centroids, f_max=3.0)
        labels = ClusterLabelMap(rng.integers(0, codebook.num_clusters, size=(6, 9)),
                                 codebook.num_clusters)
        decoded = decode_flow(SpatialProbMap.one_hot(labels), codebook, DecodeMode.ARGMAX)
        np.testing.assert_array_equal(encode_flow(decoded, codebook).labels, labels.labels)

    @pytest.mark.parametrize("seed", range(5))
    def test_expected_decode_is_linear(self, seed):
        """Test EXPECTED decoding of a mixture equals the mixture of decodings."""
        rng = np.random.default_rng(seed)
        codebook = FlowCodebook(rng.normal(scale=3.0, size=(7, 2)), f_max=3.0)
        first = rng.dirichlet(np.ones(7), size=(4, 5))
        second = rng.dirichlet(np.ones(7), size=(4, 5))
        weight = rng.uniform()
        mixed = decode_flow(SpatialProbMap(weight * first + (1 - weight) * second), codebook)
        expected = (weight * decode_flow(SpatialProbMap(first), codebook).uv
                    + (1 - weight) * decode_flow(SpatialProbMap(second), codebook).uv)
        np.testing.assert_allclose(mixed.uv, expected, rtol=1e-12, atol=1e-12)

    def test_cluster_count_mismatch(self, codebook3):
        """Test that C must agree."""
        with pytest.raises(ConfigError):
            decode_flow(SpatialProbMap(np.full((1, 1, 2), 0.5)), codebook3)

    def test_invalid_probabilities(self):
        """Test SpatialProbMap validation."""
        with pytest.raises(DataError):
            SpatialProbMap(np.full((1, 1, 2), 0.7))


class TestNormalizeFlowChannel:
    """Test the flow-to-channel mapping."""

    def test_zero_motion_is_half(self):
        """Test that still pixels map to 0.5."""
        h, v = normalize_flow_channel(FlowField.zeros(2, 3), f_max=4.0)
        np.testing.assert_array_equal(h, 0.5)
        np.testing.assert_array_equal(v, 0.5)

    def test_range_and_clamp(self):
        """Test +-f_max map to 0 and 1 and larger motion is clamped."""
        uv = np.array([[[-2.0, 2.0], [1.0, -9.0]]])
        h, v = normalize_flow_channel(FlowField(uv), f_max=2.0)
        np.testing.assert_array_equal(h, [[0.0, 0.75]])
        np.testing.assert_array_equal(v, [[1.0, 0.0]])

    def test_bad_f_max(self):
        """Test that f_max must be positive."""
        with pytest.raises(ConfigError):
            normalize_flow_channel(FlowField.zeros(1, 1), 0.0)
