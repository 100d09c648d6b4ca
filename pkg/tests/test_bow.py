import numpy as np
import pytest

from convdesc.bow import (Codebook, assign, encode_bow, subsample_descriptors,
                          train_codebook)
from convdesc.errors import InvalidArgumentError
from convdesc.sift import SiftDescriptor

from .oracles import distortion_reference, nearest_centroid_reference

DIM = 128


def clouds_128d(rng, centers, per_cloud, spread=0.05):
    """Well-separated Gaussian clouds embedded in descriptor space."""
    points = []
    for center in centers:
        mean = np.zeros(DIM)
        mean[:len(center)] = center
        points.append(rng.normal(0.0, spread, size=(per_cloud, DIM)) + mean)
    return np.vstack(points).astype(np.float32)


class TestTrainCodebook:
    def test_k_equals_distinct_points_reaches_zero_distortion(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(6, DIM)).astype(np.float32)
        codebook = train_codebook(points, k=6, seed=3)
        assert codebook.meta.distortion == 0.0
        order = np.lexsort(codebook.centroids.T)
        expected_order = np.lexsort(points.T)
        np.testing.assert_array_equal(codebook.centroids[order],
                                      points[expected_order])

    def test_two_clouds_recover_means(self):
        rng = np.random.default_rng(1)
        points = clouds_128d(rng, [(0.0, 0.0), (10.0, 10.0)], per_cloud=50)
        codebook = train_codebook(points, k=2, seed=7, max_iters=50)
        analytic = np.stack([
            points[:50].astype(np.float64).mean(axis=0),
            points[50:].astype(np.float64).mean(axis=0),
        ])
        got = codebook.centroids[np.argsort(codebook.centroids[:, 0])]
        want = analytic[np.argsort(analytic[:, 0])]
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_distortion_non_increasing(self):
        rng = np.random.default_rng(2)
        points = rng.normal(size=(120, DIM)).astype(np.float32)
        distortions = []
        # recompute distortion independently after each iteration count
        for iters in range(1, 7):
            codebook = train_codebook(points, k=8, seed=5, max_iters=iters)
            independent = distortion_reference(points.astype(np.float64),
                                               codebook.centroids.astype(np.float64))
            assert independent <= codebook.meta.distortion * (1 + 1e-9) + 1e-9
            distortions.append(codebook.meta.distortion)
        for earlier, later in zip(distortions, distortions[1:]):
            assert later <= earlier * (1 + 1e-12) + 1e-9

    def test_seeded_determinism_bit_exact(self):
        rng = np.random.default_rng(3)
        points = rng.normal(size=(90, DIM)).astype(np.float32)
        first = train_codebook(points, k=10, seed=42)
        second = train_codebook(points, k=10, seed=42)
        assert first.centroids.tobytes() == second.centroids.tobytes()
        assert first.meta == second.meta

    def test_different_seeds_differ(self):
        rng = np.random.default_rng(4)
        points = rng.normal(size=(90, DIM)).astype(np.float32)
        first = train_codebook(points, k=10, seed=1)
        second = train_codebook(points, k=10, seed=2)
        assert first.centroids.tobytes() != second.centroids.tobytes()

    def test_fewer_points_than_k_rejected(self):
        rng = np.random.default_rng(5)
        with pytest.raises(InvalidArgumentError):
            train_codebook(rng.normal(size=(4, DIM)).astype(np.float32), k=5)

    def test_wrong_dim_rejected(self):
        rng = np.random.default_rng(6)
        with pytest.raises(InvalidArgumentError):
            train_codebook(rng.normal(size=(10, 64)).astype(np.float32), k=2)


class TestCodebookType:
    def test_duplicate_centroids_rejected(self):
        centroids = np.zeros((2, DIM), np.float32)
        with pytest.raises(InvalidArgumentError):
            Codebook(centroids)

    def test_non_finite_rejected(self):
        centroids = np.zeros((2, DIM), np.float32)
        centroids[0, 0] = np.nan
        centroids[1, 0] = 1.0
        with pytest.raises(InvalidArgumentError):
            Codebook(centroids)


class TestEncodeBow:
    def test_identical_descriptors_one_hot(self):
        rng = np.random.default_rng(7)
        codebook = Codebook(rng.normal(size=(5, DIM)).astype(np.float32))
        descriptor = rng.normal(size=DIM).astype(np.float32)
        matrix = np.tile(descriptor, (9, 1))
        vec = encode_bow(matrix, codebook)
        assert np.count_nonzero(vec.values) == 1
        assert abs(vec.values.sum() - 1.0) < 1e-6

    def test_histogram_sums_to_one(self):
        rng = np.random.default_rng(8)
        codebook = Codebook(rng.normal(size=(13, DIM)).astype(np.float32))
        matrix = rng.normal(size=(57, DIM)).astype(np.float32)
        vec = encode_bow(matrix, codebook)
        assert abs(float(vec.values.sum(dtype=np.float64)) - 1.0) < 1e-6
        assert (vec.values >= 0).all()

    def test_matches_exhaustive_nn_oracle(self):
        rng = np.random.default_rng(9)
        codebook = Codebook(rng.normal(size=(5, DIM)).astype(np.float32))
        matrix = rng.normal(size=(20, DIM)).astype(np.float32)
        vec = encode_bow(matrix, codebook)
        labels = nearest_centroid_reference(matrix, codebook.centroids)
        expected = np.bincount(labels, minlength=5) / 20.0
        np.testing.assert_allclose(vec.values, expected, atol=1e-7)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(10)
        codebook = Codebook(rng.normal(size=(7, DIM)).astype(np.float32))
        matrix = rng.normal(size=(31, DIM)).astype(np.float32)
        shuffled = matrix[rng.permutation(31)]
        a = encode_bow(matrix, codebook)
        b = encode_bow(shuffled, codebook)
        np.testing.assert_array_equal(a.values, b.values)

    def test_empty_rejected(self):
        rng = np.random.default_rng(11)
        codebook = Codebook(rng.normal(size=(3, DIM)).astype(np.float32))
        with pytest.raises(InvalidArgumentError):
            encode_bow(np.empty((0, DIM), np.float32), codebook)

    def test_accepts_descriptor_objects(self):
        rng = np.random.default_rng(12)
        codebook = Codebook(rng.normal(size=(3, DIM)).astype(np.float32))
        descriptors = [SiftDescriptor(rng.normal(size=DIM).astype(np.float32),
                                      (0.0, 0.0), 0) for _ in range(4)]
        vec = encode_bow(descriptors, codebook)
        assert vec.dim == 3

    def test_tie_goes_to_lowest_index(self):
        centroid = np.zeros((1, DIM), np.float32)
        twin = np.zeros((2, DIM), np.float32)
        twin[0, 0] = 1.0
        twin[1, 0] = -1.0  # equidistant from the zero descriptor
        codebook = Codebook(twin)
        vec = encode_bow(np.zeros((3, DIM), np.float32), codebook)
        np.testing.assert_array_equal(vec.values, [1.0, 0.0])


class TestAssignAndSubsample:
    def test_assign_matches_oracle_on_random_data(self):
        rng = np.random.default_rng(13)
        x = rng.normal(size=(40, DIM))
        c = rng.normal(size=(6, DIM))
        np.testing.assert_array_equal(assign(x, c),
                                      nearest_centroid_reference(x, c))

    def test_subsample_deterministic_and_capped(self):
        rng = np.random.default_rng(14)
        matrix = rng.normal(size=(100, DIM)).astype(np.float32)
        a = subsample_descriptors(matrix, cap=32, seed=5)
        b = subsample_descriptors(matrix, cap=32, seed=5)
        assert a.shape == (32, DIM)
        np.testing.assert_array_equal(a, b)
        below_cap = subsample_descriptors(matrix, cap=200, seed=5)
        assert below_cap is matrix
