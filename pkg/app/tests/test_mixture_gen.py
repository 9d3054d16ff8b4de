import numpy as np
import pytest
from scipy.stats import ortho_group
from app.core.errors import ConfigError, StreamExhaustedError
from app.schemas.mixture import MixtureModel
from app.services.mixture_gen import (
    CHUNK_SIZE, PointStream, make_model, point_stream, sample_range, sample_stream, sample_subgaussian_stream
)


def test_axis_aligned_pair_in_one_dimension():
    """Unit test: k=2, d=1 axis-aligned means sit at -2 and +2"""
    model = make_model(2, 1, 4.0, 1.0, "axis-aligned", seed=0)
    assert model.means[:, 0].tolist() == [-2.0, 2.0]
    assert model.separation() == pytest.approx(4.0)

def test_axis_aligned_three_components():
    """Unit test: scaled basis vectors are C * sigma apart"""
    model = make_model(3, 3, 6.0, 2.0, "axis-aligned", seed=0)
    distances = model.pairwise_distances()
    off_diagonal = distances[~np.eye(3, dtype=bool)]
    assert np.allclose(off_diagonal, 12.0)
    assert model.separation() == pytest.approx(6.0)

@pytest.mark.parametrize("placement", ["simplex-scaled", "random-rotated"])
def test_simplex_placements_are_equally_separated(placement):
    """Unit test: every pair of simplex means is exactly C sigma apart"""
    model = make_model(4, 6, 5.0, 1.5, placement, seed=11)
    distances = model.pairwise_distances()[~np.eye(4, dtype=bool)]
    assert np.allclose(distances, 7.5, rtol=1e-10)
    assert model.separation() == pytest.approx(5.0, rel=1e-10)
    assert model.pairwise_separation(0, 3) == pytest.approx(5.0, rel=1e-10)

def test_simplex_rejects_too_few_dimensions():
    """Unit test: d < k - 1 cannot hold k equally separated means"""
    with pytest.raises(ConfigError):
        make_model(4, 2, 8.0, 1.0, "simplex-scaled")

def test_axis_aligned_rejects_too_few_dimensions():
    with pytest.raises(ConfigError):
        make_model(3, 2, 8.0, 1.0, "axis-aligned")

def test_make_model_rejects_unknown_placement():
    with pytest.raises(ConfigError):
        make_model(2, 2, 8.0, 1.0, "spiral")

def test_make_model_is_deterministic_given_seed():
    a = make_model(3, 8, 8.0, 1.0, "random-rotated", seed=5)
    b = make_model(3, 8, 8.0, 1.0, "random-rotated", seed=5)
    c = make_model(3, 8, 8.0, 1.0, "random-rotated", seed=6)
    assert np.array_equal(a.means, b.means)
    assert not np.array_equal(a.means, c.means)

def test_separation_is_rotation_invariant(simplex_model):
    """Unit test: a common rotation leaves the separation unchanged"""
    rotation = ortho_group.rvs(simplex_model.d, random_state=np.random.default_rng(4))
    rotated = simplex_model.rotated(rotation)
    assert rotated.separation() == pytest.approx(simplex_model.separation(), rel=1e-10)

def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        MixtureModel(k=2, d=1, means=[[0.0], [1.0]], sigma=1.0, weights=[0.5, 0.6])

def test_component_sigmas_must_peak_at_sigma():
    with pytest.raises(ConfigError):
        make_model(2, 2, 8.0, 1.0, "axis-aligned", component_sigmas=[0.5, 0.7])
    model = make_model(2, 2, 8.0, 1.0, "axis-aligned", component_sigmas=[0.5, 1.0])
    assert model.noise_scales().tolist() == [0.5, 1.0]

def test_zero_noise_points_equal_their_means(noise_free_model):
    """Unit test: with sigma = 0 every sample is exactly its component mean"""
    batch = sample_stream(noise_free_model, 1000, seed=2)
    assert np.array_equal(batch.points, noise_free_model.means[batch.labels])
    assert noise_free_model.separation() == float("inf")
    assert noise_free_model.min_distance() == pytest.approx(4.0)

def test_sample_stream_is_deterministic(pair_model):
    a = sample_stream(pair_model, 5000, seed=9)
    b = sample_stream(pair_model, 5000, seed=9)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.labels, b.labels)

def test_standard_normal_moments():
    """Unit test: one centered component has mean near 0 and unit variance"""
    model = MixtureModel(k=1, d=10, means=np.zeros((1, 10)), sigma=1.0, weights=[1.0])
    points = sample_stream(model, 100_000, seed=0).points
    assert np.linalg.norm(points.mean(axis=0)) <= 0.02
    variances = points.var(axis=0)
    assert np.all((variances >= 0.98) & (variances <= 1.02))

def test_balanced_labels(pair_model):
    """Unit test: label-0 fraction stays inside the binomial band"""
    labels = sample_stream(pair_model, 100_000, seed=1).labels
    assert 0.494 <= np.mean(labels == 0) <= 0.506

def test_component_means_close_to_truth(simplex_model):
    batch = sample_stream(simplex_model, 100_000, seed=3)
    for i in range(simplex_model.k):
        members = batch.points[batch.labels == i]
        bound = 5 * simplex_model.sigma / np.sqrt(len(members))
        assert np.all(np.abs(members.mean(axis=0) - simplex_model.means[i]) <= bound)

def test_gaussian_noise_kind_matches_sample_stream(pair_model):
    a = sample_stream(pair_model, 3000, seed=4)
    b = sample_subgaussian_stream(pair_model, 3000, "gaussian", seed=4)
    assert np.array_equal(a.points, b.points)

def test_uniform_ball_has_unit_coordinate_variance():
    model = MixtureModel(k=1, d=3, means=np.zeros((1, 3)), sigma=1.0, weights=[1.0])
    points = sample_subgaussian_stream(model, 100_000, "uniform-ball", seed=5).points
    variances = points.var(axis=0)
    assert np.all((variances >= 0.98) & (variances <= 1.02))

def test_rademacher_noise_support():
    """Unit test: scaled Rademacher noise coordinates are exactly +-sigma"""
    model = make_model(2, 3, 4.0, 2.0, "axis-aligned")
    batch = sample_subgaussian_stream(model, 2000, "rademacher-scaled", seed=6)
    noise = batch.points - model.means[batch.labels]
    assert np.allclose(np.abs(noise), 2.0, rtol=0, atol=1e-12)

def test_unknown_noise_kind_rejected(pair_model):
    with pytest.raises(ConfigError):
        sample_subgaussian_stream(pair_model, 10, "cauchy", seed=0)

def test_index_ranges_concatenate_to_serial_stream(pair_model):
    """Unit test: any partition of an index range reproduces the serial samples"""
    n = 2 * CHUNK_SIZE + 123
    serial = sample_range(pair_model, 0, n, seed=8)
    cuts = [0, 1000, CHUNK_SIZE + 5, n]
    parts = [sample_range(pair_model, a, b, seed=8) for a, b in zip(cuts, cuts[1:])]
    assert np.array_equal(np.concatenate([p.points for p in parts]), serial.points)
    assert np.array_equal(np.concatenate([p.labels for p in parts]), serial.labels)
    assert parts[1].start == 1000

def test_point_stream_strips_labels_and_counts(pair_model):
    stream = point_stream(pair_model, seed=8)
    first = stream.take(5000)
    assert stream.consumed == 5000
    assert np.array_equal(first, sample_range(pair_model, 0, 5000, seed=8).points)
    assert np.array_equal(next(stream), sample_range(pair_model, 5000, 5001, seed=8).points[0])
    assert stream.consumed == 5001

def test_point_stream_batches_yield_exact_count(pair_model):
    stream = point_stream(pair_model, seed=1)
    sizes = [len(block) for block in stream.batches(10_000, size=3000)]
    assert sizes == [3000, 3000, 3000, 1000]
    assert stream.consumed == 10_000

def test_array_stream_exhaustion():
    stream = PointStream.from_array(np.arange(12.0).reshape(6, 2))
    stream.take(4)
    with pytest.raises(StreamExhaustedError):
        stream.take(3)
    assert list(PointStream.from_array(np.ones((3, 2))))[-1].tolist() == [1.0, 1.0]

def test_labeled_batch_access(pair_model):
    batch = sample_stream(pair_model, 100, seed=0)
    sample = batch[7]
    assert sample.label == batch.labels[7]
    assert np.array_equal(sample.point, batch.points[7])
    assert sum(batch.component_counts(2)) == 100
    assert len(list(batch.samples())) == 100
